"""The level functional and the energy audit on a solved field.

Cylinders are intrinsic: the half height delta^(2-p) rho^p is set by the
step delta itself.
"""
import numpy as np

from parawolff import GridSpec, RadonMeasure, make_params, solve_ibvp
from parawolff.functionals import Cylinder, a_star, energy_audit, make_cutoffs, psi_transform

prm = make_params(1, 1.5, 1e-6)
grid = GridSpec(1, 129, 128, 1.0, 1.0)
m = RadonMeasure(1, 1.0, [[0.0]], [1.0])
u = solve_ibvp(m, prm, grid)

# psi only depends on (u - l)/delta
print("psi(1)      =", psi_transform(1.0, 0.0, 1.0, prm))
print("psi(3, 1, 2) =", psi_transform(3.0, 1.0, 2.0, prm))

cyl = Cylinder((0.25,), 0.5, 0.25, 0.2)
cut = make_cutoffs(grid, cyl, prm)
for level in (0.0, 0.1, 0.2, 0.4):
    rep = a_star(u, cyl, level, cyl.delta, cut, prm)
    print(f"l={level:.1f}  first={rep.first_term:.5f}  second={rep.second_term:.5f}  A={rep.a_value:.5f}")

# energy audit: lhs against the two right-hand terms, refined twice
for nx, nt in ((65, 64), (129, 128), (257, 256)):
    g = GridSpec(1, nx, nt, 1.0, 1.0)
    v = solve_ibvp(m, prm, g)
    lhs, ri, rm = energy_audit(v, cyl, 0.1, cyl.delta, make_cutoffs(g, cyl, prm), m, prm)
    print(f"nx={nx:3d}  lhs={lhs:.5f}  interior={ri:.5f}  measure={rm:.5f}  gamma={lhs / (ri + rm):.4f}")
