"""Solving u_t - div(|Du|^(p-2) Du) = mu on B_R x (0, T) with zero data.

The Dirac source is spread over the cell that contains it; the flux is
regularised with (|Du|^2 + eps^2)^((p-2)/2).
"""
import numpy as np

from parawolff import GridSpec, RadonMeasure, make_params, solve_heat_oracle, solve_ibvp
from parawolff.solver import mass_history

grid = GridSpec(1, 129, 128, 1.0, 1.0)
dirac = RadonMeasure(1, 1.0, [[0.0]], [1.0])

for p in (1.3, 1.6, 1.9):
    u = solve_ibvp(dirac, make_params(1, p, 1e-6), grid)
    its = u.diagnostics["newton_iterations"]
    print(f"p={p}: sup u={u.values.max():.5f}  mean Newton its={np.mean(its):.1f}")

heat = solve_heat_oracle(dirac, grid)
print(f"heat equation: sup u={heat.values.max():.5f}")

# L1 mass never exceeds t * mu(B_R)
u = solve_ibvp(dirac, make_params(1, 1.5, 1e-6), grid)
for t, l1 in mass_history(u)[::32]:
    print(f"t={t:.3f}  |u(t)|_1={l1:.5f}")

# a two dimensional run with a smooth source
grid2 = GridSpec(2, 33, 32, 1.0, 1.0)
ring = RadonMeasure(2, 1.0, uniform_density=0.5)
u2 = solve_ibvp(ring, make_params(2, 1.7, 1e-6), grid2)
mid = u2.values[-1, 16]
print("final slice through the centre:", np.round(mid[::4], 4))
