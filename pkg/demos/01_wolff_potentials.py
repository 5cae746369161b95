"""Wolff potentials of a few simple measures.

W(x, R) = int_0^R (mu(B_r(x)) / r^(n-p))^(1/(p-1)) dr / r
"""
import numpy as np

from parawolff import RadonMeasure, make_params, wolff_potential
from parawolff.measure import constant_annulus
from parawolff.params import potential_params

prm = make_params(2, 1.6, 1e-6)

# a single atom: the closed form is m^(1/(p-1)) (R^e - d^e)/e with e = (p-n)/(p-1)
atom = RadonMeasure(2, 1.0, [[0.0, 0.0]], [1.0])
e = (prm.p - 2) / (prm.p - 1)
for d in (0.05, 0.1, 0.2, 0.4):
    got = wolff_potential(atom, prm, [d, 0.0], 0.5).value
    exact = (0.5 ** e - d ** e) / e
    print(f"d={d:4.2f}  W={got:.10f}  closed form={exact:.10f}")

# at the atom itself the integrand blows up like r^slope; the walk reports it
prof = wolff_potential(atom, prm, [0.0, 0.0], 0.5)
print("at the atom:", prof.value, "diverged:", prof.diverged, "log-slope:", round(prof.slope, 4))

# in one dimension p > n, so the same atom has a finite potential there
prm1 = make_params(1, 1.5, 1e-6)
print("n=1 atom at x:", wolff_potential(RadonMeasure(1, 1.0, [[0.0]], [1.0]), prm1, [0.0], 1.0).value)

# homogeneity in the mass
ring = RadonMeasure(2, 1.0, radial_components=[constant_annulus([0, 0], 0.3, 0.6, 1.0)])
base = wolff_potential(ring, prm, [0.1, 0.0], 0.8).value
for s in (0.5, 2.0, 10.0):
    ratio = wolff_potential(ring.scaled(s), prm, [0.1, 0.0], 0.8).value / base
    print(f"s={s:5.1f}  W(s mu)/W(mu)={ratio:.10f}  s^(1/(p-1))={s ** (1 / (prm.p - 1)):.10f}")

# potentials are defined for any p > 1, also outside the solver's range
print("n=2, p=1.2 uniform:", wolff_potential(RadonMeasure(2, 1.0, uniform_density=1.0),
                                             potential_params(2, 1.2), [0.0, 0.0], 0.5).value)

# profile of W(., R) along a line through the annulus
xs = np.linspace(-0.9, 0.9, 7)
print(np.round([wolff_potential(ring, prm, [x, 0.0], 0.25).value for x in xs], 5))
