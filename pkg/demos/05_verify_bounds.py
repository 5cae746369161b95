"""Empirical constants of the pointwise and global bounds.

gamma_emp is the left side divided by the sum of the right-hand terms;
what matters is that it stays bounded under grid refinement.
"""
from parawolff.suite import refinement_ratio, suite_field
from parawolff.verifier import (
    check_proposition, check_theorem_i, check_theorem_ii, dyadic_radii, proposition_threshold,
    sample_points, standard_grid, theorem_radius,
)

points = sample_points(standard_grid(1, 0), 5, seed=0)
best = {}
for level in (0, 1, 2):
    u, m, prm = suite_field(1, 1.5, "annulus", level)
    for x0, t0 in points:
        radii = dyadic_radii(theorem_radius(u.grid, prm, x0, t0))
        for rep in (check_theorem_i(u, m, prm, (x0, t0), radii), check_theorem_ii(u, m, prm, (x0, t0), radii)):
            key = (rep.kind, level)
            best[key] = max(best.get(key, 0.0), rep.gamma_emp)
    prop, mass = check_proposition(u, m, prm)
    print(f"level {level}: {prop.kind} gamma={prop.gamma_emp:.4f}  mass ratio={mass.gamma_emp:.4f}")
for kind in ("thm_i", "thm_ii"):
    vals = [best[(kind, lv)] for lv in (0, 1, 2)]
    print(kind, [round(v, 5) for v in vals], "ratio of the finest two:", round(refinement_ratio(*vals[1:]), 4))

# the regime of the global bound is decided by T against a threshold
u, m, prm = suite_field(1, 1.5, "uniform", 0)
thr = proposition_threshold(prm, 1.0, 1.0)
print("threshold T* =", thr, "so T = 1 is regime", "i" if 1.0 >= thr else "ii")
