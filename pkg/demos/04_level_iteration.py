"""Level iteration at one point of a solved field.

Each level either halves the step or lifts the level to where the level
functional equals kappa; the limit level bounds u(x0, t0) from above.
"""
import numpy as np

from parawolff.iteration import delta0_estimate, make_iteration_params, run_iteration
from parawolff.suite import iteration_invariants, suite_field

u, m, prm = suite_field(2, 1.6, "two_atom", 0)
x0, t0 = (0.25, 0.125), 0.5
it = make_iteration_params(u, prm, x0, t0, kappa=0.1)
print(f"R0={it.R0:.4f}  B={it.B:.3f}  c_R0={it.c_R0:.4f}")

state = run_iteration(u, it, prm, m)
for j, (l, d, b, M) in enumerate(zip(state.levels[1:], state.deltas, state.branches, state.slot_counts)):
    if j < 8 or j == state.j - 1:
        print(f"j={j:2d}  l={l:.6f}  delta={d:.3e}  {b:7s}  slots={M}")
s = state.summary
print("stop:", state.stop_reason, " u0 =", round(s["u0"], 6), " l_limit =", round(s["l_limit"], 6))
print("theorem terms:", {k: round(v, 5) for k, v in s["theorem_terms"].items()}, " gamma =", round(s["gamma_emp"], 4))
print("invariants:", iteration_invariants(state, it))

rep = delta0_estimate(u, it, prm, m)
print("first step:", rep.case, rep.delta0, np.round(rep.terms, 5))
