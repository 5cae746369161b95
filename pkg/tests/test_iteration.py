import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parawolff.grid import GridField, GridSpec
from parawolff.iteration import (
    CapWarning, IterationParams, RootBracketError, _LevelFunctional, admissible_radius, advance_level,
    check_iteration_params, cover_sum, delta0_estimate, initial_state, make_iteration_params,
    run_iteration, time_slots,
)
from parawolff.measure import RadonMeasure
from parawolff.params import make_params
from parawolff.suite import iteration_invariants

GRID = GridSpec(1, 65, 64, 1.0, 1.0)
PRM = make_params(1, 1.5, 1e-6)


def field(vals):
    return GridField(np.asarray(vals, dtype=float), GRID)


def bump(height):
    x = GRID.coords[..., 0]
    return field(height * np.exp(-8 * x ** 2)[None] * np.ones((GRID.nt + 1, 1)))


def test_zero_field_halves_every_step():
    u = field(np.zeros((65, 65)))
    it = make_iteration_params(u, PRM, (0.0,), 0.5)
    assert it.B == 1.0 and it.c_R0 == 0.0
    assert check_iteration_params(it, GRID, PRM) == []
    st_ = run_iteration(u, it, PRM, RadonMeasure(1, 1.0))
    assert set(st_.branches) == {"halving"}
    assert st_.deltas[0] == it.R0 ** 2 / 2
    assert st_.stop_reason == "converged"
    assert st_.l_limit == pytest.approx(2 * it.R0 ** 2, rel=1e-12)
    assert all(iteration_invariants(st_, it).values())


def test_admissible_radius():
    prm = make_params(2, 1.6, 1e-6)
    g = GridSpec(2, 17, 32, 1.0, 1.0)
    beta = prm.beta
    assert admissible_radius(g, prm, (0.5, 0.0), 0.5) == pytest.approx(min(0.5, 0.5 ** (1 / beta)))
    assert admissible_radius(g, prm, (0.0, 0.0), 1e-3) == pytest.approx(1e-3 ** (1 / beta))


def test_check_iteration_params_reports_violations():
    it = IterationParams(kappa=1.5, B=0.5, R0=0.9, x0=(0.0,), t0=0.5)
    bad = check_iteration_params(it, GRID, PRM)
    assert len(bad) == 4


@given(st.floats(0.05, 0.45), st.floats(1e-4, 10.0), st.integers(0, 8))
@settings(max_examples=60)
def test_slot_count_and_plateau_cover(R0, delta_prev, j):
    it = IterationParams(kappa=0.1, B=1.0, R0=R0, x0=(0.0,), t0=0.5)
    slots = time_slots(j, delta_prev, it, PRM)
    rho = R0 * 2.0 ** -j
    half = rho ** PRM.beta
    spacing = 0.375 * delta_prev ** (2 - PRM.p) * rho ** PRM.p
    assert slots.count == max(1, int(np.ceil(2 * half / spacing - 1e-12)))
    if slots.count == 1:
        assert slots.centers(0) == pytest.approx(0.5)
    # a cylinder of half height delta_prev^(2-p) rho^p leaves each time of I_j on a plateau
    if slots.count < 10 ** 6:
        H = delta_prev ** (2 - PRM.p) * rho ** PRM.p
        t = np.linspace(0.5 - half, 0.5 + half, 41)
        assert np.min(cover_sum(slots, H, t, PRM.k, PRM.p)) >= 1 - 1e-12


def test_time_slots_overflow_guard():
    it = IterationParams(kappa=0.1, B=1.0, R0=0.4, x0=(0.0,), t0=0.5)
    with pytest.raises(OverflowError):
        time_slots(0, 1e-30, it, make_params(1, 1.2, 1e-6))


def test_root_branch_hits_kappa():
    u = bump(5.0)
    it = make_iteration_params(u, PRM, (0.0,), 0.5, root_tol=1e-9)
    state = advance_level(u, initial_state(it), it, PRM, RadonMeasure(1, 1.0))
    assert state.branches[0] == "root"
    l_bar = state.levels[1]
    base = state.levels[0]
    A = _LevelFunctional(u, it, PRM, 0, base, it.R0 ** 2)
    assert A(l_bar) <= it.kappa
    # brute-force scan: the functional is above kappa just below the root
    step = 10 * it.root_tol * (l_bar - base)
    assert A(l_bar - step) > it.kappa
    slope = (A(l_bar - step) - A(l_bar)) / step
    assert abs(A(l_bar) - it.kappa) <= 10 * it.root_tol * (l_bar - base) * slope + 1e-12
    assert state.right_values[0] <= 3 * it.c_R0 / it.B * (1 + 1e-9)


def test_root_bracket_error():
    u = bump(50.0)
    it = IterationParams(kappa=0.1, B=1.0, R0=0.2, x0=(0.0,), t0=0.5)
    with pytest.raises(RootBracketError):
        advance_level(u, initial_state(it), it, PRM, RadonMeasure(1, 1.0))


def test_cap_warning():
    u = bump(2.0)
    it = make_iteration_params(u, PRM, (0.0,), 0.5, J_max=2)
    with pytest.warns(CapWarning):
        st_ = run_iteration(u, it, PRM, RadonMeasure(1, 1.0))
    assert st_.stop_reason == "cap_reached" and st_.j == 2


def test_bump_run_bounds_value_and_invariants():
    u = bump(2.0)
    it = make_iteration_params(u, PRM, (0.0,), 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        st_ = run_iteration(u, it, PRM, RadonMeasure(1, 1.0))
    assert st_.summary["consistent"]
    assert st_.l_limit >= u.at((0.0,), 0.5)
    assert all(iteration_invariants(st_, it).values())
    assert np.isfinite(st_.summary["gamma_emp"])


def test_delta0_estimate_cases():
    zero = field(np.zeros((65, 65)))
    it = make_iteration_params(zero, PRM, (0.0,), 0.5)
    rep = delta0_estimate(zero, it, PRM, RadonMeasure(1, 1.0))
    assert rep.case == "halving" and rep.delta0 == it.R0 ** 2 / 2
    u = bump(5.0)
    it = make_iteration_params(u, PRM, (0.0,), 0.5)
    rep = delta0_estimate(u, it, PRM, RadonMeasure(1, 1.0))
    assert rep.case == "kappa_root"
    assert rep.delta0 <= 10 * sum(rep.terms)
