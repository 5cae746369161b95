import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from parawolff.functionals import (
    Cylinder, DomainError, a_star, energy_audit, g_function, make_cutoffs, psi_exponent,
    psi_transform, spatial_cutoff, theta_bar, theta_bar_slope_bound,
)
from parawolff.grid import GridField, GridSpec
from parawolff.measure import RadonMeasure
from parawolff.params import ProblemParams, make_params

p_st = st.floats(1.05, 1.95)


def psi_oracle(a, p, lam):
    mp.mp.dps = 30
    p, lam = mp.mpf(p), mp.mpf(lam)
    return float(mp.quad(lambda z: (1 + z) ** (-(1 - lam) / p) * z ** (-2 * lam / p), [0, min(a, 1), a]
                         if a > 1 else [0, a]))


def test_g_function_examples():
    assert g_function(2.0, 0.25) == 2.0
    assert g_function(0.25, 0.25) == pytest.approx(0.125, rel=1e-14)
    assert g_function(0.0, 0.1) == 0.0
    assert g_function(1.0, 0.1) == 1.0


@given(st.floats(0.0, 0.45))
def test_g_function_continuous_and_increasing(lam):
    v = np.linspace(0.0, 3.0, 1000)
    g = g_function(v, lam)
    assert np.all(np.diff(g) >= 0)
    assert abs(g_function(1.0 + 1e-12, lam) - g_function(1.0, lam)) < 1e-11


def test_psi_golden_value():
    prm = ProblemParams(n=1, p=1.8, eps_reg=1e-6, lam=0.125, k=3.8)
    assert psi_transform(1.0, 0.0, 1.0, prm) == pytest.approx(0.97989497012448262063, rel=1e-12)


@pytest.mark.parametrize("a", [1e-6, 0.01, 0.3, 2.0, 50.0, 1e4])
@pytest.mark.parametrize("p,lam", [(1.2, 0.05), (1.5, 0.125), (1.8, 0.2)])
def test_psi_against_mpmath(a, p, lam):
    prm = ProblemParams(n=1, p=p, eps_reg=1e-6, lam=lam, k=p + 2)
    assert psi_transform(a, 0.0, 1.0, prm) == pytest.approx(psi_oracle(a, p, lam), rel=1e-9)


@given(st.floats(-5, 5), st.floats(-2, 2), st.floats(0.01, 10), st.floats(0.1, 10))
def test_psi_depends_on_ratio_only(u, l, delta, s):
    prm = make_params(1, 1.5, 1e-6)
    a = psi_transform(u, l, delta, prm)
    b = psi_transform(s * u, s * l, s * delta, prm)
    assert b == pytest.approx(a, rel=1e-12, abs=1e-300)
    if u <= l:
        assert a == 0.0


def test_psi_monotone_and_bracket():
    prm = make_params(1, 1.6, 1e-6)
    a = np.linspace(0, 100, 2001)
    vals = psi_transform(a, 0.0, 1.0, prm)
    assert np.all(np.diff(vals) > 0)
    # psi(a) = a^(1/rho) rho + const + o(1): successive increments grow by 2^(1/rho)
    big = psi_transform(np.array([1e6, 2e6, 4e6]), 0.0, 1.0, prm)
    ratio = (big[2] - big[1]) / (big[1] - big[0])
    assert np.log2(ratio) == pytest.approx(1.0 / psi_exponent(prm), abs=1e-5)
    assert psi_exponent(prm) == prm.p / (prm.p - 1 - prm.lam)


@given(p_st)
def test_theta_bar_shape(p):
    s = np.linspace(-1.5, 1.5, 3001)
    th = theta_bar(s, p)
    assert np.all((th >= 0) & (th <= 1))
    assert np.all(th[np.abs(s) <= 2 ** (1 - p)] == 1.0)
    assert np.all(th[np.abs(s) >= 1] == 0.0)
    half = th[s >= 0]
    assert np.all(np.diff(half) <= 0)
    slope = np.max(np.abs(np.diff(th) / np.diff(s)))
    assert slope <= theta_bar_slope_bound(p) * (1 + 1e-6)


def test_spatial_cutoff_shape():
    r = np.linspace(0, 1, 1001)
    xi = spatial_cutoff(r, 0.8)
    assert np.all(xi[r <= 0.4] == 1) and np.all(xi[r >= 0.8] == 0)
    assert np.max(np.abs(np.diff(xi) / np.diff(r))) == pytest.approx(2 / 0.8, rel=1e-9)


def test_cylinder_domain():
    grid = GridSpec(1, 33, 32, 1.0, 1.0)
    Cylinder((0.0,), 0.5, 0.4, 1.0).check_inside(grid, 1.5)
    with pytest.raises(DomainError):
        Cylinder((0.7,), 0.5, 0.4, 1.0).check_inside(grid, 1.5)
    with pytest.raises(DomainError):
        Cylinder((0.0,), 0.1, 0.4, 1.0).check_inside(grid, 1.5)
    with pytest.raises(ValueError):
        Cylinder((0.0,), 0.5, 0.0, 1.0)


def constant_field(grid, c):
    return GridField(np.full((grid.nt + 1,) + grid.shape, float(c)), grid)


@pytest.mark.parametrize("n", [1, 2])
def test_a_star_constant_field_oracle(n):
    grid = GridSpec(n, 33 if n == 1 else 17, 64, 1.0, 1.0)
    prm = make_params(n, 1.6 if n == 2 else 1.5, 1e-6)
    cyl = Cylinder((0.0,) * n, 0.5, 0.5, 0.5)
    cut = make_cutoffs(grid, cyl, prm)
    c, l, d = 2.0, 1.0, 0.5
    rep = a_star(constant_field(grid, c), cyl, l, d, cut, prm)
    v = (c - l) / d
    p, k = prm.p, prm.k
    first = d ** (p - 2) * cyl.rho ** (-(n + p)) * v * np.sum(cut.theta ** (k - p)) * grid.dt \
        * np.sum(cut.xi ** (k - p)) * grid.cell_volume
    second = cyl.rho ** (-n) * v * np.sum(cut.xi ** k) * grid.cell_volume * np.max(cut.theta ** k)
    assert rep.first_term == pytest.approx(first, rel=1e-12)
    assert rep.second_term == pytest.approx(second, rel=1e-12)
    assert a_star(constant_field(grid, c), cyl, c, d, cut, prm).a_value == 0.0


@given(st.floats(-3, 3), st.floats(0.2, 5))
def test_a_star_shift_and_scale(shift, s):
    grid = GridSpec(1, 33, 32, 1.0, 1.0)
    prm = make_params(1, 1.4, 1e-6)
    x = grid.coords[..., 0]
    vals = np.exp(-4 * x ** 2)[None] * (1 + grid.times)[:, None]
    cyl = Cylinder((0.0,), 0.5, 0.5, 0.4)
    cut = make_cutoffs(grid, cyl, prm)
    base = a_star(GridField(vals, grid), cyl, 0.3, 0.4, cut, prm)
    shifted = a_star(GridField(vals + shift, grid), cyl, 0.3 + shift, 0.4, cut, prm)
    assert shifted.a_value == pytest.approx(base.a_value, rel=1e-10)
    scaled = a_star(GridField(s * vals, grid), cyl, 0.3 * s, 0.4 * s, cut, prm)
    assert scaled.first_term == pytest.approx(base.first_term * s ** (prm.p - 2), rel=1e-10)
    assert scaled.second_term == pytest.approx(base.second_term, rel=1e-10)


def test_a_star_monotone_in_level():
    grid = GridSpec(1, 33, 32, 1.0, 1.0)
    prm = make_params(1, 1.4, 1e-6)
    vals = np.exp(-4 * grid.coords[..., 0] ** 2)[None] * np.ones((grid.nt + 1, 1))
    u = GridField(vals, grid)
    cyl = Cylinder((0.0,), 0.5, 0.5, 0.4)
    cut = make_cutoffs(grid, cyl, prm)
    a = [a_star(u, cyl, l, 0.4, cut, prm).a_value for l in np.linspace(0, 1.2, 25)]
    assert np.all(np.diff(a) <= 1e-15)


def test_energy_audit_trivial_cases():
    grid = GridSpec(1, 33, 32, 1.0, 1.0)
    prm = make_params(1, 1.5, 1e-6)
    cyl = Cylinder((0.0,), 0.5, 0.5, 0.5)
    cut = make_cutoffs(grid, cyl, prm)
    zero = constant_field(grid, 0.0)
    assert energy_audit(zero, cyl, 0.0, 0.5, cut, RadonMeasure(1, 1.0), prm) == (0.0, 0.0, 0.0)
    m = RadonMeasure(1, 1.0, [[0.0]], [2.0])
    lhs, ri, rm = energy_audit(zero, cyl, 0.0, 0.5, cut, m, prm)
    assert rm == pytest.approx(cyl.rho ** prm.p / 0.5 ** (prm.p - 1) * 2.0)
    # constant field above the level: no gradient, and the sup term is G(v) times the xi mass
    lhs, ri, rm = energy_audit(constant_field(grid, 1.0), cyl, 0.0, 0.5, cut, RadonMeasure(1, 1.0), prm)
    assert lhs == pytest.approx(g_function(2.0, prm.lam) * np.sum(cut.xi ** prm.k) * grid.h
                                * np.max(cut.theta) ** prm.k, rel=1e-12)
    assert ri > 0 and rm == 0.0
