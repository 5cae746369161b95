import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from parawolff.grid import GridError, GridSpec
from parawolff.measure import (
    RadialComponent, RadonMeasure, ball_mass, constant_annulus, lens_volume, mollify_to_grid,
    total_mass, unit_ball_volume,
)


def monte_carlo_ball_mass(density, n, x, r, samples=400_000, seed=0):
    """Independent oracle: mean density over uniform samples of B_r(x) times its volume."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-r, r, size=(samples, n))
    pts = pts[np.linalg.norm(pts, axis=1) < r] + x
    vol = unit_ball_volume(n) * r ** n
    return float(np.mean(density(pts)) * vol), vol / np.sqrt(len(pts))


def test_atom_strictly_inside():
    m = RadonMeasure(2, 1.0, [[0.0, 0.0]], [3.0])
    assert ball_mass(m, [0.0, 0.0], 0.1) == 3.0


def test_atom_on_sphere_is_excluded():
    m = RadonMeasure(2, 1.0, [[0.5, 0.0]], [3.0])
    assert ball_mass(m, [0.0, 0.0], 0.5) == 0.0
    # left-continuity in r: any larger radius picks the atom up
    assert ball_mass(m, [0.0, 0.0], 0.5 + 1e-12) == 3.0


def test_uniform_interior_ball_n2():
    m = RadonMeasure(2, 1.0, uniform_density=2.0)
    val = ball_mass(m, [0.1, -0.2], 0.3)
    assert val == pytest.approx(2 * np.pi * 0.09, rel=1e-12)
    assert val == pytest.approx(0.565487, abs=1e-6)
    mc, err = monte_carlo_ball_mass(lambda p: 2.0 * (np.linalg.norm(p, axis=1) < 1.0), 2,
                                    np.array([0.1, -0.2]), 0.3)
    assert abs(val - mc) < 5 * err


@pytest.mark.parametrize("n", [1, 2, 3])
def test_uniform_ball_clipped_by_domain_matches_monte_carlo(n):
    m = RadonMeasure(n, 1.0, uniform_density=1.5)
    x = np.full(n, 0.6 / np.sqrt(n))
    val = ball_mass(m, x, 0.7)
    mc, err = monte_carlo_ball_mass(lambda p: 1.5 * (np.linalg.norm(p, axis=1) < 1.0), n, x, 0.7)
    assert abs(val - mc) < 5 * err


@pytest.mark.parametrize("n", [1, 2, 3])
def test_polynomial_profile_off_centre_matches_monte_carlo(n):
    comp = RadialComponent(np.zeros(n), (0.0, 0.3, 0.8), ((1.0, 2.0), (0.5, 0.0, 1.0)))
    m = RadonMeasure(n, 1.0, radial_components=[comp])
    x = np.zeros(n)
    x[0] = 0.35
    val = ball_mass(m, x, 0.5)
    mc, err = monte_carlo_ball_mass(lambda p: comp.profile(np.linalg.norm(p, axis=1)), n, x, 0.5,
                                    samples=800_000)
    assert abs(val - mc) < 5 * err


def test_total_mass_examples():
    assert total_mass(RadonMeasure(2, 1.0)) == 0.0
    assert total_mass(RadonMeasure(2, 1.0, [[0.1, 0.0], [0.0, 0.2]], [1.0, 2.0])) == 3.0
    assert total_mass(RadonMeasure(1, 1.0, uniform_density=1.0)) == pytest.approx(2.0)


def test_total_mass_equals_full_ball():
    m = RadonMeasure(2, 1.0, [[0.2, 0.1]], [0.7], [constant_annulus([0, 0], 0.3, 0.6, 1.2)], 0.4)
    assert total_mass(m) == pytest.approx(ball_mass(m, [0.0, 0.0], 1.0), rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lens_volume_limits(n):
    assert lens_volume(n, 1.0, 0.3, 0.2) == pytest.approx(unit_ball_volume(n) * 0.3 ** n)
    assert lens_volume(n, 1.0, 0.3, 1.4) == 0.0
    assert lens_volume(n, 0.5, 2.0, 0.1) == pytest.approx(unit_ball_volume(n) * 0.5 ** n)


def test_ball_mass_zero_radius():
    m = RadonMeasure(2, 1.0, [[0.0, 0.0]], [1.0], uniform_density=1.0)
    assert ball_mass(m, [0.0, 0.0], 0.0) == 0.0


def test_negative_mass_rejected():
    with pytest.raises(ValueError):
        RadonMeasure(2, 1.0, [[0.0, 0.0]], [-1.0])
    with pytest.raises(ValueError):
        RadonMeasure(2, 1.0, uniform_density=-1.0)


def _random_measure(draw_seed, n):
    rng = np.random.default_rng(draw_seed)
    k = rng.integers(0, 4)
    locs = rng.uniform(-0.5, 0.5, size=(k, n))
    masses = rng.uniform(0, 2, size=k)
    comps = [constant_annulus(rng.uniform(-0.2, 0.2, n), rng.uniform(0, 0.2), rng.uniform(0.25, 0.5),
                              rng.uniform(0.1, 3))]
    if rng.random() < 0.5:
        comps.append(RadialComponent(np.zeros(n), (0.0, 0.4), ((1.0, -1.0, 0.5),)))
    return RadonMeasure(n, 1.0, locs, masses, comps, rng.uniform(0, 1))


@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 3),
       r1=st.floats(0.0, 1.5), r2=st.floats(0.0, 1.5))
def test_ball_mass_monotone(seed, n, r1, r2):
    m = _random_measure(seed, n)
    x = np.random.default_rng(seed + 1).uniform(-0.7, 0.7, n) / np.sqrt(n)
    lo, hi = sorted((r1, r2))
    assert ball_mass(m, x, lo) <= ball_mass(m, x, hi) + 1e-12 * max(1.0, total_mass(m))


@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 3), r=st.floats(0.0, 1.5))
def test_ball_mass_additive(seed, n, r):
    m = _random_measure(seed, n)
    x = np.random.default_rng(seed + 2).uniform(-0.5, 0.5, n)
    parts = sum(ball_mass(part, x, r) for part in m.split())
    assert ball_mass(m, x, r) == pytest.approx(parts, rel=1e-12, abs=1e-14)


@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 2))
def test_mollify_conserves_mass(seed, n):
    m = _random_measure(seed, n)
    grid = GridSpec(n, 65 if n == 1 else 33, 1, 1.0, 1.0)
    f = mollify_to_grid(m, grid)
    assert np.all(f >= 0)
    assert np.sum(f) * grid.cell_volume == pytest.approx(total_mass(m), rel=1e-10)


def test_mollify_empty_and_single_atom():
    grid = GridSpec(2, 33, 1, 1.0, 1.0)
    assert np.all(mollify_to_grid(RadonMeasure(2, 1.0), grid) == 0)
    f = mollify_to_grid(RadonMeasure(2, 1.0, [[0.1, 0.0]], [1.0]), grid, width=3 * grid.h)
    assert np.sum(f) * grid.cell_volume == pytest.approx(1.0, rel=1e-12)


def test_mollify_uniform_equals_density_away_from_boundary():
    grid = GridSpec(2, 33, 1, 1.0, 1.0)
    f = mollify_to_grid(RadonMeasure(2, 1.0, uniform_density=0.7), grid)
    core = grid.radius < 1.0 - 2 * grid.h
    assert np.allclose(f[core], 0.7, rtol=1e-14)


def test_mollify_rejects_narrow_width_and_escaping_atoms():
    grid = GridSpec(1, 65, 1, 1.0, 1.0)
    with pytest.raises(GridError):
        mollify_to_grid(RadonMeasure(1, 1.0, [[0.0]], [1.0]), grid, width=0.5 * grid.h)
    with pytest.raises(GridError):
        mollify_to_grid(RadonMeasure(1, 1.0, [[0.99]], [1.0]), grid)


def test_roundtrip_dict():
    m = RadonMeasure(2, 1.0, [[0.2, 0.1]], [0.7], [constant_annulus([0, 0], 0.3, 0.6, 1.2)], 0.4)
    back = RadonMeasure.from_dict(m.to_dict())
    assert back.to_dict() == m.to_dict()
    assert ball_mass(back, [0.1, 0.1], 0.45) == ball_mass(m, [0.1, 0.1], 0.45)


def _lens_2d_mp(a, b, d):
    a, b, d = mp.mpf(a), mp.mpf(b), mp.mpf(d)
    c1 = (d * d + a * a - b * b) / (2 * d * a)
    c2 = (d * d + b * b - a * a) / (2 * d * b)
    kite = (-d + a + b) * (d + a - b) * (d - a + b) * (d + a + b)
    return a * a * mp.acos(c1) + b * b * mp.acos(c2) - mp.sqrt(kite) / 2


@pytest.mark.parametrize("gap", [1e-9, 1e-6, 1e-3, 0.1, 0.5])
def test_lens_volume_2d_near_tangency(gap):
    mp.mp.dps = 60
    a, d = 0.6, 0.7315437444199766
    b = d - a + gap
    assert lens_volume(2, a, b, d) == pytest.approx(float(_lens_2d_mp(a, b, d)), rel=1e-6)


def test_lens_volume_2d_monotone_at_onset():
    d = 0.7315437444199766
    r = (d - 0.6) + np.geomspace(1e-12, 1e-4, 200)
    v = lens_volume(2, 0.6, r, d)
    assert np.all(np.diff(v) > 0)
