import numpy as np
import pytest
from hypothesis import example, given, strategies as st

from parawolff.grid import GridField, GridSpec
from parawolff.measure import unit_ball_volume
from parawolff.sampling import (
    BallSampler, interp_time, space_time_integral, sup_in_time_ball_integral, time_samples,
)


@pytest.mark.parametrize("n,nx", [(1, 33), (2, 17)])
@pytest.mark.parametrize("radius", [0.01, 0.1, 0.45])
def test_ball_volume_exact_inside(n, nx, radius):
    grid = GridSpec(n, nx, 4, 1.0, 1.0)
    s = BallSampler(grid, np.full(n, 0.1), radius)
    assert s.points.shape[0] * s.weight == pytest.approx(unit_ball_volume(n) * radius ** n, rel=1e-14)
    assert np.all(s.dist < radius)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.005, 0.4))
@example(-0.5, 1e-12, 0.25)
def test_multilinear_reproduces_affine_fields(cx, cy, r):
    grid = GridSpec(2, 17, 2, 1.0, 1.0)
    x = grid.coords
    vals = np.stack([1 + 2 * x[..., 0] - 3 * x[..., 1]] * 3)
    s = BallSampler(grid, (cx, cy), r)
    got = s.spatial_values(vals)
    exact = 1 + 2 * s.points[:, 0] - 3 * s.points[:, 1]
    assert np.allclose(got, exact[None], atol=1e-12)


def test_bilinear_reproduced_but_not_quadratic():
    grid = GridSpec(2, 17, 1, 1.0, 1.0)
    x = grid.coords
    s = BallSampler(grid, (0.03, -0.07), 0.05)
    bil = np.stack([x[..., 0] * x[..., 1]] * 2)
    assert np.allclose(s.spatial_values(bil)[0], s.points[:, 0] * s.points[:, 1], atol=1e-14)
    quad = np.stack([x[..., 0] ** 2] * 2)
    err = np.max(np.abs(s.spatial_values(quad)[0] - s.points[:, 0] ** 2))
    assert 0 < err <= grid.h ** 2 / 4 + 1e-15


def test_interp_time_linear():
    rows = np.outer(np.arange(5.0), np.ones(3)) * 0.5
    got = interp_time(rows, 0.25, np.array([0.0, 0.1, 0.6, 1.0]))
    assert np.allclose(got[:, 0], 2.0 * np.array([0.0, 0.1, 0.6, 1.0]))


def test_time_samples_short_and_long():
    grid = GridSpec(1, 9, 64, 1.0, 1.0)
    t, w = time_samples(grid, 0.5, 0.52)
    assert t.size == 16 and np.sum(w) == pytest.approx(0.02)
    t, w = time_samples(grid, 0.25, 0.75)
    assert np.all((t >= 0.25) & (t <= 0.75)) and np.all(w == grid.dt)
    t, w = time_samples(grid, 1.2, 1.5)
    assert t.size == 0


def test_space_time_integral_constant():
    grid = GridSpec(2, 17, 64, 1.0, 1.0)
    u = GridField(np.ones((65, 17, 17)), grid)
    got = space_time_integral(u, (0.0, 0.0), 0.3, 0.4, 0.41)
    assert got == pytest.approx(np.pi * 0.09 * 0.01, rel=1e-12)
    got = space_time_integral(u, (0.0, 0.0), 0.3, 0.25, 0.75)
    # level sum includes both end levels of the window
    assert got == pytest.approx(np.pi * 0.09 * (0.5 + grid.dt), rel=1e-12)


def test_sup_in_time_ball_integral():
    grid = GridSpec(1, 33, 8, 1.0, 1.0)
    vals = np.outer(grid.times, np.ones(33))
    u = GridField(vals, grid)
    assert sup_in_time_ball_integral(u, (0.0,), 0.5) == pytest.approx(1.0, rel=1e-12)
