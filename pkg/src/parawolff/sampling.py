"""Quadrature on balls and time windows using the multilinear reconstruction.

Balls resolved by the grid are sampled at the grid nodes themselves, so
sums reduce to nodal sums. Balls smaller than a few cells are sampled on a
refined lattice through the centre and the field is read off its
piecewise-multilinear interpolant, which keeps scale-invariant functionals
meaningful below the grid spacing.
"""

from itertools import product

import numpy as np

from .measure import unit_ball_volume


class BallSampler:
    """Lattice points of the open ball B_radius(center) with interpolation weights."""

    def __init__(self, grid, center, radius, min_per_radius=8):
        self.grid = grid
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        h, n = grid.h, grid.n
        refine = max(1, int(np.ceil(min_per_radius * h / self.radius - 1e-9)))
        hs = h / refine
        K = int(np.floor(self.radius / hs + 1e-9))
        ticks = hs * np.arange(-K, K + 1)
        offsets = np.array(list(product(ticks, repeat=n)))
        dist = np.linalg.norm(offsets, axis=1)
        pts = self.center + offsets[dist < self.radius * (1 - 1e-12)]
        dist = dist[dist < self.radius * (1 - 1e-12)]
        inside = np.all(np.abs(pts) <= grid.R * (1 + 1e-12), axis=1)
        self.points, self.dist = pts[inside], dist[inside]
        self.weight = hs ** n
        if np.all(inside) and self.points.shape[0]:
            # balls inside the grid cube: spread the exact volume over the lattice
            self.weight = unit_ball_volume(n) * self.radius ** n / self.points.shape[0]
        self.spacing = hs
        self._corners, self._cweights = self._interp_stencil()

    def _interp_stencil(self):
        g = self.grid
        pos = (self.points + g.R) / g.h
        i0 = np.clip(np.floor(pos + 1e-9).astype(int), 0, g.nx - 2)
        # a point within 1e-9 cells below a grid line keeps its small negative
        # fraction: linear extrapolation that far is exact for multilinear data
        frac = pos - i0
        corners, weights = [], []
        for bits in product((0, 1), repeat=g.n):
            bits = np.asarray(bits)
            idx = i0 + bits
            flat = np.ravel_multi_index(tuple(idx.T), (g.nx,) * g.n)
            w = np.prod(np.where(bits == 1, frac, 1.0 - frac), axis=1)
            corners.append(flat)
            weights.append(w)
        return np.stack(corners), np.stack(weights)

    def spatial_values(self, values):
        """Interpolated values, shape (time levels, points), from a field array."""
        flat = values.reshape(values.shape[0], -1)
        out = np.zeros((flat.shape[0], self.points.shape[0]))
        for c, w in zip(self._corners, self._cweights):
            out += flat[:, c] * w
        return out


def interp_time(rows, dt, times):
    """Linear interpolation in time of per-level rows (levels, points) at ``times``."""
    nt = rows.shape[0] - 1
    pos = np.asarray(times, dtype=float) / dt
    i0 = np.clip(np.floor(pos + 1e-9).astype(int), 0, max(nt - 1, 0))
    frac = np.clip(pos - i0, 0.0, 1.0)[..., None]
    if nt == 0:
        return np.broadcast_to(rows[0], frac.shape[:-1] + rows.shape[1:]).copy()
    return (1.0 - frac) * rows[i0] + frac * rows[i0 + 1]


def time_samples(grid, t_lo, t_hi, min_samples=16):
    """Sample times and weights for the window (t_lo, t_hi) clipped to [0, T].

    Windows spanning at least ``min_samples`` steps use the time levels
    inside (weight ``dt``); shorter ones use ``min_samples`` midpoints.
    """
    lo, hi = max(t_lo, 0.0), min(t_hi, grid.T)
    if hi <= lo:
        return np.zeros(0), np.zeros(0)
    if hi - lo >= min_samples * grid.dt:
        t = grid.times
        sel = (t > lo - 1e-12 * grid.T) & (t < hi + 1e-12 * grid.T)
        return t[sel], np.full(int(np.sum(sel)), grid.dt)
    w = (hi - lo) / min_samples
    return lo + w * (np.arange(min_samples) + 0.5), np.full(min_samples, w)


def space_time_integral(u, center, radius, t_lo, t_hi, func=lambda v: np.maximum(v, 0.0)):
    """Integral of func(u) over B_radius(center) x (t_lo, t_hi)."""
    sampler = BallSampler(u.grid, center, radius)
    rows = sampler.spatial_values(u.values)
    t, wt = time_samples(u.grid, t_lo, t_hi)
    if t.size == 0 or sampler.points.shape[0] == 0:
        return 0.0
    vals = interp_time(rows, u.grid.dt, t)
    return float(wt @ (func(vals) @ np.full(vals.shape[1], sampler.weight)))


def sup_in_time_ball_integral(u, center, radius, func=np.abs):
    """max over time levels of the integral of func(u) over B_radius(center)."""
    sampler = BallSampler(u.grid, center, radius)
    rows = sampler.spatial_values(u.values)
    if rows.shape[1] == 0:
        return 0.0
    return float(np.max(np.sum(func(rows), axis=1)) * sampler.weight)
