"""Level-set functionals on discrete solutions.

Everything here works on nodal values: space integrals are nodal sums
times the cell volume, time integrals are sums over time levels times
``dt``, and esssup in time is a max over time levels.
"""

from dataclasses import dataclass

import numpy as np

from .measure import ball_mass

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_PSI_PANELS = 24


class DomainError(ValueError):
    """A cylinder does not fit inside the field's space-time domain."""


def g_function(v, lam):
    """G(v) = v for v > 1 and v^(2 - 2 lam) on [0, 1]."""
    v = np.asarray(v, dtype=float)
    out = np.where(v > 1.0, v, np.maximum(v, 0.0) ** (2.0 - 2.0 * lam))
    return float(out) if out.ndim == 0 else out


def _psi_unit(a, p, lam):
    """int_0^a (1+z)^(-(1-lam)/p) z^(-2 lam/p) dz for a >= 0 (vectorised)."""
    a = np.asarray(a, dtype=float)
    q = 1.0 - 2.0 * lam / p
    c = (1.0 - lam) / p
    W = np.maximum(a, 0.0) ** q
    # dyadic panels [W 2^-(k+1), W 2^-k] plus [0, W 2^-K]
    edges = 2.0 ** -np.arange(_PSI_PANELS + 1)[::-1]
    edges = np.concatenate([[0.0], edges])
    lo, hi = edges[:-1], edges[1:]
    nodes = (0.5 * (hi - lo)[:, None] * (_GL_X + 1.0) + lo[:, None]).ravel()
    weights = (0.5 * (hi - lo)[:, None] * _GL_W).ravel()
    flat = W.reshape(-1)
    out = np.empty(flat.shape)
    for start in range(0, flat.size, 4096):
        Wc = flat[start:start + 4096, None]
        w = Wc * nodes
        out[start:start + 4096] = np.sum(weights * Wc * (1.0 + w ** (1.0 / q)) ** (-c), axis=1) / q
    return out.reshape(a.shape)


def psi_transform(u_val, l, delta, params):
    """(1/delta) [int_l^u (1 + (s-l)/delta)^(-(1-lam)/p) ((s-l)/delta)^(-2 lam/p) ds]_+.

    The endpoint singularity is removed with ``w = z^(1 - 2 lam/p)``, then a
    16-point Gauss rule runs on dyadic panels. Depends on ``(u - l)/delta`` only.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    a = (np.asarray(u_val, dtype=float) - l) / delta
    out = np.where(a > 0, _psi_unit(np.maximum(a, 0.0), params.p, params.lam), 0.0)
    return float(out) if out.ndim == 0 else out


def psi_exponent(params):
    """rho(lambda) = p / (p - 1 - lambda)."""
    return params.p / (params.p - 1.0 - params.lam)


@dataclass(frozen=True)
class Cylinder:
    """Q_rho^(delta)(y, s) = B_rho(y) x (s - delta^(2-p) rho^p, s + delta^(2-p) rho^p)."""

    center: tuple
    time: float
    rho: float
    delta: float

    def __post_init__(self):
        if not (self.rho > 0 and self.delta > 0):
            raise ValueError("rho and delta must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    def half_height(self, p):
        return self.delta ** (2.0 - p) * self.rho ** p

    def check_inside(self, grid, p):
        y = np.asarray(self.center)
        H = self.half_height(p)
        tol = 1e-12 * max(grid.R, grid.T)
        if np.linalg.norm(y) + self.rho > grid.R + tol:
            raise DomainError(f"ball B_{self.rho:g}({self.center}) leaves B_{grid.R:g}")
        if self.time - H < -tol or self.time + H > grid.T + tol:
            raise DomainError(
                f"time window ({self.time - H:g}, {self.time + H:g}) leaves (0, {grid.T:g})")


def theta_bar(s, p):
    """Temporal bump: 1 on |s| <= 2^(1-p), 0 on |s| >= 1, quintic smoothstep between."""
    a = 2.0 ** (1.0 - p)
    x = np.clip((np.abs(np.asarray(s, dtype=float)) - a) / (1.0 - a), 0.0, 1.0)
    return np.clip(1.0 - x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2), 0.0, 1.0)


def theta_bar_slope_bound(p):
    """sup |theta_bar'|: the quintic smoothstep peaks at 15/8 per unit ramp."""
    return 15.0 / 8.0 / (1.0 - 2.0 ** (1.0 - p))


def spatial_cutoff(dist, rho):
    """Linear radial ramp: 1 on B_{rho/2}, 0 outside B_rho, slope exactly 2/rho."""
    return np.clip(2.0 * (rho - np.asarray(dist, dtype=float)) / rho, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class CutoffPair:
    xi: np.ndarray
    theta: np.ndarray


def make_cutoffs(grid, cyl, params, time_scale_delta=None):
    """Nodal ``xi`` and per-time-level ``theta`` for ``cyl``.

    ``theta`` uses ``theta_bar(delta^(p-2) rho^(-p) (t - s))``; pass
    ``time_scale_delta`` to scale time with a different step than ``cyl.delta``.
    """
    dist = np.linalg.norm(grid.coords - np.asarray(cyl.center), axis=-1)
    d = cyl.delta if time_scale_delta is None else time_scale_delta
    scaled = d ** (params.p - 2.0) * cyl.rho ** (-params.p) * (grid.times - cyl.time)
    return CutoffPair(spatial_cutoff(dist, cyl.rho), theta_bar(scaled, params.p))


@dataclass(frozen=True)
class LevelFunctionalReport:
    first_term: float
    second_term: float
    a_value: float
    cylinder: Cylinder
    level: float
    delta: float


def level_terms(values, xi, theta, w_space, w_time, base, delta, rho, params):
    """Both terms of the level functional on sampled values.

    ``values`` has shape (time samples, space samples); ``xi`` and ``w_space``
    match the space axis, ``theta`` and ``w_time`` the time axis.
    """
    p, n, k = params.p, params.n, params.k
    v = (values - base) / delta
    pos = v > 0
    vp = np.where(pos, v, 0.0)
    xs_first = xi ** (k - p) * w_space
    th_first = theta ** (k - p) * w_time
    first = delta ** (p - 2.0) * rho ** (-(n + p)) * float(th_first @ (vp @ xs_first))
    G = np.where(pos, g_function(vp, params.lam), 0.0)
    per_t = (G @ (xi ** k * w_space)) * theta ** k
    second = rho ** (-n) * float(np.max(per_t)) if per_t.size else 0.0
    return first, second


def a_star(u, cyl, l, delta, cut, params):
    """A*-type functional of ``u`` above the base level ``l`` with step ``delta``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    grid = u.grid
    cyl.check_inside(grid, params.p)
    vals = u.values.reshape(grid.nt + 1, -1)
    first, second = level_terms(vals, cut.xi.ravel(), cut.theta, grid.cell_volume,
                                grid.dt, l, delta, cyl.rho, params)
    return LevelFunctionalReport(first, second, first + second, cyl, l, delta)


def nodal_gradient(u):
    """Central-difference spatial gradient, shape ``(n,) + values.shape``."""
    axes = tuple(range(1, u.values.ndim))
    grads = np.gradient(u.values, u.grid.h, axis=axes)
    return np.stack(grads if isinstance(grads, (list, tuple)) else [grads])


def energy_audit(u, cyl, l, delta, cut, m, params):
    """Left side and the two right-side terms (without constants) of the energy estimate.

    Returns ``(lhs, rhs_interior, rhs_measure)`` where ``lhs`` is the max-in-time
    G-integral plus the weighted gradient integral of ``psi``.
    """
    grid = u.grid
    cyl.check_inside(grid, params.p)
    p, lam, k = params.p, params.lam, params.k
    vol, dt = grid.cell_volume, grid.dt
    v = (u.values - l) / delta
    pos = v > 0
    xi_st = cut.theta.reshape((-1,) + (1,) * grid.n) * cut.xi[None]
    vc = np.maximum(v, 1e-12)
    G = np.where(pos, g_function(np.where(pos, v, 0.0), lam), 0.0)
    axes = tuple(range(1, u.values.ndim))
    sup_term = float(np.max(np.sum(G * xi_st ** k, axis=axes))) * vol
    grad = nodal_gradient(u)
    gnorm = np.sqrt(np.sum(grad ** 2, axis=0))
    factor = (1.0 + vc) ** (-(1.0 - lam) / p) * vc ** (-2.0 * lam / p) / delta
    grad_psi = np.where(pos, factor * gnorm, 0.0)
    grad_term = delta ** (p - 2.0) * float(np.sum(grad_psi ** p * xi_st ** k)) * vol * dt
    weight = (1.0 + vc) ** (1.0 - 2.0 * lam * (p - 1.0)) * vc ** (2.0 * lam * (p - 1.0))
    rhs_interior = (delta ** (p - 2.0) / cyl.rho ** p
                    * float(np.sum(np.where(pos, weight, 0.0) * xi_st ** (k - p))) * vol * dt)
    rhs_measure = cyl.rho ** p / delta ** (p - 1.0) * ball_mass(m, cyl.center, cyl.rho)
    return sup_term + grad_term, rhs_interior, rhs_measure
