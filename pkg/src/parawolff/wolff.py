"""Truncated Wolff potential of a Radon measure.

    W(x, R) = int_0^R (mu(B_r(x)) / r^(n-p))^(1/(p-1)) dr / r

The integral is taken in ``t = log r`` (so ``dr/r = dt``) with a
breadth-first adaptive Simpson rule. Radii at which ``r -> mu(B_r(x))``
jumps or kinks are forced subdivision nodes. Near ``r = 0`` the integrand
is followed octave by octave: a tail that keeps a log-log slope below -1
(an atom sitting at ``x`` when ``n > p``) is reported as divergent, any
other tail is closed off with a power-law extrapolation.
"""

from dataclasses import dataclass, field

import numpy as np

from .measure import ball_mass

LN2 = np.log(2.0)


class QuadratureError(RuntimeError):
    """The quadrature could not reach its tolerance within budget."""


@dataclass(frozen=True)
class WolffProfile:
    x: tuple
    R: float
    value: float
    diverged: bool
    inner_cutoff: float
    error_estimate: float
    slope: float
    diagnostics: dict = field(default_factory=dict)


def _log_integrand_t(m, params, x, t):
    """log of (mu(B_r) r^(p-n))^(1/(p-1)) at r = e^t; -inf where the mass is 0."""
    mass = ball_mass(m, x, np.exp(t))
    with np.errstate(divide="ignore"):
        return (np.log(mass) + (params.p - params.n) * t) / (params.p - 1.0)


def _integrand_t(m, params, x, t):
    return np.exp(_log_integrand_t(m, params, x, t))


def _inner_walk(m, params, x, R, tol, max_octaves, margin):
    """Walk r_k = R 2^-k inward; returns (t_in, tail, slope, diverged)."""
    p, n = params.p, params.n
    positive_bp = m.breakpoints(x)
    smallest_bp = positive_bp[0] if positive_bp.size else np.inf
    t_R = np.log(R)
    ks = np.arange(max_octaves + 1)
    ts = t_R - ks * LN2
    logg = _log_integrand_t(m, params, x, ts)
    # log-log slope of the r-integrand g/r across each octave
    with np.errstate(invalid="ignore"):
        slopes = (logg[:-1] - logg[1:]) / LN2 - 1.0
    g = np.exp(logg)
    partial = np.cumsum(0.5 * (g[:-1] + g[1:]) * LN2)
    for k in range(1, max_octaves + 1):
        if not np.isfinite(logg[k]):
            return ts[k], 0.0, -np.inf, False
        s = slopes[k - 1]
        if s > -1.0:
            tail = g[k] / (s + 1.0)
            if k >= 2 and tail <= 1e-3 * tol * max(partial[k - 1], 1e-300) \
                    and np.exp(ts[k]) < smallest_bp:
                return ts[k], tail, s, False
        if k >= 8 and np.exp(ts[k - 8]) < smallest_bp:
            window = slopes[k - 8:k]
            if np.all(window <= -1.0 - margin) and \
                    np.ptp(window) <= 0.01 * abs(np.mean(window)):
                return ts[k], np.inf, float(window[-1]), True
    s = slopes[-1]
    if s <= -1.0 - margin:
        return ts[-1], np.inf, float(s), True
    raise QuadratureError(
        f"inner tail at x={x} neither converged nor diverged after {max_octaves} octaves"
        f" (slope {s:.4g}, n={n}, p={p})")


def _adaptive_simpson(func, knots, tol, max_intervals, edge_shift=1e-11):
    """Breadth-first adaptive Simpson on [knots[0], knots[-1]] with forced knots.

    ``func`` is vectorised. Knot values are taken as one-sided limits from
    inside each interval so jumps at knots do not pollute the rule.
    Returns (value, error_estimate, n_intervals).
    """
    a, b = knots[:-1], knots[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    if a.size == 0:
        return 0.0, 0.0, 0
    shift = edge_shift * np.maximum(1.0, np.abs(np.concatenate([a, b])))
    fa = func(a + shift[:a.size])
    fb = func(b - shift[a.size:])
    mid = 0.5 * (a + b)
    fm = func(mid)
    S = (b - a) / 6.0 * (fa + 4 * fm + fb)
    total_len = float(np.sum(b - a))
    done_val, done_err = 0.0, 0.0
    used = a.size
    while a.size:
        lm, rm = 0.5 * (a + mid), 0.5 * (mid + b)
        vals = func(np.concatenate([lm, rm]))
        flm, frm = vals[:a.size], vals[a.size:]
        SL = (mid - a) / 6.0 * (fa + 4 * flm + fm)
        SR = (b - mid) / 6.0 * (fm + 4 * frm + fb)
        S2 = SL + SR
        err = (S2 - S) / 15.0
        estimate = done_val + float(np.sum(S2 + err))
        local_tol = tol * max(abs(estimate), 1e-300) * (b - a) / total_len
        ok = (np.abs(err) <= local_tol) | ((b - a) < 1e-13 * np.maximum(1.0, np.abs(a)))
        done_val += float(np.sum((S2 + err)[ok]))
        done_err += float(np.sum(np.abs(err[ok])))
        nk = ~ok
        if not np.any(nk):
            break
        used += 2 * int(np.sum(nk))
        if used > max_intervals:
            raise QuadratureError(f"subdivision budget {max_intervals} exhausted")
        a, mid, b = a[nk], mid[nk], b[nk]
        fa, fm, fb = fa[nk], fm[nk], fb[nk]
        flm, frm, SL, SR = flm[nk], frm[nk], SL[nk], SR[nk]
        a, b, fa, fb, fm, S, mid = (np.concatenate([a, mid]), np.concatenate([mid, b]),
                                    np.concatenate([fa, fm]), np.concatenate([fm, fb]),
                                    np.concatenate([flm, frm]), np.concatenate([SL, SR]),
                                    np.concatenate([0.5 * (a + mid), 0.5 * (mid + b)]))
    return done_val, done_err, used


def wolff_potential(m, params, x, R, tol=1e-8, max_intervals=10 ** 6, max_octaves=200,
                    slope_margin=1e-3):
    """Truncated Wolff potential W^mu_p(x, R) as a ``WolffProfile``.

    ``value`` is ``inf`` (and ``diverged`` set) when the integrand keeps a
    log-log slope at or below ``-1 - slope_margin`` at the origin.
    """
    if not R > 0 or not tol > 0:
        raise ValueError("need R > 0 and tol > 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t_in, tail, slope, diverged = _inner_walk(m, params, x, R, tol, max_octaves, slope_margin)
    r_in = float(np.exp(t_in))
    if diverged:
        return WolffProfile(tuple(x), R, np.inf, True, r_in, 0.0, slope)
    t_R = np.log(R)
    bp = m.breakpoints(x)
    bp = bp[(bp > r_in) & (bp < R)]
    knots = np.unique(np.concatenate([[t_in, t_R], np.log(bp)]))
    # no initial interval wider than half an octave
    fine = [knots[0]]
    for lo, hi in zip(knots[:-1], knots[1:]):
        pieces = max(1, int(np.ceil((hi - lo) / (0.5 * LN2))))
        fine.extend(np.linspace(lo, hi, pieces + 1)[1:])
    value, err, used = _adaptive_simpson(
        lambda t: _integrand_t(m, params, x, t), np.asarray(fine), tol, max_intervals)
    value += tail
    return WolffProfile(tuple(x), R, float(value), False, r_in, float(err + 1e-3 * tol * value),
                        float(slope), {"intervals": used, "tail": float(tail)})


def wolff_value(m, params, x, R, tol=1e-8):
    return wolff_potential(m, params, x, R, tol).value


def sample_points(grid, radius=None, extra=None):
    """Grid nodes inside the closed ball of ``radius`` (default the grid radius)."""
    radius = grid.R if radius is None else radius
    pts = grid.coords[grid.radius <= radius * (1 + 1e-12)]
    if extra is not None and len(extra):
        pts = np.concatenate([pts, np.asarray(extra, float).reshape(-1, grid.n)])
    return pts


def wolff_sup_over_ball(m, params, R, sample_grid, tol=1e-8, radius=None, extra_points=None):
    """Max of W^mu_p(., R) over sample nodes; ``inf`` as soon as one diverges."""
    best = 0.0
    for x in sample_points(sample_grid, radius, extra_points):
        w = wolff_potential(m, params, x, R, tol).value
        if not np.isfinite(w):
            return np.inf
        best = max(best, w)
    return best
