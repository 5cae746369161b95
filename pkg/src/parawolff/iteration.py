"""Kilpelainen-Maly level iteration on a discrete solution.

Starting from ``l_0 = R0^2`` the levels ``l_j`` and steps ``delta_j`` are
built on shrinking balls ``B_j = B_{rho_j}(x0)``, ``rho_j = 2^-j R0``.
At each level the step is halved when the level functional stays below
``kappa`` at ``l_j + delta_{j-1}/2``; otherwise the level is lifted to the
point where the functional equals ``kappa`` (bisection). The limit level
bounds ``u(x0, t0)`` from above.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .functionals import g_function, spatial_cutoff, theta_bar
from .measure import ball_mass
from .sampling import BallSampler, interp_time, space_time_integral, sup_in_time_ball_integral
from .wolff import wolff_potential


class RootBracketError(RuntimeError):
    """The level functional exceeds kappa at the right end of the bracket."""


class CapWarning(UserWarning):
    """The iteration hit J_max before the steps became negligible."""


@dataclass(frozen=True)
class IterationParams:
    kappa: float
    B: float
    R0: float
    x0: tuple
    t0: float
    J_max: int = 40
    root_tol: float = 1e-7
    stop_tol: float = 1e-6
    c_R0: float = float("nan")
    max_slots: int = 48

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(c) for c in np.atleast_1d(self.x0)))


def admissible_radius(grid, params, x0, t0):
    """min{1, t0^(1/beta), (T - t0)^(1/beta), dist(x0, boundary)}."""
    beta = params.beta
    return min(1.0, t0 ** (1.0 / beta), (grid.T - t0) ** (1.0 / beta),
               grid.R - float(np.linalg.norm(x0)))


def check_iteration_params(it, grid, params):
    """List of violated admissibility conditions (empty when admissible)."""
    bad = []
    if not 0 < it.kappa < 1:
        bad.append("kappa must lie in (0, 1)")
    if it.B < 1:
        bad.append("B must be >= 1")
    if it.B ** (2 - params.p) * (2 * it.R0) ** params.beta > min(it.t0, grid.T - it.t0) * (1 + 1e-12):
        bad.append("B^(2-p) (2 R0)^beta exceeds min(t0, T - t0)")
    if not it.R0 < admissible_radius(grid, params, it.x0, it.t0):
        bad.append("R0 not below min{1, t0^(1/beta), (T-t0)^(1/beta), dist(x0, boundary)}")
    return bad


def make_iteration_params(u, params, x0, t0, kappa=0.1, R0=None, **kw):
    """Admissible iteration parameters for the point (x0, t0).

    ``B = max(1, 6 c_R0 / kappa)`` with ``c_R0 = sup_t int_{B_R0} |u|``; R0
    is halved until ``B^(2-p) (2 R0)^beta <= min(t0, T - t0)`` also holds.
    """
    grid = u.grid
    bound = admissible_radius(grid, params, x0, t0)
    if bound <= 0:
        raise ValueError("(x0, t0) is not an interior point")
    R0 = 0.5 * bound if R0 is None else min(R0, 0.999 * bound)
    for _ in range(200):
        c = sup_in_time_ball_integral(u, x0, R0)
        B = max(1.0, 6.0 * c / kappa)
        if B ** (2 - params.p) * (2 * R0) ** params.beta <= min(t0, grid.T - t0):
            return IterationParams(kappa=kappa, B=B, R0=R0, x0=x0, t0=t0, c_R0=c, **kw)
        R0 *= 0.5
    raise ValueError("no R0 satisfies B^(2-p) (2 R0)^beta <= min(t0, T - t0)")


def slot_spacing(delta_prev, rho, params):
    """Target slot spacing 3/8 delta_{j-1}^(2-p) rho_j^p (middle of the admissible band)."""
    return 0.375 * delta_prev ** (2 - params.p) * rho ** params.p


@dataclass(frozen=True)
class SlotFamily:
    """Equally spaced slot centres ``start + width (m + 1/2)``, m = 0..count-1.

    Kept implicit because the count grows like rho^(n(p-2)) delta^(p-2) and
    can be astronomically large on deep levels.
    """

    start: float
    width: float
    count: int

    def __len__(self):
        return self.count

    def centers(self, idx=None):
        idx = np.arange(self.count) if idx is None else np.asarray(idx)
        return self.start + self.width * (idx + 0.5)

    def nearest(self, t):
        return int(np.clip(np.floor((t - self.start) / self.width), 0, self.count - 1))


def time_slots(j, delta_prev, it, params):
    """Slot centres splitting I_j = (t0 -+ B^(2-p) rho_j^beta) into equal parts.

    The count is ceil(|I_j| / spacing); centres sit at the midpoints of the
    parts, so a window shorter than one spacing gets a single slot at t0.
    """
    rho = it.R0 * 2.0 ** -j
    half = it.B ** (2 - params.p) * rho ** params.beta
    spacing = slot_spacing(delta_prev, rho, params)
    ratio = 2 * half / spacing
    if ratio > 2.0 ** 62:
        raise OverflowError(f"slot count {ratio:.3g} at level {j}")
    M = max(1, int(np.ceil(ratio - 1e-12)))
    return SlotFamily(it.t0 - half, 2 * half / M, M)


def slot_count_constant(M, j, delta_prev, it, params):
    """gamma in M*(j) <= gamma B^(2-p) rho_j^(n(p-2)) delta_{j-1}^(p-2)."""
    rho = it.R0 * 2.0 ** -j
    return M / (it.B ** (2 - params.p) * rho ** (params.n * (params.p - 2))
                * delta_prev ** (params.p - 2))


def cover_sum(slots, H, t, k, p):
    """sum_m theta_bar((t - tau_m)/H)^k over a ``SlotFamily`` (only nearby slots)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c0, s, M = slots.centers(0), slots.width, slots.count
    lo = np.clip(np.ceil((t - H - c0) / s - 1e-9), 0, M - 1).astype(np.int64)
    hi = np.clip(np.floor((t + H - c0) / s + 1e-9), 0, M - 1).astype(np.int64)
    out = np.zeros(t.shape)
    for i, (a, b) in enumerate(zip(lo, hi)):
        # the plateau sum is over at most 2H/s + 1 slots; cap keeps it finite
        b = min(b, a + 100000)
        out[i] = np.sum(theta_bar((t[i] - slots.centers(np.arange(a, b + 1))) / H, p) ** k)
    return out


class _LevelFunctional:
    """A_j^*(l) = max over slots of the slot functionals at level j."""

    def __init__(self, u, it, params, j, base, delta_prev):
        grid = u.grid
        self.grid, self.params, self.it = grid, params, it
        self.rho = it.R0 * 2.0 ** -j
        self.base = base
        self.sampler = BallSampler(grid, it.x0, self.rho)
        self.xi = spatial_cutoff(self.sampler.dist, self.rho)
        self.rows = self.sampler.spatial_values(u.values)
        self.slots = time_slots(j, delta_prev, it, params)
        self.right = base + it.B * self.rho ** -params.n
        H_max = self.half_height(self.right)
        half = it.B ** (2 - params.p) * self.rho ** params.beta
        lo = max(0, int(np.floor((it.t0 - half - H_max) / grid.dt)))
        hi = min(grid.nt, int(np.ceil((it.t0 + half + H_max) / grid.dt)))
        window = self.rows[lo:hi + 1]
        self.trivial = window.size == 0 or float(np.max(window)) <= base
        self.evaluated = 0

    def half_height(self, l):
        return (l - self.base) ** (2 - self.params.p) * self.rho ** self.params.p

    def slot_values(self, l, idx):
        p, n, k, lam = self.params.p, self.params.n, self.params.k, self.params.lam
        delta = l - self.base
        H = self.half_height(l)
        dt = self.grid.dt
        Ns = int(min(max(16, np.ceil(2 * H / dt)), 4 * self.grid.nt + 16))
        frac = (2 * np.arange(Ns) + 1) / Ns - 1.0
        ws_first = self.xi ** (k - p) * self.sampler.weight
        ws_second = self.xi ** k * self.sampler.weight
        out = np.zeros(len(idx))
        chunk = max(1, int(2e6 // max(1, Ns * self.rows.shape[1])))
        for start in range(0, len(idx), chunk):
            sel = np.asarray(idx[start:start + chunk])
            times = self.slots.centers(sel)[:, None] + H * frac
            wt = np.where((times >= 0) & (times <= self.grid.T), 2 * H / Ns, 0.0)
            vals = interp_time(self.rows, dt, np.clip(times, 0.0, self.grid.T))
            vp = np.maximum((vals - self.base) / delta, 0.0)
            th = theta_bar(frac, p)[None, :]
            first = np.sum(th ** (k - p) * wt * (vp @ ws_first), axis=1)
            second = np.max(th ** k * (wt > 0) * (g_function(vp, lam) @ ws_second), axis=1)
            out[start:start + len(sel)] = (delta ** (p - 2) * self.rho ** (-(n + p)) * first
                                           + self.rho ** (-n) * second)
        self.evaluated += len(idx)
        return out

    def __call__(self, l):
        if self.trivial:
            return 0.0
        M = self.slots.count
        cap = self.it.max_slots
        if M <= cap:
            return float(np.max(self.slot_values(l, np.arange(M))))
        # coarse scan then local refinement around the best slot
        idx = np.unique(np.concatenate([np.rint(np.linspace(0, M - 1, cap)).astype(np.int64),
                                        [self.slots.nearest(self.it.t0)]]))
        vals = self.slot_values(l, idx)
        best_i, best = int(idx[np.argmax(vals)]), float(np.max(vals))
        stride = int(np.ceil((M - 1) / (cap - 1)))
        while stride > 1:
            stride = (stride + 1) // 2
            cand = [i for i in (best_i - stride, best_i + stride) if 0 <= i < M]
            cv = self.slot_values(l, cand)
            if cv.size and float(np.max(cv)) > best:
                best, best_i = float(np.max(cv)), cand[int(np.argmax(cv))]
        return best


@dataclass(frozen=True)
class IterationState:
    """Levels l_j, steps delta_j and per-level diagnostics.

    ``levels[j] = l_j`` (``levels[0] = R0^2``), ``deltas[j] = delta_j`` and
    ``delta_init = delta_{-1} = R0^2``; the per-level lists are indexed by j.
    """

    levels: tuple
    deltas: tuple = ()
    delta_init: float = 0.0
    rhos: tuple = ()
    a_values: tuple = ()
    branches: tuple = ()
    slot_counts: tuple = ()
    slot_constants: tuple = ()
    cover_min: tuple = ()
    right_values: tuple = ()
    monotone_violations: tuple = ()
    gamma_ratios: tuple = ()
    stop_reason: str = ""
    l_limit: float = float("nan")
    tail: float = float("nan")
    summary: dict = field(default_factory=dict)

    @property
    def j(self):
        return len(self.deltas)


def initial_state(it):
    l0 = it.R0 ** 2
    return IterationState(levels=(l0,), delta_init=l0)


def _main_lemma_ratio(delta, delta_prev, rho, m, params, x0):
    mu = ball_mass(m, x0, rho)
    denom = rho ** 2 + (mu / rho ** (params.n - params.p)) ** (1 / (params.p - 1))
    return max(delta - 0.5 * delta_prev, 0.0) / denom


def advance_level(u, state, it, params, m):
    """One step of the level construction; returns the extended state."""
    j = state.j
    base = state.levels[j]
    delta_prev = state.deltas[-1] if state.deltas else state.delta_init
    A = _LevelFunctional(u, it, params, j, base, delta_prev)
    kappa = it.kappa
    cand = base + 0.5 * delta_prev
    violations = 0
    a_right = A(A.right)
    a_cand = A(cand)
    if a_cand <= kappa:
        branch, l_next, delta = "halving", cand, 0.5 * delta_prev
        a_next = a_cand
    else:
        if a_right > kappa:
            raise RootBracketError(
                f"level {j}: A*(l_j + B rho_j^-n) = {a_right:.4g} > kappa = {kappa}")
        # geometric scan in delta to bracket the first crossing
        deltas = np.geomspace(0.5 * delta_prev, A.right - base, 12)
        lo, hi = cand, A.right
        prev_val = None
        for d in deltas[1:]:
            val = A(base + d)
            if prev_val is not None and val > prev_val * (1 + 1e-12):
                violations += 1
            prev_val = val
            if val <= kappa:
                hi = base + d
                break
            lo = base + d
        while hi - lo > it.root_tol * (hi - base):
            mid = 0.5 * (lo + hi)
            if A(mid) > kappa:
                lo = mid
            else:
                hi = mid
        branch, l_next, delta = "root", hi, hi - base
        a_next = A(hi)
    H = A.half_height(l_next)
    half = it.B ** (2 - params.p) * A.rho ** params.beta
    grid = u.grid
    t_check = grid.times[(grid.times > it.t0 - half) & (grid.times < it.t0 + half)]
    t_check = np.concatenate([t_check, np.linspace(it.t0 - half, it.t0 + half, 65)[1:-1]])
    cover = float(np.min(cover_sum(A.slots, H, t_check, params.k, params.p)))
    ratio = _main_lemma_ratio(delta, delta_prev, A.rho, m, params, it.x0)
    return replace(
        state,
        levels=state.levels + (l_next,),
        deltas=state.deltas + (delta,),
        rhos=state.rhos + (A.rho,),
        a_values=state.a_values + (a_next,),
        branches=state.branches + (branch,),
        slot_counts=state.slot_counts + (A.slots.count,),
        slot_constants=state.slot_constants + (slot_count_constant(A.slots.count, j, delta_prev, it, params),),
        cover_min=state.cover_min + (cover,),
        right_values=state.right_values + (a_right,),
        monotone_violations=state.monotone_violations + (violations,),
        gamma_ratios=state.gamma_ratios + (ratio,),
    )


def _geometric_tail(deltas):
    """Bound on sum_{i > J} delta_i from the recent step ratios."""
    d = np.asarray(deltas)
    if d.size < 3 or d[-1] == 0:
        return 0.0 if d.size and d[-1] == 0 else float("inf"), float("nan")
    ratios = d[-3:] / d[-4:-1] if d.size >= 4 else d[-2:] / d[-3:-1]
    r = float(np.max(ratios))
    if r >= 1:
        return float("inf"), r
    return float(d[-1] * r / (1 - r)), r


def window_average_term(u, params, x0, t0, R, B):
    """(R^-(p+n) int_{B_R x (t0 -+ B^(2-p) R^beta)} u_+)^(1/(3-p))."""
    half = B ** (2 - params.p) * R ** params.beta
    integral = space_time_integral(u, x0, R, t0 - half, t0 + half)
    return (integral / R ** (params.p + params.n)) ** (1 / (3 - params.p))


def measure_term(m, params, x0, R):
    """(mu(B_R(x0)) / R^(n-p))^(1/(p-1))."""
    return (ball_mass(m, x0, R) / R ** (params.n - params.p)) ** (1 / (params.p - 1))


def local_oscillation(u, x0, t0):
    """max - min of u over the nodes of the cells touching (x0, t0)."""
    g = u.grid
    idx = g.node_index(x0)
    k = g.time_index(t0)
    sl = (slice(max(k - 1, 0), k + 2),) + tuple(slice(max(i - 1, 0), i + 2) for i in idx)
    block = u.values[sl]
    return float(np.max(block) - np.min(block))


def run_iteration(u, it, params, m, wolff_tol=1e-8):
    """Iterate ``advance_level`` until delta_j < stop_tol * delta_0 or J_max levels."""
    state = initial_state(it)
    reason = "cap_reached"
    for _ in range(it.J_max):
        try:
            state = advance_level(u, state, it, params, m)
        except RootBracketError:
            raise
        if state.j >= 2 and state.deltas[-1] < it.stop_tol * state.deltas[0]:
            reason = "converged"
            break
    if reason == "cap_reached":
        import warnings
        warnings.warn(CapWarning(f"J_max={it.J_max} reached"), stacklevel=2)
    tail, ratio = _geometric_tail(state.deltas)
    l_limit = state.levels[-1] + (tail if np.isfinite(tail) else 0.0)
    R = it.R0
    terms = {
        "R2": R ** 2,
        "avg_window": window_average_term(u, params, it.x0, it.t0, R, it.B),
        "wolff_2R": wolff_potential(m, params, it.x0, 2 * R, wolff_tol).value,
    }
    u0 = u.at(it.x0, it.t0)
    osc = local_oscillation(u, it.x0, it.t0)
    summary = {
        "u0": u0,
        "l_limit": l_limit,
        "tail": tail,
        "tail_ratio": ratio,
        "theorem_terms": terms,
        "gamma_emp": l_limit / sum(terms.values()),
        "max_gamma_ratio": max(state.gamma_ratios, default=0.0),
        "consistency_tol": 3 * osc,
        "consistent": bool(u0 <= l_limit + 3 * osc),
        "delta0_measure_term": measure_term(m, params, it.x0, R),
    }
    return replace(state, stop_reason=reason, l_limit=l_limit, tail=tail, summary=summary)


@dataclass(frozen=True)
class Delta0Report:
    case: str
    delta0: float
    terms: tuple


def delta0_estimate(u, it, params, m):
    """Which case fixed delta_0 and the three terms bounding it."""
    state = advance_level(u, initial_state(it), it, params, m)
    case = "halving" if state.branches[0] == "halving" else "kappa_root"
    R = it.R0
    terms = (window_average_term(u, params, it.x0, it.t0, R, it.B), R ** 2,
             measure_term(m, params, it.x0, R))
    return Delta0Report(case, state.deltas[0], terms)
