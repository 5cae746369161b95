"""Empirical checks of the pointwise and global bounds on solved fields.

Each check returns an ``EstimateReport`` whose ``gamma_emp`` is the ratio
of the left side to the sum of the right-hand terms, the measured stand-in
for the unknown constant. Infinite Wolff terms make a bound trivially true;
they give ``gamma_emp = 0`` and the flag ``"wolff_infinite"``.
"""

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec
from .iteration import admissible_radius
from .measure import RadonMeasure, ball_mass, constant_annulus, unit_ball_volume
from .sampling import space_time_integral, sup_in_time_ball_integral
from .wolff import wolff_potential, wolff_sup_over_ball

STANDARD_P = {1: (1.2, 1.5, 1.8), 2: (1.6, 1.8)}
GRID_LEVELS = {1: ((65, 64), (129, 128), (257, 256)), 2: ((17, 32), (33, 64), (65, 128))}
MEASURE_NAMES = ("dirac", "two_atom", "uniform", "annulus")


@dataclass(frozen=True)
class EstimateReport:
    kind: str
    lhs: float
    rhs_terms: dict
    gamma_emp: float
    meta: dict = field(default_factory=dict)
    flags: tuple = ()


def empirical_gamma(lhs, terms):
    total = float(sum(terms.values()))
    if not np.isfinite(total):
        return 0.0
    if total <= 0:
        return np.inf if lhs > 0 else 0.0
    return float(lhs) / total


def theorem_radius(grid, params, x0, t0):
    """Half the admissible radius min{1, t0^(1/beta), (T-t0)^(1/beta), dist}."""
    return 0.5 * admissible_radius(grid, params, x0, t0)


def dyadic_radii(R0, count=5):
    return [R0 * 2.0 ** -i for i in range(count)]


def _theorem_check(kind, u, m, params, x0t0, R_list, middle, wolff_tol, B):
    x0, t0 = x0t0
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    lhs = u.at(x0, t0)
    rows = []
    for R in R_list:
        w = wolff_potential(m, params, x0, 2 * R, wolff_tol).value
        terms = {"R2": R ** 2, "middle": middle(R), "wolff_2R": w}
        row = {"R": R, "terms": terms, "gamma": empirical_gamma(lhs, terms),
               "gamma_no_R2": empirical_gamma(lhs, {k: v for k, v in terms.items() if k != "R2"})}
        if kind == "thm_i":
            half = B ** (2 - params.p) * R ** params.beta
            win = space_time_integral(u, x0, R, t0 - half, t0 + half)
            wterm = (win / R ** (params.p + params.n)) ** (1 / (3 - params.p))
            row["windowed_middle"] = wterm
            row["gamma_windowed"] = empirical_gamma(lhs, dict(terms, middle=wterm))
        rows.append(row)
    best = max(rows, key=lambda r: r["gamma"])
    flags = ("wolff_infinite",) if any(not np.isfinite(r["terms"]["wolff_2R"]) for r in rows) else ()
    meta = {"x0": tuple(x0), "t0": t0, "per_R": rows, "R": best["R"]}
    return EstimateReport(kind, lhs, best["terms"], best["gamma"], meta, flags)


def check_theorem_i(u, m, params, x0t0, R_list, wolff_tol=1e-8, B=1.0):
    """u(x0,t0) against R^2 + (R^-(p+n) int_{B_R x (0,T)} u_+)^(1/(3-p)) + W(x0, 2R).

    The windowed variant over (t0 -+ B^(2-p) R^beta) is stored per radius.
    """
    T = u.grid.T

    def middle(R):
        integral = space_time_integral(u, x0t0[0], R, 0.0, T)
        return (integral / R ** (params.p + params.n)) ** (1 / (3 - params.p))

    return _theorem_check("thm_i", u, m, params, x0t0, R_list, middle, wolff_tol, B)


def check_theorem_ii(u, m, params, x0t0, R_list, wolff_tol=1e-8):
    """u(x0,t0) against R^2 + R^-n sup_t int_{B_R} u_+ + W(x0, 2R)."""

    def middle(R):
        return sup_in_time_ball_integral(u, x0t0[0], R, lambda v: np.maximum(v, 0.0)) / R ** params.n

    return _theorem_check("thm_ii", u, m, params, x0t0, R_list, middle, wolff_tol, 1.0)


@dataclass(frozen=True)
class CorollaryReport:
    bounded: bool
    sup_wolff: float
    sup_u: float = float("nan")

    def __bool__(self):
        return self.bounded


def check_corollary(m, params, R, sample_grid, u=None, wolff_tol=1e-8):
    """Whether sup_x W(x, R) is finite over the sample nodes and the atom locations."""
    extra = m.atom_locations[m.atom_masses > 0] if len(m.atom_masses) else None
    sup_w = wolff_sup_over_ball(m, params, R, sample_grid, wolff_tol, extra_points=extra)
    bounded = bool(np.isfinite(sup_w))
    sup_u = float(np.max(u.values)) if (u is not None and bounded) else float("nan")
    return CorollaryReport(bounded, sup_w, sup_u)


def proposition_threshold(params, R, mu):
    """4^(1/(p-1)) R^(beta/(p-1)) mu^((2-p)/(p-1))."""
    p = params.p
    return 4.0 ** (1 / (p - 1)) * R ** (params.beta / (p - 1)) * mu ** ((2 - p) / (p - 1))


def proposition_regime(params, R, T, mu):
    """1 when T reaches the threshold, 2 otherwise."""
    return 1 if T >= proposition_threshold(params, R, mu) else 2


def proposition_sigma(params, R, T, mu):
    """min{1, (1/4)^(1/beta) R^-1 T^((p-1)/beta) mu^((p-2)/beta)}; 1 when mu = 0."""
    if mu <= 0:
        return 1.0
    b, p = params.beta, params.p
    return min(1.0, 0.25 ** (1 / b) / R * T ** ((p - 1) / b) * mu ** ((p - 2) / b))


def default_sample_grid(grid, max_nx=33):
    """A nested coarse copy of ``grid`` with at most ``max_nx`` nodes per axis."""
    nx = grid.nx
    while nx > max_nx and (nx - 1) % 2 == 0:
        nx = (nx - 1) // 2 + 1
    return GridSpec(grid.n, nx, 1, grid.R, grid.T)


def check_proposition(u, m, params, sample_grid=None, wolff_tol=1e-8):
    """Regime bound on sup over B_R x (T/4, 3T/4) and the mass inequality.

    Returns ``(regime_report, mass_report)``.
    """
    g = u.grid
    R, T = g.R, g.T
    mu = ball_mass(m, np.zeros(g.n), R)
    regime = proposition_regime(params, R, T, mu)
    sel = (g.times >= T / 4 - 1e-12) & (g.times <= 3 * T / 4 + 1e-12)
    lhs = float(np.max(u.values[sel]))
    sample_grid = default_sample_grid(g) if sample_grid is None else sample_grid
    sup_w = check_corollary(m, params, 2 * R, sample_grid, wolff_tol=wolff_tol).sup_wolff
    n, p, b = params.n, params.p, params.beta
    if regime == 1:
        first = (T / R ** b) ** (1 / (2 - p))
    elif np.isfinite(sup_w):
        first = (R ** p / T) ** ((n - p) / b) * sup_w ** (p * (p - 1) / b)
    else:
        first = np.inf
    terms = {"first": first, "R2": R ** 2, "sup_wolff_2R": sup_w}
    flags = () if np.isfinite(sup_w) else ("wolff_infinite",)
    meta = {"threshold": proposition_threshold(params, R, mu), "sigma": proposition_sigma(params, R, T, mu),
            "mu_BR": mu, "regime": regime}
    report = EstimateReport(f"prop_case_{'i' * regime}", lhs, terms, empirical_gamma(lhs, terms), meta, flags)
    l1 = float(np.max(np.sum(np.abs(u.values), axis=tuple(range(1, u.values.ndim))))) * g.cell_volume
    mass = EstimateReport("mass_bound", l1, {"T_mu": T * mu}, empirical_gamma(l1, {"T_mu": T * mu}),
                          {"ok": bool(l1 <= 1.05 * T * mu), "slack": 1.05})
    return report, mass


def standard_measure(name, n, mass=1.0, R=1.0):
    """The suite measures; all carry total mass ``mass`` on B_R."""
    if name == "dirac":
        return RadonMeasure(n, R, [np.zeros(n)], [mass])
    if name == "two_atom":
        locs = [[-0.375, 0.0], [0.25, 0.25]] if n == 2 else [[-0.375], [0.25]]
        return RadonMeasure(n, R, [np.asarray(l[:n]) * R for l in locs], [0.6 * mass, 0.4 * mass])
    if name == "uniform":
        return RadonMeasure(n, R, uniform_density=mass / (unit_ball_volume(n) * R ** n))
    if name == "annulus":
        inner, outer = 0.3 * R, 0.6 * R
        vol = unit_ball_volume(n) * (outer ** n - inner ** n)
        return RadonMeasure(n, R, radial_components=[constant_annulus(np.zeros(n), inner, outer, mass / vol)])
    raise KeyError(f"unknown suite measure {name!r}")


def standard_grid(n, level, R=1.0, T=1.0):
    nx, nt = GRID_LEVELS[n][level]
    return GridSpec(n, nx, nt, R, T)


def standard_cases(dims=(1, 2)):
    return [(n, p, name) for n in dims for p in STANDARD_P[n] for name in MEASURE_NAMES]


def sample_points(grid, count, seed, margin_cells=4):
    """``count`` distinct (node, time level) pairs of ``grid``, seeded.

    Nodes lie at least ``margin_cells`` cells inside B_R and times in
    [T/4, 3T/4]. Taking them from the coarsest grid keeps them nodes of
    every nested refinement.
    """
    rng = np.random.default_rng(seed)
    nodes = grid.coords[grid.radius <= grid.R - margin_cells * grid.h + 1e-12]
    times = grid.times[(grid.times >= grid.T / 4 - 1e-12) & (grid.times <= 3 * grid.T / 4 + 1e-12)]
    pairs = [(i, k) for i in range(len(nodes)) for k in range(len(times))]
    pick = rng.choice(len(pairs), size=min(count, len(pairs)), replace=False)
    return [(tuple(float(c) for c in nodes[pairs[j][0]]), float(times[pairs[j][1]])) for j in sorted(pick)]


def random_cylinders(u, params, count, seed, rho_range=(0.25, 0.5), margin_cells=2):
    """Seeded admissible cylinders with levels ``(cylinder, l)`` built from ``u``.

    Centres are nodes of ``u.grid`` (so of every refinement), ``l`` is a
    quarter of the nodal value at the centre and ``delta`` half of it; the
    radius is drawn in ``rho_range`` (fractions of R) and then capped so
    the cylinder fits in B_R x (0, T).
    """
    from .functionals import Cylinder

    g = u.grid
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(100 * count):
        if len(out) == count:
            break
        rho = g.R * rng.uniform(*rho_range)
        nodes = g.coords[(g.radius <= g.R - rho - margin_cells * g.h) & (g.radius > 0)]
        times = g.times[(g.times >= g.T / 4) & (g.times <= 3 * g.T / 4)]
        if not len(nodes):
            continue
        y = nodes[rng.integers(len(nodes))]
        s = float(times[rng.integers(len(times))])
        val = u.at(y, s)
        if val <= 0:
            continue
        delta = 0.5 * val
        rho = min(rho, (min(s, g.T - s) / delta ** (2 - params.p)) ** (1 / params.p))
        out.append((Cylinder(tuple(y), s, rho, delta), 0.25 * val))
    return out
