"""Finite positive Radon measures on a ball with exact ball-mass queries.

A measure is a sum of Dirac atoms, radially symmetric densities with a
piecewise-polynomial profile, and a uniform density on the domain ball.
Ball masses use the open-ball convention, so ``r -> mu(B_r(x))`` is
left-continuous.
"""

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np

from .grid import GridError

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(24)
# smoothstep substitution s = a + (b - a)(3u^2 - 2u^3) on [0, 1]
_U = 0.5 * (_GAUSS_NODES + 1.0)
_SUB_S = 3.0 * _U ** 2 - 2.0 * _U ** 3
_SUB_W = 0.5 * _GAUSS_WEIGHTS * 6.0 * _U * (1.0 - _U)


def unit_ball_volume(n):
    return pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)


def sphere_area(n):
    """Surface measure of the unit sphere in R^n (2 points when n = 1)."""
    return n * unit_ball_volume(n)


def ball_volume(n, r):
    return unit_ball_volume(n) * np.asarray(r, dtype=float) ** n


def _x_minus_sin(x):
    """x - sin(x) without cancellation for small x."""
    x = np.asarray(x, float)
    x2 = x * x
    series = x * x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42 * (1 - x2 / 72 * (1 - x2 / 110))))
    return np.where(x < 0.1, series, x - np.sin(x))


def lens_volume(n, r1, r2, d):
    """Volume of B_{r1}(0) intersected with B_{r2}(z), |z| = d.

    Vectorised over ``r2`` (and broadcastable arguments); closed form for
    n = 1, 2, 3.
    """
    r1, r2, d = np.broadcast_arrays(np.asarray(r1, float), np.asarray(r2, float),
                                    np.asarray(d, float))
    out = np.zeros(r1.shape)
    small = np.minimum(r1, r2)
    inside = d <= np.abs(r1 - r2)
    out[inside] = ball_volume(n, small[inside])
    part = ~inside & (d < r1 + r2)
    if not np.any(part):
        return out
    a, b, dd = r1[part], r2[part], d[part]
    if n == 1:
        out[part] = np.minimum(a, dd + b) - np.maximum(-a, dd - b)
    elif n == 2:
        # sum of two circular segments; 1 - cos of each half-angle is kept in
        # factored form so that near-tangent lenses do not cancel
        gap = a + b - dd
        h1 = np.clip(gap * (b + dd - a) / (4 * dd * a), 0.0, 1.0)
        h2 = np.clip(gap * (a + dd - b) / (4 * dd * b), 0.0, 1.0)
        t1 = 2 * np.arcsin(np.sqrt(h1))
        t2 = 2 * np.arcsin(np.sqrt(h2))
        out[part] = 0.5 * (a ** 2 * _x_minus_sin(2 * t1) + b ** 2 * _x_minus_sin(2 * t2))
    elif n == 3:
        out[part] = (pi * (a + b - dd) ** 2
                     * (dd ** 2 + 2 * dd * b - 3 * b ** 2 + 2 * dd * a + 6 * a * b - 3 * a ** 2)
                     / (12 * dd))
    else:
        raise ValueError(f"lens volume not implemented for n={n}")
    return out


def _shell_fraction(n, s, d, r):
    """Fraction of the sphere |z - c| = s lying in the open ball B_r(x), |x - c| = d."""
    if n == 1:
        return 0.5 * ((np.abs(s - d) < r).astype(float) + (s + d < r).astype(float))
    with np.errstate(divide="ignore", invalid="ignore"):
        if n == 2:
            c = (s ** 2 + d ** 2 - r ** 2) / (2 * s * d)
            frac = np.arccos(np.clip(c, -1.0, 1.0)) / pi
        elif n == 3:
            frac = np.clip((r ** 2 - (s - d) ** 2) / (4 * s * d), 0.0, 1.0)
        else:
            raise ValueError(f"shell fraction not implemented for n={n}")
    return np.where(np.isfinite(frac), frac, (s < r).astype(float))


@dataclass(frozen=True)
class RadialComponent:
    """Radial density ``rho(|z - center|)`` with a piecewise-polynomial profile.

    ``edges`` is increasing from 0 to the support radius; ``coeffs[i]`` holds
    ascending polynomial coefficients in the radius on ``[edges[i], edges[i+1])``.
    """

    center: tuple
    edges: tuple
    coeffs: tuple

    def __post_init__(self):
        edges = np.asarray(self.edges, float)
        if edges[0] != 0.0 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must start at 0 and increase")
        if len(self.coeffs) != len(edges) - 1:
            raise ValueError("need one coefficient list per piece")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "edges", tuple(float(e) for e in edges))
        object.__setattr__(self, "coeffs", tuple(tuple(float(c) for c in cs) for cs in self.coeffs))
        probe = np.linspace(0.0, edges[-1], 257)
        if np.any(self.profile(probe) < -1e-14):
            raise ValueError("radial profile must be nonnegative")

    @property
    def support(self):
        return self.edges[-1]

    @property
    def piecewise_constant(self):
        return all(len(np.trim_zeros(np.asarray(c), "b")) <= 1 for c in self.coeffs)

    def _table(self):
        deg = max(len(c) for c in self.coeffs)
        tab = np.zeros((len(self.coeffs), deg))
        for i, c in enumerate(self.coeffs):
            tab[i, :len(c)] = c
        return tab

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        edges = np.asarray(self.edges)
        tab = self._table()
        piece = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(self.coeffs) - 1)
        val = np.zeros(s.shape)
        for j in range(tab.shape[1] - 1, -1, -1):
            val = val * s + tab[piece, j]
        return np.where((s >= 0) & (s < edges[-1]), val, 0.0)

    def mass(self, n):
        total = 0.0
        for (a, b), cs in zip(zip(self.edges[:-1], self.edges[1:]), self.coeffs):
            # integral of s^(n-1) * sum c_j s^j over [a, b]
            for j, c in enumerate(cs):
                e = j + n
                total += c * (b ** e - a ** e) / e
        return sphere_area(n) * total

    def ball_mass(self, n, x, r):
        """Mass of this component in B_r(x), vectorised over ``r``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        d = float(np.linalg.norm(np.asarray(x, float) - np.asarray(self.center)))
        if self.piecewise_constant:
            out = np.zeros(r.shape)
            for (a, b), cs in zip(zip(self.edges[:-1], self.edges[1:]), self.coeffs):
                if cs and cs[0] != 0.0:
                    outer = lens_volume(n, b, r, d)
                    inner = lens_volume(n, a, r, d) if a > 0 else 0.0
                    out += cs[0] * (outer - inner)
            return out
        return self._ball_mass_quadrature(n, d, r)

    def _ball_mass_quadrature(self, n, d, r):
        S = self.support
        fixed = np.asarray(self.edges)
        lens = np.stack([np.abs(d - r), d + r], axis=1)
        bp = np.concatenate([np.broadcast_to(fixed, (r.size, fixed.size)), lens], axis=1)
        bp = np.sort(np.clip(bp, 0.0, S), axis=1)
        a, b = bp[:, :-1], bp[:, 1:]
        s = a[..., None] + (b - a)[..., None] * _SUB_S
        w = (b - a)[..., None] * _SUB_W
        integrand = (self.profile(s) * sphere_area(n) * s ** (n - 1)
                     * _shell_fraction(n, s, d, r[:, None, None]))
        return np.sum(integrand * w, axis=(1, 2))


def constant_annulus(center, inner, outer, density):
    """Constant density on the annulus ``inner <= |z - center| < outer``."""
    if inner <= 0:
        return RadialComponent(center, (0.0, outer), ((density,),))
    return RadialComponent(center, (0.0, inner, outer), ((0.0,), (density,)))


@dataclass(frozen=True)
class RadonMeasure:
    """Atoms + radial components + uniform density on B_{domain_radius}(0)."""

    n: int
    domain_radius: float
    atom_locations: np.ndarray = None
    atom_masses: np.ndarray = None
    radial_components: tuple = field(default=())
    uniform_density: float = 0.0

    def __post_init__(self):
        locs = np.zeros((0, self.n)) if self.atom_locations is None \
            else np.asarray(self.atom_locations, dtype=float).reshape(-1, self.n)
        masses = np.zeros(0) if self.atom_masses is None \
            else np.asarray(self.atom_masses, dtype=float).reshape(-1)
        if locs.shape[0] != masses.shape[0]:
            raise ValueError("atom locations and masses differ in length")
        if np.any(masses < 0) or self.uniform_density < 0:
            raise ValueError("masses and densities must be nonnegative")
        if locs.size and np.any(np.linalg.norm(locs, axis=1) >= self.domain_radius):
            raise ValueError("atoms must lie strictly inside the domain ball")
        for comp in self.radial_components:
            if len(comp.center) != self.n:
                raise ValueError("radial component centre has wrong dimension")
            if np.linalg.norm(comp.center) + comp.support > self.domain_radius * (1 + 1e-12):
                raise ValueError("radial component support leaves the domain ball")
        locs.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "atom_locations", locs)
        object.__setattr__(self, "atom_masses", masses)
        object.__setattr__(self, "radial_components", tuple(self.radial_components))

    @property
    def components(self):
        """Radial components including the uniform density."""
        comps = list(self.radial_components)
        if self.uniform_density > 0:
            comps.append(RadialComponent((0.0,) * self.n, (0.0, self.domain_radius),
                                         ((self.uniform_density,),)))
        return comps

    def scaled(self, s):
        return RadonMeasure(
            self.n, self.domain_radius, self.atom_locations, s * self.atom_masses,
            tuple(RadialComponent(c.center, c.edges, tuple(tuple(s * v for v in cs) for cs in c.coeffs))
                  for c in self.radial_components),
            s * self.uniform_density)

    def split(self):
        """One single-component measure per atom/component (for additivity checks)."""
        parts = []
        for loc, m in zip(self.atom_locations, self.atom_masses):
            parts.append(RadonMeasure(self.n, self.domain_radius, loc[None, :], [m]))
        for comp in self.radial_components:
            parts.append(RadonMeasure(self.n, self.domain_radius, radial_components=(comp,)))
        if self.uniform_density > 0:
            parts.append(RadonMeasure(self.n, self.domain_radius,
                                      uniform_density=self.uniform_density))
        return parts

    def breakpoints(self, x):
        """Radii where ``r -> mu(B_r(x))`` may fail to be smooth."""
        x = np.asarray(x, float)
        pts = list(np.linalg.norm(self.atom_locations - x, axis=1))
        for comp in self.components:
            d = float(np.linalg.norm(x - np.asarray(comp.center)))
            for e in comp.edges[1:]:
                pts.extend([abs(d - e), d + e])
        return np.unique(np.asarray([q for q in pts if q > 0], dtype=float))

    def to_dict(self):
        return {
            "n": self.n,
            "domain_radius": self.domain_radius,
            "atoms": [{"location": list(map(float, loc)), "mass": float(m)}
                      for loc, m in zip(self.atom_locations, self.atom_masses)],
            "radial_components": [{"center": list(c.center), "edges": list(c.edges),
                                   "coeffs": [list(cs) for cs in c.coeffs]}
                                  for c in self.radial_components],
            "uniform_density": self.uniform_density,
        }

    @classmethod
    def from_dict(cls, data):
        n = int(data["n"])
        atoms = data.get("atoms") or []
        comps = tuple(RadialComponent(c["center"], c["edges"], c["coeffs"])
                      for c in data.get("radial_components") or [])
        return cls(n, float(data["domain_radius"]),
                   np.asarray([a["location"] for a in atoms], float).reshape(-1, n),
                   np.asarray([a["mass"] for a in atoms], float),
                   comps, float(data.get("uniform_density", 0.0)))


def ball_mass(m, x, r):
    """mu(B_r(x)) for the open ball; ``r`` may be a scalar or an array."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros(r.shape)
    if m.atom_masses.size:
        dist = np.linalg.norm(m.atom_locations - x, axis=1)
        out += np.sum(m.atom_masses[None, :] * (dist[None, :] < r[:, None]), axis=1)
    for comp in m.components:
        out += comp.ball_mass(m.n, x, r)
    out = np.where(r > 0, np.maximum(out, 0.0), 0.0)
    return float(out[0]) if scalar else out


def total_mass(m):
    return float(np.sum(m.atom_masses) + sum(c.mass(m.n) for c in m.components))


def _bump(z):
    return np.where(z < 1.0, (1.0 - np.minimum(z, 1.0) ** 2) ** 3, 0.0)


def mollify_to_grid(m, grid, width=None):
    """Nodal source density on ``grid`` carrying the total mass of ``m``.

    Atoms are spread with a compactly supported polynomial bump of radius
    ``width`` (default ``2h``). Densities are sampled at nodes and the nodes
    straddling a jump of the profile absorb the quadrature defect, so the
    density equals its exact value away from those layers. Mass is only put
    on free nodes.
    """
    if m.n != grid.n:
        raise GridError("measure and grid dimensions differ")
    h, vol = grid.h, grid.cell_volume
    width = 2.0 * h if width is None else float(width)
    if width < h * (1 - 1e-12):
        raise GridError(f"mollification width {width} below grid spacing {h}")
    free = grid.interior
    coords = grid.coords
    f = np.zeros(grid.shape)
    for loc, mass in zip(m.atom_locations, m.atom_masses):
        if np.linalg.norm(loc) + width >= grid.R:
            raise GridError(f"atom at {loc} with bump width {width} leaves the grid")
        w = _bump(np.linalg.norm(coords - loc, axis=-1) / width) * free
        f += mass * w / (np.sum(w) * vol)
    for comp in m.components:
        c = np.asarray(comp.center)
        if np.linalg.norm(c) + comp.support > grid.R * (1 + 1e-12):
            raise GridError("density support exceeds the grid")
        dist = np.linalg.norm(coords - c, axis=-1)
        dens = comp.profile(dist) * free
        exact = comp.mass(grid.n)
        if exact == 0.0:
            continue
        layer = np.zeros(grid.shape, dtype=bool)
        for e in comp.edges[1:]:
            layer |= np.abs(dist - e) < h * np.sqrt(grid.n)
        layer &= free & (dens > 0)
        core = np.sum(dens[~layer]) * vol
        rim = np.sum(dens[layer]) * vol
        if rim > 0 and exact - core >= 0:
            dens = np.where(layer, dens * (exact - core) / rim, dens)
        else:
            dens = dens * exact / (np.sum(dens) * vol)
        f += dens
    return f
