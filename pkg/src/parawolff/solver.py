"""Implicit solver for u_t - div((|grad u|^2 + eps^2)^((p-2)/2) grad u) = mu.

Space is discretised with P1 elements on the Freudenthal (Kuhn)
triangulation of the node grid and a lumped mass matrix, which for p = 2
reproduces the standard (2n+1)-point Laplacian. Each backward-Euler step
minimises a strictly convex energy with a damped Newton method, so the
discrete flux stays monotone and the comparison principle holds.
"""

from itertools import permutations
from math import factorial

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .grid import GridField, GridError
from .measure import mollify_to_grid


class ConvergenceError(RuntimeError):
    """An inner Newton solve failed to reach its residual tolerance."""


class CFLWarning(UserWarning):
    """Time step large relative to the diffusion time scale of the inner solve."""


class _Operator:
    """Simplex gradients restricted to the free nodes of a grid."""

    def __init__(self, grid):
        n, nx = grid.n, grid.nx
        self.grid = grid
        self.free = grid.interior.ravel()
        self.free_idx = np.flatnonzero(self.free)
        nodes = np.arange(nx ** n).reshape((nx,) * n)
        corner = nodes[(slice(0, nx - 1),) * n].ravel()
        strides = [nx ** (n - 1 - i) for i in range(n)]
        rows, cols, vals = [[] for _ in range(n)], [[] for _ in range(n)], [[] for _ in range(n)]
        n_simp = 0
        for perm in permutations(range(n)):
            prev = corner
            ids = np.arange(corner.size) + n_simp
            for axis in perm:
                nxt = prev + strides[axis]
                rows[axis] += [ids, ids]
                cols[axis] += [nxt, prev]
                vals[axis] += [np.full(ids.size, 1.0 / grid.h), np.full(ids.size, -1.0 / grid.h)]
                prev = nxt
            n_simp += corner.size
        self.n_simp = n_simp
        self.vol = grid.h ** n / factorial(n)
        shape = (n_simp, nx ** n)
        self.D = [sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                                shape=shape)[:, self.free_idx].tocsr()
                  for r, c, v in zip(rows, cols, vals)]
        self.DT = [d.T.tocsr() for d in self.D]
        self.mass = grid.h ** n

    def gradients(self, u_free):
        return np.stack([d @ u_free for d in self.D])

    def coefficient(self, g, p, eps):
        q = np.sum(g ** 2, axis=0) + eps ** 2
        return q, q ** ((p - 2.0) / 2.0)

    def flux_divergence(self, u_free, p, eps):
        """K(u) u: the discrete -div of the regularised flux, per free node."""
        g = self.gradients(u_free)
        _, a = self.coefficient(g, p, eps)
        return sum(dt @ (self.vol * a * gc) for dt, gc in zip(self.DT, g))

    def energy(self, u_free, p, eps):
        g = self.gradients(u_free)
        q, _ = self.coefficient(g, p, eps)
        return self.vol * np.sum(q ** (p / 2.0)) / p

    def hessian(self, u_free, p, eps):
        g = self.gradients(u_free)
        q, a = self.coefficient(g, p, eps)
        da = (p - 2.0) * q ** ((p - 4.0) / 2.0)
        H = None
        for i in range(len(g)):
            for j in range(len(g)):
                w = self.vol * (da * g[i] * g[j] + (a if i == j else 0.0))
                term = self.DT[i] @ sp.diags(w) @ self.D[j]
                H = term if H is None else H + term
        return H.tocsc()


def _newton_step(op, u_old, f, dt, p, eps, tol, max_iter, line_search=30, u_start=None):
    M = op.mass

    def residual(u):
        return (u - u_old) - dt * f + dt / M * op.flux_divergence(u, p, eps)

    def energy(u):
        return M * (0.5 / dt * np.sum((u - u_old) ** 2) - np.sum(f * u)) + op.energy(u, p, eps)

    u = (u_old if u_start is None else u_start).copy()
    r = residual(u)
    scale = max(1.0, np.max(np.abs(u_old)))
    for it in range(max_iter):
        rn = np.max(np.abs(r))
        if rn <= tol * scale:
            return u, it, rn
        H = op.hessian(u, p, eps) + sp.identity(u.size, format="csc") * (M / dt)
        grad = r * (M / dt)
        d = spsolve(H, -grad)
        slope = float(grad @ d)
        e0 = energy(u)
        alpha = 1.0
        for _ in range(line_search):
            cand = u + alpha * d
            rc = residual(cand)
            if energy(cand) <= e0 + 1e-4 * alpha * slope or np.max(np.abs(rc)) < rn:
                break
            alpha *= 0.5
        else:
            raise ConvergenceError(f"line search failed (residual {rn:.3e})")
        u, r = cand, rc
        scale = max(1.0, np.max(np.abs(u)))
    rn = np.max(np.abs(r))
    if rn <= tol * scale:
        return u, max_iter, rn
    raise ConvergenceError(f"Newton did not converge: residual {rn:.3e} after {max_iter} iterations")


def _continuation_step(op, u_old, f, dt, p, eps, tol, max_iter):
    """Newton step with the regularisation lowered gradually from a coarse value.

    Near critical points of u the regularised flux changes over a width
    ``eps`` and plain Newton crawls; each stage warm-starts the next.
    """
    ladder = [e for e in 10.0 ** -np.arange(1, 16) if e > eps] + [eps]
    u, total = u_old, 0
    for e in ladder[:-1]:
        u, it, _ = _newton_step(op, u_old, f, dt, p, e, max(tol, 1e-8), max_iter, u_start=u)
        total += it
    u, it, rn = _newton_step(op, u_old, f, dt, p, eps, tol, max_iter, u_start=u)
    return u, total + it, rn


def solve_ibvp(m, params, grid, width=None, inner_tol=1e-10, max_newton=200, eps_reg=None):
    """Solve the zero initial/boundary value problem on B_R x (0, T).

    Returns a ``GridField`` with ``nt + 1`` time levels; ``diagnostics``
    records Newton iteration counts, final residuals, the largest
    ``dt * a_max / h^2`` ratio and any CFL warnings.
    """
    if params.n != grid.n:
        raise GridError("parameter and grid dimensions differ")
    eps = params.eps_reg if eps_reg is None else eps_reg
    p = params.p
    op = _Operator(grid)
    f = mollify_to_grid(m, grid, width).ravel()[op.free_idx]
    dt = grid.dt
    values = np.zeros((grid.nt + 1, grid.nx ** grid.n))
    u = np.zeros(op.free_idx.size)
    iters, residuals = [], []
    fallbacks = 0
    a_max = eps ** (p - 2.0)
    for k in range(1, grid.nt + 1):
        try:
            u_new, it, rn = _newton_step(op, u, f, dt, p, eps, inner_tol, max_newton)
        except ConvergenceError:
            u_new, it, rn = _continuation_step(op, u, f, dt, p, eps, inner_tol, max_newton)
            fallbacks += 1
        u = u_new
        lowest = float(np.min(u)) if u.size else 0.0
        if lowest < -1e-12 * max(1.0, float(np.max(np.abs(u)))):
            raise ConvergenceError(f"comparison principle violated at step {k}: min u = {lowest:.3e}")
        values[k, op.free_idx] = u
        iters.append(it)
        residuals.append(rn)
    ratio = dt * a_max / grid.h ** 2
    warnings_ = []
    if ratio > 1e8:
        warnings_.append(CFLWarning(
            f"dt*a_max/h^2 = {ratio:.3g}: Newton may need many damped steps near flat regions"))
    diag = {"newton_iterations": iters, "residuals": residuals, "cfl_ratio": ratio,
            "cfl_warnings": warnings_,
            "continuation_steps": fallbacks, "eps_reg": eps, "source_mass": float(np.sum(f) * op.mass)}
    return GridField(values.reshape((grid.nt + 1,) + grid.shape), grid, diag)


def solve_heat_oracle(m, grid, width=None):
    """Backward-Euler heat equation u_t = u_xx + mu in 1-D (tridiagonal solve).

    Same source and boundary treatment as ``solve_ibvp`` but an independent
    code path; used as the p = 2 reference.
    """
    if grid.n != 1:
        raise GridError("the tridiagonal heat oracle is one-dimensional")
    f = mollify_to_grid(m, grid, width)[1:-1]
    N = grid.nx - 2
    lam = grid.dt / grid.h ** 2
    ab = np.zeros((3, N))
    ab[0, 1:] = -lam
    ab[1, :] = 1.0 + 2.0 * lam
    ab[2, :-1] = -lam
    values = np.zeros((grid.nt + 1, grid.nx))
    u = np.zeros(N)
    for k in range(1, grid.nt + 1):
        u = solve_banded((1, 1), ab, u + grid.dt * f)
        values[k, 1:-1] = u
    return GridField(values, grid, {})


def sup_norm_on_window(u, t_lo, t_hi):
    """Max of ``u`` over grid nodes with time level in ``[t_lo, t_hi]``."""
    if not 0 <= t_lo < t_hi <= u.grid.T * (1 + 1e-12):
        raise ValueError("need 0 <= t_lo < t_hi <= T")
    t = u.grid.times
    sel = (t >= t_lo - 1e-12 * u.grid.T) & (t <= t_hi + 1e-12 * u.grid.T)
    if not np.any(sel):
        return 0.0
    return float(np.max(u.values[sel]))


def mass_history(u):
    """List of ``(t, integral over B_R of |u| dx)`` per time level (nodal midpoint rule)."""
    g = u.grid
    l1 = np.abs(u.values.reshape(g.nt + 1, -1))[:, g.interior.ravel()].sum(axis=1) * g.cell_volume
    return [(float(t), float(v)) for t, v in zip(u.grid.times, l1)]
