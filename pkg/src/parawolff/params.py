"""Problem parameters for the singular parabolic p-Laplacian."""

from dataclasses import dataclass


class RangeError(ValueError):
    """A parameter lies outside its admissible range."""


def lambda_upper_bound(p):
    """Strict upper bound for the auxiliary exponent lambda."""
    return min(p - 1.0, (2.0 - p) / (p - 1.0), 0.5)


@dataclass(frozen=True)
class ProblemParams:
    n: int
    p: float
    eps_reg: float
    lam: float
    k: float
    c1: float = 1.0
    c2: float = 1.0

    @property
    def beta(self):
        return self.p + self.n * (self.p - 2.0)

    def as_dict(self):
        return {"n": self.n, "p": self.p, "eps_reg": self.eps_reg,
                "lambda": self.lam, "k": self.k, "c1": self.c1, "c2": self.c2,
                "beta": self.beta}


def make_params(n, p, eps_reg, lam=None, k=None):
    """Validate and build ``ProblemParams``.

    ``p`` must lie in the supercritical singular range ``2n/(n+1) < p < 2``,
    which is the same as ``beta = p + n(p-2) > 0``. ``lam`` defaults to half
    of its admissible bound and ``k`` to ``p + 2``.
    """
    if int(n) != n or n < 1:
        raise RangeError(f"dimension n must be a positive integer, got {n}")
    n = int(n)
    p = float(p)
    if not (2.0 * n / (n + 1.0) < p < 2.0):
        raise RangeError(
            f"p={p} outside the admissible range ({2.0 * n / (n + 1.0):g}, 2) for n={n}")
    if not eps_reg > 0:
        raise RangeError(f"eps_reg must be positive, got {eps_reg}")
    bound = lambda_upper_bound(p)
    if lam is None:
        lam = 0.5 * bound
    elif not (0.0 < lam < bound):
        raise RangeError(f"lambda={lam} must lie in (0, {bound:g})")
    if k is None:
        k = p + 2.0
    elif not k > p + 1.0:
        raise RangeError(f"k={k} must exceed p + 1 = {p + 1.0:g}")
    return ProblemParams(n=n, p=p, eps_reg=float(eps_reg), lam=float(lam), k=float(k))


def potential_params(n, p):
    """Unvalidated parameters for Wolff potentials, which make sense for any p > 1.

    Only ``n`` and ``p`` are meaningful; use ``make_params`` for anything
    that touches the equation.
    """
    if not p > 1:
        raise RangeError(f"the Wolff potential needs p > 1, got {p}")
    return ProblemParams(n=int(n), p=float(p), eps_reg=1.0, lam=0.0, k=p + 2.0)
