"""Uniform space-time grids over B_R x (0, T) and fields living on them."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GridError(ValueError):
    """Data does not fit on the grid."""


@dataclass(frozen=True)
class GridSpec:
    """Node-centred tensor grid on the cube [-R, R]^n, restricted to B_R.

    Nodes sit at ``-R + i*h`` with ``h = 2R/(nx-1)``; nodes with
    ``|x| >= R`` are Dirichlet nodes. Time levels are ``t_k = k*dt``,
    ``k = 0..nt``.
    """

    n: int
    nx: int
    nt: int
    R: float
    T: float

    def __post_init__(self):
        if self.nx < 3 or self.nt < 1:
            raise GridError("need nx >= 3 and nt >= 1")
        if not (self.R > 0 and self.T > 0):
            raise GridError("R and T must be positive")

    @property
    def h(self):
        return 2.0 * self.R / (self.nx - 1)

    @property
    def dt(self):
        return self.T / self.nt

    @property
    def cell_volume(self):
        return self.h ** self.n

    @property
    def shape(self):
        return (self.nx,) * self.n

    @cached_property
    def axis(self):
        return -self.R + self.h * np.arange(self.nx)

    @cached_property
    def times(self):
        return self.dt * np.arange(self.nt + 1)

    @cached_property
    def coords(self):
        """Node coordinates, shape ``shape + (n,)``."""
        mesh = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def radius(self):
        return np.sqrt(np.sum(self.coords ** 2, axis=-1))

    @cached_property
    def interior(self):
        """Boolean mask of free (non-Dirichlet) nodes."""
        return self.radius < self.R * (1.0 - 1e-12)

    def node_index(self, x):
        """Multi-index of the node at ``x``; raises if ``x`` is not a node."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = (x + self.R) / self.h
        rounded = np.rint(idx)
        if np.any(np.abs(idx - rounded) > 1e-8) or np.any(rounded < 0) \
                or np.any(rounded > self.nx - 1):
            raise GridError(f"{x} is not a grid node")
        return tuple(int(i) for i in rounded)

    def time_index(self, t):
        k = t / self.dt
        kr = round(k)
        if abs(k - kr) > 1e-8 or kr < 0 or kr > self.nt:
            raise GridError(f"t={t} is not a time level")
        return int(kr)

    def refine(self, factor=2):
        """Grid with ``h`` and ``dt`` divided by ``factor``; nodes nest."""
        return GridSpec(self.n, (self.nx - 1) * factor + 1, self.nt * factor, self.R, self.T)

    def as_dict(self):
        return {"n": self.n, "nx": self.nx, "nt": self.nt, "R": self.R, "T": self.T,
                "h": self.h, "dt": self.dt}


@dataclass(frozen=True, eq=False)
class GridField:
    """Space-time values with shape ``(nt + 1,) + grid.shape``, time-major."""

    values: np.ndarray
    grid: GridSpec
    diagnostics: dict = None

    def __post_init__(self):
        expected = (self.grid.nt + 1,) + self.grid.shape
        if self.values.shape != expected:
            raise GridError(f"values shape {self.values.shape} != {expected}")
        if not np.all(np.isfinite(self.values)):
            raise GridError("field contains non-finite values")
        self.values.setflags(write=False)

    def at(self, x, t):
        """Nodal value at a grid node and time level."""
        return float(self.values[(self.grid.time_index(t),) + self.grid.node_index(x)])
