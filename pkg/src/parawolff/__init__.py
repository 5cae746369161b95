"""Wolff potentials, a singular parabolic p-Laplace solver with measure data,
and Kilpelainen-Maly level iterations for checking pointwise bounds."""

from .grid import GridError, GridField, GridSpec
from .measure import RadonMeasure, ball_mass, mollify_to_grid, total_mass
from .params import ProblemParams, RangeError, make_params
from .solver import solve_heat_oracle, solve_ibvp
from .wolff import WolffProfile, wolff_potential

__version__ = "0.1.0"

__all__ = [
    "GridError", "GridField", "GridSpec", "ProblemParams", "RadonMeasure", "RangeError",
    "WolffProfile", "ball_mass", "make_params", "mollify_to_grid", "solve_heat_oracle",
    "solve_ibvp", "total_mass", "wolff_potential",
]
