"""wallforge: domain walls of the weighted pendulum equation."""

__version__ = "0.1.0"

from wallforge.energy import Profile, SphereMap, energy_G
from wallforge.grid import Grid, build_grid
from wallforge.models import Report, RunConfig, SolverOptions
from wallforge.wall_solver import SolveResult, solve_convex, solve_newton
from wallforge.weight import Weight, step_weight, weight_from_segments

__all__ = [
    "Grid",
    "Profile",
    "Report",
    "RunConfig",
    "SolveResult",
    "SolverOptions",
    "SphereMap",
    "Weight",
    "build_grid",
    "energy_G",
    "solve_convex",
    "solve_newton",
    "step_weight",
    "weight_from_segments",
]
