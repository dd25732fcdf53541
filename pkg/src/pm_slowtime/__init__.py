"""Slow-time semidiscrete Perona-Malik flow in one space dimension.

Simulation of the rescaled gradient flow on a uniform grid, the limit
vertical plateau dynamics with collisions, and numerical certification of
the provable structure: energy monotonicity, renormalized-energy
consistency, the gradient-flow energy balance, uniform 1/4-Hoelder
bounds, and global-in-time convergence of discrete runs to the limit
evolution.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, ConventionWarning, InvariantViolationError,
                     JumpCollisionError, NotPiecewiseSubcriticalError,
                     NumericsError, ZeroGapError)
from .grid import (GridFunction, Norms, PlateauFunction, backward_diff,
                   discrete_jump_height, forward_diff, jump_cell, l2_inner,
                   norms, sample_plateau, subcritical_quotient,
                   supercritical_cells)
from .energy import (EnergyValue, discrete_slope, k_energy, k_energy_gradient,
                     limit_energy, limit_slope, pm_energy)
from .discrete_flow import (DiscreteTrajectory, ExtinctionEvent,
                            IntegratorOptions, Monitors, first_extinction,
                            integrate_discrete, rhs)
from .limit_flow import (CollisionEvent, LimitOptions, LimitSegment,
                         LimitTrajectory, evaluate_limit, integrate_limit,
                         limit_lifespan, plateau_rhs)
from .presets import PRESETS, get_preset

__all__ = [
    "__version__",
    "GridFunction", "PlateauFunction", "Norms",
    "forward_diff", "backward_diff", "jump_cell", "discrete_jump_height",
    "supercritical_cells", "subcritical_quotient", "sample_plateau", "norms",
    "l2_inner",
    "EnergyValue", "pm_energy", "k_energy", "k_energy_gradient",
    "discrete_slope", "limit_energy", "limit_slope",
    "IntegratorOptions", "DiscreteTrajectory", "ExtinctionEvent", "Monitors",
    "rhs", "integrate_discrete", "first_extinction",
    "LimitOptions", "LimitTrajectory", "LimitSegment", "CollisionEvent",
    "plateau_rhs", "integrate_limit", "evaluate_limit", "limit_lifespan",
    "PRESETS", "get_preset",
    "ConfigError", "ConventionWarning", "InvariantViolationError",
    "JumpCollisionError", "NotPiecewiseSubcriticalError", "NumericsError",
    "ZeroGapError",
]
