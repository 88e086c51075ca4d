"""Online primal-dual algorithms for fractional convex covering programs."""

from .errors import (ConfigError, InfeasibleError, InputError, NumericalError,
                     OnlinePDError, SizeError, StateError)
from .objective import ObjectiveSpec
from .engine import (ArrivalResult, ConstraintRow, DualityReport, EngineConfig, Mode,
                     PrimalDualState, competitive_bound, new_engine, primal_step)

__version__ = "0.1.0"

__all__ = [
    "ArrivalResult", "ConfigError", "ConstraintRow", "DualityReport", "EngineConfig",
    "InfeasibleError", "InputError", "Mode", "NumericalError", "ObjectiveSpec",
    "OnlinePDError", "PrimalDualState", "SizeError", "StateError",
    "competitive_bound", "new_engine", "primal_step",
]
