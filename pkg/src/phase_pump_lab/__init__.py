"""Phase-particle pump toolkit: classical slips, adiabatic and Floquet winding."""

from .errors import (
    ConfigError, DemodulationError, DivergenceError, EdgeLeakageError,
    GapCollapseError, IntegrationError, NoSaddleError, NormDriftError,
    PhasePumpError, RootInIntervalError, StepResolutionError,
)
from .model import ModelParams, PhasePoint, force, force_dphi, potential

__version__ = "0.1.0"

__all__ = [
    "ModelParams", "PhasePoint", "force", "force_dphi", "potential",
    "ConfigError", "DemodulationError", "DivergenceError", "EdgeLeakageError",
    "GapCollapseError", "IntegrationError", "NoSaddleError", "NormDriftError",
    "PhasePumpError", "RootInIntervalError", "StepResolutionError",
    "__version__",
]
