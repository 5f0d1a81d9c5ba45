"""Exception types raised by the simulation modules."""


class PhasePumpError(Exception):
    """Base class for all library errors."""


class IntegrationError(PhasePumpError):
    """Adaptive integration failed (step-size underflow or solver failure)."""

    def __init__(self, message, t_fail=None):
        super().__init__(message)
        self.t_fail = t_fail


class RootInIntervalError(PhasePumpError):
    pass


class DivergenceError(PhasePumpError):
    """Time-of-flight integral diverges at a fixed point."""


class NoSaddleError(PhasePumpError):
    pass


class GapCollapseError(PhasePumpError):
    def __init__(self, message, theta=None, gap=None):
        super().__init__(message)
        self.theta = theta
        self.gap = gap


class EdgeLeakageError(PhasePumpError):
    """Selected Floquet state leaks onto the k or q cutoff."""

    def __init__(self, message, axis, weight):
        super().__init__(message)
        self.axis = axis
        self.weight = weight


class NormDriftError(PhasePumpError):
    pass


class StepResolutionError(PhasePumpError):
    pass


class DemodulationError(PhasePumpError):
    pass


class ConfigError(PhasePumpError):
    """Invalid run configuration; ``line`` is set for parse errors."""

    def __init__(self, message, line=None, field=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field
