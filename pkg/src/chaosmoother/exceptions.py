"""Exception hierarchy shared by every module."""


class ChaosmootherError(Exception):
    """Base class for all package errors."""


class ConfigError(ChaosmootherError, ValueError):
    """Invalid configuration or argument combination."""


class AssumptionViolation(ChaosmootherError, ValueError):
    """Model parameters violate a standing assumption of the theory."""


class NumericFailure(ChaosmootherError, RuntimeError):
    """A numerical routine could not produce a trustworthy result."""


class Blowup(NumericFailure):
    """Integrated state left the escape ball."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class StepUnderflow(NumericFailure):
    """Adaptive step size fell below the configured floor."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ConvergenceError(NumericFailure):
    """An iterative solver did not converge within its budget."""


class DegenerateInputError(ChaosmootherError, ValueError):
    """Input data carries no information for the requested fit."""


class OnGammaError(ChaosmootherError, ValueError):
    """Point lies on the stable line u1 = 0 and never reaches the cusps."""


class OrbitOnDiscontinuity(ChaosmootherError, ValueError):
    """Return-map orbit hits the discontinuity at zero."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class UnidentifiableAtZero(ChaosmootherError, ValueError):
    """Explicit state recovery divides by a vanishing coordinate."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NoPredecessor(ConfigError):
    """Backward flow left the attractor: the point has no preimage on the square."""
