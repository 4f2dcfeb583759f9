"""Shared exception types."""


class QuadratureError(RuntimeError):
    """Raised when a quadrature rule fails its convergence/agreement check.

    Carries the last estimate so callers can log it alongside the failure.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class AdmissibilityError(ValueError):
    """Raised when a thinning exponent lies outside the admissible range
    and no explicit override was requested."""


class ConfigError(ValueError):
    """Raised for malformed experiment configuration input."""
