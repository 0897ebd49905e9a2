"""Exception types raised across the package."""


class BarrierBilevelError(Exception):
    """Base class for every error raised by this package."""


class NonInterior(BarrierBilevelError, ValueError):
    """A point that must be strictly interior has a nonpositive slack."""


class FactorizationFailure(BarrierBilevelError):
    pass


class ConvergenceFailure(BarrierBilevelError):
    """An iterative solver stopped before reaching its tolerance.

    ``residual`` holds the last measured residual (or stationarity) value.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class MissingBounds(BarrierBilevelError):
    pass


class NotSPD(BarrierBilevelError, ValueError):
    pass


class InvalidParameter(BarrierBilevelError, ValueError):
    pass


class InvalidInput(BarrierBilevelError, ValueError):
    pass


class InvalidConfig(BarrierBilevelError, ValueError):
    pass


class MissingSecondOrderOracle(BarrierBilevelError):
    pass


class NonConvexityDetected(BarrierBilevelError):
    """Newton on the proxy objective met an indefinite Hessian (multiplier too small)."""
