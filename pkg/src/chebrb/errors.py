"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array extents or dimensionality do not match what an operation needs."""


class DomainError(ValueError):
    """A value lies outside the domain an operation is defined on."""


class OracleError(RuntimeError):
    """An oracle call failed while building an interpolant.

    The offending node (in original coordinates) is kept in ``node``.
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ToleranceError(ValueError):
    """Requested truncation tolerance is below what the polynomial can reach.

    ``floor`` holds the smallest MSE achievable on the control points.
    """

    def __init__(self, message, floor):
        super().__init__(message)
        self.floor = floor


class SimulationError(RuntimeError):
    """A Monte Carlo path produced a non-finite value."""
