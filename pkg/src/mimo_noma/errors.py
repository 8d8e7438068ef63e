"""Exception types raised across the package."""


class NomaError(Exception):
    """Base class for all package errors."""


class DimensionError(NomaError, ValueError):
    """Array shapes or antenna counts are inconsistent with the request."""


class DomainError(NomaError, ValueError):
    """A parameter lies outside the domain where a quantity is defined."""


class RankDeficient(NomaError, ArithmeticError):
    """A channel or intermediate factor is numerically rank deficient."""


class InfinitePower(NomaError, ArithmeticError):
    """The average transmit power of a precoder diverges."""


class SolverFailure(NomaError, RuntimeError):
    """An iterative solver stalled. ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class MaxIterations(NomaError, RuntimeError):
    """An outer loop hit its iteration cap.

    ``best`` holds the best iterate found and ``trace`` the per-iteration log.
    """

    def __init__(self, message, best=None, trace=None):
        super().__init__(message)
        self.best = best
        self.trace = trace


class QuadratureError(NomaError, RuntimeError):
    """Adaptive integration did not reach the requested tolerance."""
