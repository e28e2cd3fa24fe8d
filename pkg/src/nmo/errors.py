"""Exception hierarchy shared by every module."""


class NmoError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(NmoError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(NmoError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    ``estimate`` holds the best value available when the routine gave up.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class EvaluationError(NmoError, ArithmeticError):
    """An objective returned a value that cannot be ordered (NaN)."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class IllConditionedError(NmoError, ArithmeticError):
    """A ratio was requested whose denominator is indistinguishable from zero."""
