"""Exception types shared across the package."""


class ToralSpecError(Exception):
    """Base class for all package errors."""


class InputError(ToralSpecError, ValueError):
    """Malformed or out-of-contract input."""


class SingularError(ToralSpecError):
    pass


class NotUnipotentError(ToralSpecError):
    pass


class NotSemisimpleError(ToralSpecError):
    pass


class RootOfUnityError(ToralSpecError):
    pass


class NotInvariantError(ToralSpecError):
    pass


class InfinitePeriodicSetError(ToralSpecError):
    pass


class CosetError(ToralSpecError):
    pass


class NonErgodicFiberError(ToralSpecError):
    pass


class SpacingTooSmallError(ToralSpecError):
    pass


class ClosingFailedError(ToralSpecError):
    """Raised when no candidate traces; `best` holds the best attempt."""

    def __init__(self, msg, best=None, error=None):
        super().__init__(msg)
        self.best = best
        self.error = error


class CoprimalityError(ToralSpecError):
    pass


class BudgetError(ToralSpecError):
    pass


class CheckFailedError(ToralSpecError):
    """A post hoc verification failed."""
