"""Exception types raised by classgain."""


class ClassGainError(Exception):
    """Base class for all library errors."""


class ValidationError(ClassGainError, ValueError):
    """Input violates a documented precondition."""


class DegenerateSignalError(ClassGainError, ValueError):
    """The signal (or a source) has zero spread where a positive one is needed."""


class InfeasibleRateError(ClassGainError, ValueError):
    """The total rate budget does not cover the label entropy."""


class SizeGuardError(ClassGainError, ValueError):
    """Exhaustive search requested on an instance that is too large."""


class NumericalError(ClassGainError, ArithmeticError):
    """A computation produced non-finite values."""
