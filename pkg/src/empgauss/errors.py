"""Exception hierarchy shared by all modules."""


class EmpGaussError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(EmpGaussError, ValueError):
    pass


class NotSymmetric(EmpGaussError, ValueError):
    pass


class NotUnitDiagonal(EmpGaussError, ValueError):
    pass


class NotPositiveSemidefinite(EmpGaussError, ValueError):
    pass


class FactorizationFailed(EmpGaussError, RuntimeError):
    pass


class DegreeTooLarge(EmpGaussError, ValueError):
    pass


class RangeExceedsPath(EmpGaussError, ValueError):
    pass


class BlockExceedsDimension(EmpGaussError, ValueError):
    pass


class ConfigError(EmpGaussError, ValueError):
    pass


class OutputWriteFailed(EmpGaussError, OSError):
    pass


class BoundViolation(EmpGaussError, AssertionError):
    """A Monte Carlo estimate exceeded a theoretical bound beyond its slack."""
