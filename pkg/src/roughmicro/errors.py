"""Exception hierarchy shared by every module."""


class RoughMicroError(Exception):
    """Base class for library errors."""


class DomainError(RoughMicroError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(RoughMicroError, ValueError):
    """Inconsistent or malformed configuration."""


class ContractError(RoughMicroError, ValueError):
    """A documented precondition between arguments is violated."""


class SizeLimitError(RoughMicroError, ValueError):
    """Requested problem size exceeds the supported range."""


class UnsupportedLawError(RoughMicroError, NotImplementedError):
    """The mark law has no closed form for the requested quantity."""


class FactorizationError(RoughMicroError, ArithmeticError):
    """A covariance matrix could not be factorized.

    Attributes
    ----------
    min_eigenvalue : float
        Smallest eigenvalue of the offending matrix.
    """

    def __init__(self, message, min_eigenvalue):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class AccuracyError(RoughMicroError, ArithmeticError):
    """Quadrature did not reach the requested tolerance.

    Attributes
    ----------
    partial : float or None
        Best estimate available when the budget ran out.
    error : float or None
        Error indicator of that estimate.
    """

    def __init__(self, message, partial=None, error=None):
        super().__init__(message)
        self.partial = partial
        self.error = error
