"""Exception hierarchy shared across the package."""


class DyncompError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(DyncompError, ValueError):
    pass


class DomainError(DyncompError, ValueError):
    pass


class InsufficientDataError(DyncompError, ValueError):
    pass


class DegenerateCovarianceError(DyncompError, ArithmeticError):
    """Raised when a covariance matrix cannot be Cholesky-factorized.

    Attributes
    ----------
    condition : float
        Estimated 2-norm condition number of the offending matrix
        (``inf`` when it has a nonpositive eigenvalue).
    """

    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class SpectralFloorError(DyncompError, ArithmeticError):
    pass


class JitterRequiredError(DyncompError, ValueError):
    pass


class ApproximationDomainError(DyncompError, ValueError):
    pass


class WhiteningError(DyncompError, ArithmeticError):
    pass


class DivergenceError(DyncompError, ArithmeticError):
    pass


class KernelDegeneracyError(DyncompError, ArithmeticError):
    pass


class FitFailureError(DyncompError, RuntimeError):
    """All optimizer restarts failed.

    ``diagnostics`` holds one dict per restart describing the failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])
