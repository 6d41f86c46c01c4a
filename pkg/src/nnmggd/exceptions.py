"""Exception hierarchy.

``DataError`` covers malformed user input; ``NumericalError`` covers
failures of the numerical routines (factorizations, fixed points).
"""


class NnMggdError(Exception):
    """Base class for package errors."""


class DataError(NnMggdError, ValueError):
    """Input data is malformed, empty or inconsistent."""


class NumericalError(NnMggdError, ArithmeticError):
    """A numerical routine failed."""


class NotSymmetricError(NumericalError):
    pass


class NotPositiveDefiniteError(NumericalError):
    def __init__(self, lambda_min):
        self.lambda_min = float(lambda_min)
        super().__init__(f"matrix is not positive definite (lambda_min={lambda_min:.3e})")


class ConditioningError(NumericalError):
    def __init__(self, condition_number):
        self.condition_number = float(condition_number)
        super().__init__(f"condition number {condition_number:.3e} exceeds limit")


class BootstrapFailure(NumericalError):
    """Too many bootstrap replicates failed to fit."""


class ConvergenceWarning(UserWarning):
    """An iterative routine stopped before reaching its tolerance."""
