"""Exception hierarchy for the laplace_mle package."""


class LaplaceMleError(Exception):
    """Base class for all errors raised by this package."""


class NotSymmetricError(LaplaceMleError):
    """Matrix is not symmetric (or not square) within tolerance."""


class NotPositiveDefiniteError(LaplaceMleError):
    """Matrix failed the Cholesky positive-definiteness test."""


class DimensionMismatchError(LaplaceMleError):
    """Operands have incompatible shapes."""


class DimensionOverflowError(LaplaceMleError):
    """Requested result dimensions exceed platform limits."""


class NonPositiveArgumentError(LaplaceMleError):
    """Bessel argument must be a positive finite real."""


class Underflow(LaplaceMleError):
    """Unscaled Bessel value fell below the smallest positive normal.

    This is a signal rather than an input error: callers that need the
    large-argument regime should evaluate in log space instead.
    """


class ExistenceViolationError(LaplaceMleError):
    """Sample size below the minimum for which the MLE exists."""


class SingularInitialError(LaplaceMleError):
    """Default initial scatter matrix is not positive definite."""


class NonFiniteError(LaplaceMleError):
    """A log-likelihood or update became non-finite during fitting."""

    def __init__(self, message: str, observation_index: int | None = None):
        super().__init__(message)
        self.observation_index = observation_index


class InsufficientDataError(LaplaceMleError):
    """Too few observations for the requested estimator."""


class EmptyInputError(LaplaceMleError):
    """An operation received an empty collection."""


class MatrixFormatError(LaplaceMleError):
    """A matrix, dataset, or plan file could not be parsed."""


class PlanValidationError(LaplaceMleError):
    """A simulation plan is internally inconsistent."""
