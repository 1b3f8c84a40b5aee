"""Multivariate and matrix-variate symmetric Laplace distributions.

Densities, characteristic function, exact samplers, EM maximum-likelihood
estimators (including the flip-flop Kronecker estimator), existence
checks, and a Monte Carlo harness for estimator bias and mean-distance
studies.

Modules
-------
linalg
    Dense matrix plumbing: validated arrays, Cholesky-backed SPD type,
    Kronecker products, vectorization, trace quadratic forms.
bessel
    Modified Bessel function of the third kind for integer and
    half-integer orders (value, log, and ratio forms).
mvsl
    The p-dimensional symmetric Laplace distribution and its EM fit.
matsl
    The p-by-q matrix-variate symmetric Laplace distribution and its
    flip-flop EM fit.
simstudy
    Built-in study cases, the replication engine, and CSV emission.
cli
    The ``laplace-mle`` command-line interface.

Hot Bessel kernels run through numba when available; set
``LAPLACE_MLE_BACKEND=numpy`` to force the pure-numpy fallback.
"""

from . import bessel, kernels, linalg, matsl, mvsl, simstudy
from .errors import (
    DimensionMismatchError,
    DimensionOverflowError,
    EmptyInputError,
    ExistenceViolationError,
    InsufficientDataError,
    LaplaceMleError,
    MatrixFormatError,
    NonFiniteError,
    NonPositiveArgumentError,
    NotPositiveDefiniteError,
    NotSymmetricError,
    PlanValidationError,
    SingularInitialError,
    Underflow,
)
from .linalg import SpdMatrix, cholesky, frobenius_norm, kronecker, trace_quadratic_form, vec
from .mvsl import EmConfig, EmReport

__version__ = "0.1.0"

__all__ = [
    "bessel",
    "kernels",
    "linalg",
    "matsl",
    "mvsl",
    "simstudy",
    "SpdMatrix",
    "cholesky",
    "frobenius_norm",
    "kronecker",
    "trace_quadratic_form",
    "vec",
    "EmConfig",
    "EmReport",
    "LaplaceMleError",
    "NotSymmetricError",
    "NotPositiveDefiniteError",
    "DimensionMismatchError",
    "DimensionOverflowError",
    "NonPositiveArgumentError",
    "Underflow",
    "ExistenceViolationError",
    "SingularInitialError",
    "NonFiniteError",
    "InsufficientDataError",
    "EmptyInputError",
    "MatrixFormatError",
    "PlanValidationError",
    "__version__",
]
