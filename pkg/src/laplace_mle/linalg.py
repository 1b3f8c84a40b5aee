"""Dense real linear algebra shared by every other module.

Matrices are carried as C-contiguous float64 ``numpy.ndarray`` values
(row-major storage with explicit shape). :func:`as_matrix` is the single
validation gate: it rejects NaN/Inf entries so that every downstream
operation may assume finite inputs.

Applications of an inverse scale matrix are always performed as two
triangular solves against the cached Cholesky factor held by
:class:`SpdMatrix`; explicit inverses are never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatchError,
    DimensionOverflowError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)

SYMMETRY_RTOL = 1e-10

_MACHINE_EPS = float(np.finfo(np.float64).eps)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate and normalize a 2-D real matrix.

    Returns a C-contiguous float64 copy with all entries finite.
    """
    m = np.array(values, dtype=np.float64, order="C", copy=True)
    if m.ndim != 2:
        raise DimensionMismatchError(
            f"{name} must be 2-D, got {m.ndim}-D with shape {m.shape}"
        )
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be non-empty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DimensionMismatchError(f"{name} contains non-finite entries")
    return m


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Validate a 1-D real vector (a p-vector observation)."""
    v = np.array(values, dtype=np.float64, copy=True)
    if v.ndim == 2 and 1 in v.shape:
        v = v.reshape(-1)
    if v.ndim != 1 or v.size < 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {np.shape(values)}")
    if not np.all(np.isfinite(v)):
        raise DimensionMismatchError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True)
class SpdMatrix:
    """A symmetric positive-definite matrix with its Cholesky factorization.

    Attributes
    ----------
    matrix : ndarray
        The (symmetrized) matrix itself, shape ``(dim, dim)``.
    chol_lower : ndarray
        Lower-triangular factor L with ``L @ L.T == matrix``.
    log_det : float
        ``log det(matrix)``, computed as ``2 * sum(log(diag(L)))``.

    Instances are immutable (arrays are marked read-only) and safe to
    share across threads.  Construct via :func:`cholesky`.
    """

    matrix: np.ndarray
    chol_lower: np.ndarray
    log_det: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def solve_lower(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``L @ z = rhs`` for z (one half of a Sigma^{-1} application)."""
        return solve_triangular(self.chol_lower, rhs, lower=True, check_finite=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpdMatrix):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash((self.matrix.shape[0], self.matrix.tobytes()))


def _factor_symmetric(sym: np.ndarray, name: str) -> SpdMatrix:
    """Factor an already-symmetrized candidate; trusts the caller's input.

    The failure threshold is the rank-revealing cutoff: a pivot at or
    below ``dim * machine_eps * max(diag)`` rejects the matrix.
    """
    max_diag = float(np.max(np.diagonal(sym)))
    if max_diag <= 0.0:
        raise NotPositiveDefiniteError(f"{name} has no positive diagonal entry")
    try:
        lower = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from exc
    diag = np.diagonal(lower)
    pivots = diag * diag
    pivot_floor = sym.shape[0] * _MACHINE_EPS * max_diag
    if np.min(pivots) <= pivot_floor:
        raise NotPositiveDefiniteError(
            f"{name} is numerically singular: smallest pivot {np.min(pivots):.3e} "
            f"at or below threshold {pivot_floor:.3e}"
        )
    log_det = 2.0 * float(np.sum(np.log(diag)))
    return SpdMatrix(_readonly(sym), _readonly(lower), log_det)


def cholesky(m, name: str = "matrix") -> SpdMatrix:
    """Factor a symmetric positive-definite matrix.

    Parameters
    ----------
    m : array_like or SpdMatrix
        Square matrix, symmetric within ``1e-10`` relative Frobenius error.

    Returns
    -------
    SpdMatrix

    Raises
    ------
    NotSymmetricError
        If ``m`` is not square or not symmetric within tolerance.
    NotPositiveDefiniteError
        If factorization fails or any pivot falls at or below
        ``dim * machine_eps * max(diag(m))``.
    """
    if isinstance(m, SpdMatrix):
        return m
    a = as_matrix(m, name)
    n, cols = a.shape
    if n != cols:
        raise NotSymmetricError(f"{name} must be square, got shape {a.shape}")
    norm = float(np.linalg.norm(a))
    skew = float(np.linalg.norm(a - a.T))
    if skew > SYMMETRY_RTOL * max(norm, 1e-300):
        raise NotSymmetricError(
            f"{name} is not symmetric: ||m - m.T|| = {skew:.3e} "
            f"exceeds {SYMMETRY_RTOL:.0e} * ||m||"
        )
    return _factor_symmetric(0.5 * (a + a.T), name)


def as_spd(m, name: str = "matrix") -> SpdMatrix:
    """Coerce an SpdMatrix or raw symmetric matrix into an SpdMatrix."""
    return m if isinstance(m, SpdMatrix) else cholesky(m, name)


def kronecker(a, b) -> np.ndarray:
    """Kronecker product with block (i, j) equal to ``a[i, j] * b``."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows * cols > np.iinfo(np.intp).max:
        raise DimensionOverflowError(
            f"kronecker result {rows}x{cols} exceeds platform limits"
        )
    return np.kron(a, b)


def vec(m) -> np.ndarray:
    """Column-wise vectorization: stacks the columns of ``m`` into one column."""
    m = as_matrix(m, "m")
    return m.reshape(-1, 1, order="F").copy()


def trace_quadratic_form(x, s1: SpdMatrix, s2: SpdMatrix) -> float:
    """Evaluate ``tr(S2^{-1} x^T S1^{-1} x)`` via triangular solves.

    ``x`` must be p-by-q with ``s1.dim == p`` and ``s2.dim == q``.  The
    result is nonnegative, and zero only for ``x == 0``.
    """
    x = as_matrix(x, "x")
    p, q = x.shape
    if s1.dim != p or s2.dim != q:
        raise DimensionMismatchError(
            f"x is {p}x{q} but scale dims are {s1.dim} and {s2.dim}"
        )
    a = s1.solve_lower(x)          # L1^{-1} x, p x q
    b = s2.solve_lower(a.T)        # L2^{-1} x^T L1^{-T}, q x p
    return float(np.sum(b * b))


def frobenius_norm(m) -> float:
    """Square root of the sum of squared entries."""
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise DimensionMismatchError("frobenius_norm input contains non-finite entries")
    return float(np.sqrt(np.sum(m * m)))
