"""The p-by-q matrix-variate symmetric Laplace distribution.

A random matrix X follows this law when vec(X) is symmetric Laplace with
Kronecker scale Sigma2 (x) Sigma1, equivalently X = sqrt(W) Z with Z
matrix-normal.  Only the Kronecker product is identified: (Sigma1, Sigma2)
and (a Sigma1, Sigma2 / a) define the same distribution, so estimates are
reported as the canonical representative with trace(Sigma2) = q alongside
the invariant product.

The flip-flop EM estimator updates Sigma1 against the previous Sigma2 and
then Sigma2 against the fresh Sigma1, with shared conditional-expectation
weights computed once per iteration.  The MLE pair exists almost surely
iff N q >= p and N p >= q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import (
    DimensionMismatchError,
    ExistenceViolationError,
    NonFiniteError,
    NotPositiveDefiniteError,
    SingularInitialError,
)
from .linalg import (
    SpdMatrix,
    _factor_symmetric,
    as_matrix,
    as_spd,
    cholesky,
    kronecker,
)
from .mvsl import (
    LOG2,
    LOG_2PI,
    DEFAULT_Q_FLOOR,
    _REFINE_CAP,
    _REFINE_STEP_TOL,
    EmConfig,
    EmReport,
)


@dataclass(frozen=True)
class MatslModel:
    """Matrix-variate symmetric Laplace handle with cached factorizations."""

    sigma1: SpdMatrix
    sigma2: SpdMatrix

    @property
    def p(self) -> int:
        return self.sigma1.dim

    @property
    def q(self) -> int:
        return self.sigma2.dim

    @property
    def two_nu(self) -> int:
        return 2 - self.p * self.q


def model(sigma1, sigma2) -> MatslModel:
    """Build a model from SpdMatrix values or raw symmetric matrices."""
    return MatslModel(as_spd(sigma1, "sigma1"), as_spd(sigma2, "sigma2"))


@dataclass(frozen=True)
class MatslSample:
    """N observations of shape p-by-q, stored as an (n, p, q) array."""

    observations: np.ndarray

    def __post_init__(self):
        obs = np.ascontiguousarray(self.observations, dtype=np.float64)
        if obs.ndim != 3 or min(obs.shape) < 1:
            raise DimensionMismatchError(
                f"observations must be a non-empty (n, p, q) array, got {obs.shape}"
            )
        if not np.all(np.isfinite(obs)):
            raise DimensionMismatchError("observations contain non-finite entries")
        obs.flags.writeable = False
        object.__setattr__(self, "observations", obs)

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def p(self) -> int:
        return self.observations.shape[1]

    @property
    def q(self) -> int:
        return self.observations.shape[2]


@dataclass(frozen=True)
class KroneckerEstimate:
    """A scale-resolved (Sigma1, Sigma2) pair and their Kronecker product.

    ``scale`` records the factor a applied to Sigma2 (and divided out of
    Sigma1) to reach the canonical trace(Sigma2) = q representative; the
    ``kron`` field is invariant under that rescaling.
    """

    sigma1_hat: SpdMatrix
    sigma2_hat: SpdMatrix
    kron: np.ndarray
    scale: float


def require_existence(n: int, p: int, q: int) -> None:
    """MLE existence gate: N q >= p and N p >= q, compared in exact integers."""
    if n * q < p or n * p < q:
        raise ExistenceViolationError(
            f"MLE requires N >= max(p/q, q/p): got N = {n} with p = {p}, q = {q} "
            f"(need N q >= p and N p >= q)"
        )


def sample(sigma1, sigma2, n: int, seed: int) -> MatslSample:
    """Draw n observations via the representation X = sqrt(W) Z.

    Z is generated as L1 G L2' with G a p-by-q standard normal matrix
    (the matrix-normal construction); W ~ Exp(1) independent.
    Deterministic for a given seed.
    """
    s1 = as_spd(sigma1, "sigma1")
    s2 = as_spd(sigma2, "sigma2")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    w = rng.exponential(1.0, size=n)
    g = rng.standard_normal((n, s1.dim, s2.dim))
    z = np.einsum("ij,njk,lk->nil", s1.chol_lower, g, s2.chol_lower)
    return MatslSample(np.sqrt(w)[:, None, None] * z)


def _batched_quad_forms(
    l1: np.ndarray, l2: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """Q_i = tr(S2^{-1} X_i' S1^{-1} X_i) for the whole (n, p, q) stack."""
    n, p, q = x.shape
    half = solve_triangular(
        l1, x.transpose(1, 0, 2).reshape(p, n * q), lower=True, check_finite=False
    ).reshape(p, n, q)
    full = solve_triangular(
        l2, half.transpose(2, 1, 0).reshape(q, n * p), lower=True, check_finite=False
    ).reshape(q, n, p)
    return np.einsum("qnp,qnp->n", full, full)


def _log_pdf_terms(
    two_nu: int,
    q_forms: np.ndarray,
    log_k: np.ndarray,
    log_det1: float,
    log_det2: float,
    p: int,
    q: int,
) -> np.ndarray:
    const = (
        LOG2 - 0.5 * p * q * LOG_2PI - 0.5 * q * log_det1 - 0.5 * p * log_det2
    )
    return const + 0.25 * two_nu * np.log(0.5 * q_forms) + log_k


def log_pdf(m: MatslModel, x) -> float:
    """Log-density at a single p-by-q matrix.

    The density has an integrable pole at the origin whenever pq >= 2:
    the exact value is returned for every nonzero x and +inf signals the
    pole itself.  For pq = 1 the value is finite everywhere.
    """
    x = as_matrix(x, "x")
    if x.shape != (m.p, m.q):
        raise DimensionMismatchError(
            f"x has shape {x.shape}, expected {(m.p, m.q)}"
        )
    qf = _batched_quad_forms(m.sigma1.chol_lower, m.sigma2.chol_lower, x[None])[0]
    if qf == 0.0:
        if m.p * m.q == 1:
            return -0.5 * LOG2 - 0.5 * (m.sigma1.log_det + m.sigma2.log_det)
        return math.inf
    log_k, _ = kernels.em_log_k_and_ratio(m.two_nu, np.array([math.sqrt(2.0 * qf)]))
    return float(
        _log_pdf_terms(
            m.two_nu,
            np.array([qf]),
            log_k,
            m.sigma1.log_det,
            m.sigma2.log_det,
            m.p,
            m.q,
        )[0]
    )


def char_fn(m: MatslModel, t) -> float:
    """Characteristic function phi(T) = 1 / (1 + tr(Sigma2 T' Sigma1 T) / 2).

    Real-valued by the symmetry of the distribution, and invariant under
    (Sigma1, Sigma2) -> (a Sigma1, Sigma2 / a).
    """
    t = as_matrix(t, "t")
    if t.shape != (m.p, m.q):
        raise DimensionMismatchError(
            f"t has shape {t.shape}, expected {(m.p, m.q)}"
        )
    quad = float(np.trace(m.sigma2.matrix @ t.T @ m.sigma1.matrix @ t))
    return 1.0 / (1.0 + 0.5 * quad)


def weight(m: MatslModel, x, q_floor: float = DEFAULT_Q_FLOOR) -> float:
    """EM weight v = E(1/W | X = x) under the model."""
    x = as_matrix(x, "x")
    if x.shape != (m.p, m.q):
        raise DimensionMismatchError(
            f"x has shape {x.shape}, expected {(m.p, m.q)}"
        )
    qf = max(
        _batched_quad_forms(m.sigma1.chol_lower, m.sigma2.chol_lower, x[None])[0],
        q_floor,
    )
    _, ratio = kernels.em_log_k_and_ratio(m.two_nu, np.array([math.sqrt(2.0 * qf)]))
    return float(math.sqrt(2.0 / qf) * ratio[0])


def _batched_log_likelihood(
    s1: SpdMatrix, s2: SpdMatrix, x: np.ndarray, q_floor: float
) -> tuple[float, np.ndarray, np.ndarray]:
    n, p, q = x.shape
    two_nu = 2 - p * q
    qf = np.maximum(_batched_quad_forms(s1.chol_lower, s2.chol_lower, x), q_floor)
    log_k, ratio = kernels.em_log_k_and_ratio(two_nu, np.sqrt(2.0 * qf))
    terms = _log_pdf_terms(two_nu, qf, log_k, s1.log_det, s2.log_det, p, q)
    ll = float(np.sum(terms))
    if not math.isfinite(ll):
        bad = np.flatnonzero(~np.isfinite(terms))
        idx = int(bad[0]) if bad.size else None
        raise NonFiniteError(
            f"log-likelihood is non-finite (first offending observation: {idx})",
            observation_index=idx,
        )
    return ll, qf, ratio


def log_likelihood(
    sigma1, sigma2, data: MatslSample, q_floor: float = DEFAULT_Q_FLOOR
) -> float:
    """Exact log-likelihood of the sample (constants included).

    Exactly invariant under (Sigma1, Sigma2) -> (a Sigma1, Sigma2 / a):
    the determinant terms and the trace quadratic form cancel a.
    """
    s1 = as_spd(sigma1, "sigma1")
    s2 = as_spd(sigma2, "sigma2")
    if data.p != s1.dim or data.q != s2.dim:
        raise DimensionMismatchError(
            f"data is {data.p}x{data.q} but scale dims are {s1.dim} and {s2.dim}"
        )
    ll, _, _ = _batched_log_likelihood(s1, s2, data.observations, q_floor)
    return ll


def normalize_kronecker_pair(sigma1, sigma2) -> KroneckerEstimate:
    """Rescale a pair to the canonical representative with trace(Sigma2) = q.

    Applies a = q / trace(Sigma2) to Sigma2 and 1/a to Sigma1, leaving the
    Kronecker product unchanged; the applied factor is recorded.
    """
    s1 = as_spd(sigma1, "sigma1")
    s2 = as_spd(sigma2, "sigma2")
    a = s2.dim / float(np.trace(s2.matrix))
    if a != 1.0:
        s1 = cholesky(s1.matrix / a, "sigma1")
        s2 = cholesky(s2.matrix * a, "sigma2")
    return KroneckerEstimate(
        sigma1_hat=s1,
        sigma2_hat=s2,
        kron=kronecker(s2.matrix, s1.matrix),
        scale=a,
    )


def _default_initials(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, p, q = x.shape
    s1 = np.einsum("nij,nkj->ik", x, x) / (q * n)
    s2 = np.einsum("nji,njk->ik", x, x) / (p * n)
    return 0.5 * (s1 + s1.T), 0.5 * (s2 + s2.T)


def _flip_flop_update(s1, s2, v, x):
    """One pass of the pair update: Sigma1 against s2, then Sigma2 against it."""
    n, p, q = x.shape
    d = solve_triangular(
        s2.chol_lower,
        x.transpose(2, 0, 1).reshape(q, n * p),
        lower=True,
        check_finite=False,
    ).reshape(q, n, p)
    new1 = np.einsum("n,qna,qnb->ab", v, d, d) / (q * n)
    s1 = _factor_symmetric(0.5 * (new1 + new1.T), "EM sigma1 update")
    e = solve_triangular(
        s1.chol_lower,
        x.transpose(1, 0, 2).reshape(p, n * q),
        lower=True,
        check_finite=False,
    ).reshape(p, n, q)
    new2 = np.einsum("n,pna,pnb->ab", v, e, e) / (p * n)
    s2 = _factor_symmetric(0.5 * (new2 + new2.T), "EM sigma2 update")
    return s1, s2


def _refine_fixed_point(s1, s2, x, qf, ratio, q_floor):
    """Iterate the flip-flop map from a converged iterate until the step
    in the identified Kronecker product vanishes."""
    prev_step = math.inf
    kron_cur = kronecker(s2.matrix, s1.matrix)
    for _ in range(_REFINE_CAP):
        v = np.sqrt(2.0 / qf) * ratio
        try:
            n1, n2 = _flip_flop_update(s1, s2, v, x)
            kron_next = kronecker(n2.matrix, n1.matrix)
            step = float(
                np.linalg.norm(kron_next - kron_cur) / np.linalg.norm(kron_next)
            )
            s1, s2, kron_cur = n1, n2, kron_next
            _, qf, ratio = _batched_log_likelihood(s1, s2, x, q_floor)
        except (NotPositiveDefiniteError, NonFiniteError):
            break
        if step <= _REFINE_STEP_TOL or (step >= prev_step and step < 1e-8):
            break
        prev_step = step
    return s1, s2


def em_fit(
    data: MatslSample,
    config: EmConfig | None = None,
    initial1=None,
    initial2=None,
) -> tuple[EmReport, KroneckerEstimate]:
    """Maximum-likelihood estimate of (Sigma1, Sigma2) by flip-flop EM.

    Per iteration: conditional-expectation weights are computed at the
    current pair, Sigma1 is updated against the previous Sigma2, then
    Sigma2 against the fresh Sigma1.  Stops when the log-likelihood
    increase falls below ``config.epsilon``.

    Defaults for the initial pair are (1/(qN)) sum X X' and
    (1/(pN)) sum X' X.  The report's estimate is the normalized pair;
    the accompanying :class:`KroneckerEstimate` carries the identified
    product.
    """
    cfg = config or EmConfig()
    x = data.observations
    n, p, q = data.n, data.p, data.q
    require_existence(n, p, q)

    if initial1 is None and initial2 is None:
        init1, init2 = _default_initials(x)
        try:
            s1 = cholesky(init1, "initial sigma1 scatter")
            s2 = cholesky(init2, "initial sigma2 scatter")
        except NotPositiveDefiniteError as exc:
            raise SingularInitialError(
                "default initial scatter pair is not positive definite"
            ) from exc
    else:
        if initial1 is None or initial2 is None:
            raise ValueError("provide both initial1 and initial2, or neither")
        s1 = as_spd(initial1, "initial1")
        s2 = as_spd(initial2, "initial2")
    if s1.dim != p or s2.dim != q:
        raise DimensionMismatchError(
            f"initial dims ({s1.dim}, {s2.dim}) do not match data ({p}, {q})"
        )

    trace = np.empty(cfg.max_iterations + 1)
    ll, qf, ratio = _batched_log_likelihood(s1, s2, x, cfg.q_floor)
    trace[0] = ll
    converged = False
    iterations = 0
    for k in range(1, cfg.max_iterations + 1):
        v = np.sqrt(2.0 / qf) * ratio
        try:
            s1, s2 = _flip_flop_update(s1, s2, v, x)
        except NotPositiveDefiniteError as exc:
            raise NonFiniteError(
                f"flip-flop update became singular at iteration {k}"
            ) from exc
        ll_new, qf, ratio = _batched_log_likelihood(s1, s2, x, cfg.q_floor)
        trace[k] = ll_new
        iterations = k
        if ll_new - ll < cfg.epsilon:
            converged = True
            ll = ll_new
            break
        ll = ll_new

    if converged:
        s1, s2 = _refine_fixed_point(s1, s2, x, qf, ratio, cfg.q_floor)

    estimate = normalize_kronecker_pair(s1, s2)
    final_trace = trace[: iterations + 1].copy()
    final_trace.flags.writeable = False
    report = EmReport(
        estimate=(estimate.sigma1_hat, estimate.sigma2_hat),
        iterations=iterations,
        final_log_likelihood=float(final_trace[-1]),
        trace=final_trace,
        converged=converged,
    )
    return report, estimate
