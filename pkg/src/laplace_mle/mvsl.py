"""The p-dimensional symmetric Laplace distribution.

A random vector Y follows this law when Y = sqrt(W) Z with W ~ Exp(1)
independent of Z ~ N_p(0, Sigma).  The density involves K_nu of the
quadratic form Q = y' Sigma^{-1} y at order nu = (2 - p)/2, so all Bessel
work goes through :mod:`laplace_mle.kernels`.

The maximum-likelihood estimator of Sigma is computed by an EM iteration
that alternates conditional-expectation weights v_i = E(1/W_i | Y_i) with
the weighted-scatter update Sigma = (1/N) sum v_i Y_i Y_i'.  The MLE
exists almost surely iff N >= p, which :func:`em_fit` enforces up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import (
    DimensionMismatchError,
    ExistenceViolationError,
    InsufficientDataError,
    NonFiniteError,
    NotPositiveDefiniteError,
    SingularInitialError,
)
from .linalg import SpdMatrix, _factor_symmetric, as_spd, as_vector, cholesky

LOG2 = math.log(2.0)
LOG_2PI = math.log(2.0 * math.pi)

DEFAULT_EPSILON = 1e-11
DEFAULT_MAX_ITERATIONS = 5000
DEFAULT_Q_FLOOR = 1e-12


@dataclass(frozen=True)
class EmConfig:
    """Stopping rule and robustness knobs for the EM loop.

    ``epsilon`` is the threshold on the log-likelihood increase,
    ``q_floor`` the floor applied to degenerate quadratic forms before
    Bessel evaluation.
    """

    epsilon: float = DEFAULT_EPSILON
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    q_floor: float = DEFAULT_Q_FLOOR

    def __post_init__(self):
        if not (self.epsilon > 0.0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not (self.q_floor > 0.0):
            raise ValueError(f"q_floor must be positive, got {self.q_floor}")


@dataclass(frozen=True)
class EmReport:
    """Outcome of one EM fit.

    ``trace`` holds the log-likelihood at the initial value followed by
    one entry per iteration of the stopping rule; it is non-decreasing up
    to floating-point noise, and ``iterations`` counts exactly those
    iterations.  ``converged`` means the final increment fell below
    epsilon (as opposed to hitting the iteration cap).

    On convergence, ``estimate`` is the stopping-rule iterate refined by
    further applications of the same update map until the parameter step
    is negligible.  The refinement is needed because log-likelihood
    increments drown in evaluation noise well before the iterate reaches
    the fixed point, and it leaves the trace and iteration count (the
    stopping-rule quantities) untouched.
    """

    estimate: object
    iterations: int
    final_log_likelihood: float
    trace: np.ndarray = field(repr=False)
    converged: bool = True


# Refinement stops once the relative parameter step falls below this (the
# next EM step, i.e. the fixed-point residual, is smaller still), or when
# steps stop shrinking (the floating-point floor).
_REFINE_STEP_TOL = 1e-9
_REFINE_CAP = 1000


@dataclass(frozen=True)
class MvslModel:
    """Symmetric Laplace distribution handle with cached factorization."""

    sigma: SpdMatrix

    @property
    def p(self) -> int:
        return self.sigma.dim

    @property
    def two_nu(self) -> int:
        return 2 - self.p


def model(sigma) -> MvslModel:
    """Build a model from an SpdMatrix or raw symmetric matrix."""
    return MvslModel(sigma=as_spd(sigma, "sigma"))


@dataclass(frozen=True)
class MvslSample:
    """N observations of dimension p, stored as an (n, p) array."""

    observations: np.ndarray

    def __post_init__(self):
        obs = np.ascontiguousarray(self.observations, dtype=np.float64)
        if obs.ndim != 2 or obs.shape[0] < 1 or obs.shape[1] < 1:
            raise DimensionMismatchError(
                f"observations must be a non-empty (n, p) array, got {obs.shape}"
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


def require_existence(n: int, p: int) -> None:
    """MLE existence gate: raises unless the sample size satisfies N >= p."""
    if n < p:
        raise ExistenceViolationError(
            f"MLE requires N >= p: got N = {n} observations of dimension p = {p}"
        )


def sample(sigma, n: int, seed: int) -> MvslSample:
    """Draw n observations via the representation Y = sqrt(W) Z.

    W ~ Exp(1) and Z ~ N_p(0, Sigma) are generated independently, Z as the
    Cholesky factor applied to a standard normal vector.  Deterministic
    for a given seed.
    """
    spd = as_spd(sigma, "sigma")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    w = rng.exponential(1.0, size=n)
    g = rng.standard_normal((n, spd.dim))
    z = g @ spd.chol_lower.T
    return MvslSample(np.sqrt(w)[:, None] * z)


def _quad_forms(spd: SpdMatrix, y: np.ndarray) -> np.ndarray:
    """Q_i = y_i' Sigma^{-1} y_i for all rows of y, via one triangular solve."""
    z = solve_triangular(spd.chol_lower, y.T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", z, z)


def _log_pdf_terms(
    two_nu: int, q: np.ndarray, log_k: np.ndarray, log_det: float, p: int
) -> np.ndarray:
    const = LOG2 - 0.5 * p * LOG_2PI - 0.5 * log_det
    return const + 0.25 * two_nu * np.log(0.5 * q) + log_k


def log_pdf(m: MvslModel, y) -> float:
    """Log-density at a single p-vector.

    For p >= 2 the density has an integrable pole at the origin: the
    exact value is returned for every nonzero y (log-space evaluation is
    stable arbitrarily close to zero) and +inf signals the pole itself.
    For p = 1 the Bessel factor cancels the pole and the value is finite
    everywhere.
    """
    y = as_vector(y, "y")
    if y.shape[0] != m.p:
        raise DimensionMismatchError(f"y has length {y.shape[0]}, expected {m.p}")
    q = _quad_forms(m.sigma, y[None, :])[0]
    if q == 0.0:
        if m.p == 1:
            return -0.5 * LOG2 - 0.5 * m.sigma.log_det
        return math.inf
    x = np.sqrt(2.0 * q)
    log_k, _ = kernels.em_log_k_and_ratio(m.two_nu, np.array([x]))
    return float(
        _log_pdf_terms(m.two_nu, np.array([q]), log_k, m.sigma.log_det, m.p)[0]
    )


def weight(m: MvslModel, y, q_floor: float = DEFAULT_Q_FLOOR) -> float:
    """EM weight v = E(1/W | Y = y) under the model.

    Evaluates (Q/2)^{-1/2} K_{nu-1}(sqrt(2Q)) / K_nu(sqrt(2Q)) with the
    quadratic form floored at ``q_floor``.
    """
    y = as_vector(y, "y")
    if y.shape[0] != m.p:
        raise DimensionMismatchError(f"y has length {y.shape[0]}, expected {m.p}")
    q = max(_quad_forms(m.sigma, y[None, :])[0], q_floor)
    _, ratio = kernels.em_log_k_and_ratio(m.two_nu, np.array([math.sqrt(2.0 * q)]))
    return float(math.sqrt(2.0 / q) * ratio[0])


def _batched_log_likelihood(
    spd: SpdMatrix, y: np.ndarray, q_floor: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """(log-likelihood, floored Q, EM ratio) in one kernel pass."""
    n, p = y.shape
    two_nu = 2 - p
    q = np.maximum(_quad_forms(spd, y), q_floor)
    log_k, ratio = kernels.em_log_k_and_ratio(two_nu, np.sqrt(2.0 * q))
    terms = _log_pdf_terms(two_nu, q, log_k, spd.log_det, p)
    ll = float(np.sum(terms))
    if not math.isfinite(ll):
        bad = np.flatnonzero(~np.isfinite(terms))
        idx = int(bad[0]) if bad.size else None
        raise NonFiniteError(
            f"log-likelihood is non-finite (first offending observation: {idx})",
            observation_index=idx,
        )
    return ll, q, ratio


def log_likelihood(sigma, data: MvslSample, q_floor: float = DEFAULT_Q_FLOOR) -> float:
    """Exact log-likelihood of the sample (constants included).

    Equal to the sum of :func:`log_pdf` over observations; quadratic
    forms are floored at ``q_floor`` so degenerate observations yield a
    finite value rather than the pole.
    """
    spd = as_spd(sigma, "sigma")
    if data.p != spd.dim:
        raise DimensionMismatchError(
            f"data dimension {data.p} does not match sigma dimension {spd.dim}"
        )
    ll, _, _ = _batched_log_likelihood(spd, data.observations, q_floor)
    return ll


def sample_covariance(data: MvslSample) -> np.ndarray:
    """Mean-centered sample covariance with 1/(N-1) normalization."""
    if data.n < 2:
        raise InsufficientDataError(
            f"sample covariance needs N >= 2 observations, got {data.n}"
        )
    y = data.observations
    centered = y - y.mean(axis=0)
    return centered.T @ centered / (data.n - 1)


def moment_estimator(data: MvslSample) -> SpdMatrix:
    """Mean-centered covariance estimator of Sigma (the competing estimator).

    Valid because Cov Y = E[W] Sigma = Sigma under the representation.
    Raises NotPositiveDefiniteError when the sample covariance is rank
    deficient (guaranteed for N <= p).
    """
    return cholesky(sample_covariance(data), "moment estimate")


def _refine_fixed_point(current, y, q, ratio, q_floor):
    """Iterate the EM map from a converged iterate until the step vanishes."""
    n = y.shape[0]
    prev_step = math.inf
    for _ in range(_REFINE_CAP):
        v = np.sqrt(2.0 / q) * ratio
        scatter = (y.T * v) @ y / n
        scatter = 0.5 * (scatter + scatter.T)
        try:
            nxt = _factor_symmetric(scatter, "refinement update")
            step = float(
                np.linalg.norm(nxt.matrix - current.matrix)
                / np.linalg.norm(nxt.matrix)
            )
            current = nxt
            _, q, ratio = _batched_log_likelihood(current, y, q_floor)
        except (NotPositiveDefiniteError, NonFiniteError):
            break
        if step <= _REFINE_STEP_TOL or (step >= prev_step and step < 1e-8):
            break
        prev_step = step
    return current, q, ratio


def em_fit(
    data: MvslSample,
    config: EmConfig | None = None,
    initial=None,
) -> EmReport:
    """Maximum-likelihood estimate of Sigma by EM.

    Starting from ``initial`` (default: the uncentered scatter
    (1/N) sum Y_i Y_i'), each iteration computes the conditional
    expectations v_i at the current estimate and updates
    Sigma = (1/N) sum v_i Y_i Y_i', stopping when the log-likelihood
    increase falls below ``config.epsilon``.

    Returns an :class:`EmReport` whose estimate is an SpdMatrix.
    """
    cfg = config or EmConfig()
    y = data.observations
    n, p = data.n, data.p
    require_existence(n, p)
    if initial is None:
        scatter = y.T @ y / n
        try:
            current = cholesky(scatter, "initial scatter")
        except NotPositiveDefiniteError as exc:
            raise SingularInitialError(
                "default initial scatter (1/N) sum Y Y' is not positive definite"
            ) from exc
    else:
        current = as_spd(initial, "initial")
        if current.dim != p:
            raise DimensionMismatchError(
                f"initial has dimension {current.dim}, expected {p}"
            )

    trace = np.empty(cfg.max_iterations + 1)
    ll, q, ratio = _batched_log_likelihood(current, y, cfg.q_floor)
    trace[0] = ll
    converged = False
    iterations = 0
    for k in range(1, cfg.max_iterations + 1):
        v = np.sqrt(2.0 / q) * ratio
        scatter = (y.T * v) @ y / n
        scatter = 0.5 * (scatter + scatter.T)
        try:
            current = _factor_symmetric(scatter, "EM update")
        except NotPositiveDefiniteError as exc:
            raise NonFiniteError(
                f"weighted scatter update became singular at iteration {k}"
            ) from exc
        ll_new, q, ratio = _batched_log_likelihood(current, y, cfg.q_floor)
        trace[k] = ll_new
        iterations = k
        if ll_new - ll < cfg.epsilon:
            converged = True
            ll = ll_new
            break
        ll = ll_new

    if converged:
        current, q, ratio = _refine_fixed_point(current, y, q, ratio, cfg.q_floor)

    final_trace = trace[: iterations + 1].copy()
    final_trace.flags.writeable = False
    return EmReport(
        estimate=current,
        iterations=iterations,
        final_log_likelihood=float(final_trace[-1]),
        trace=final_trace,
        converged=converged,
    )
