"""Monte Carlo study harness: case registry, replication engine, metrics.

Ten built-in cases cover the study grid: six multivariate scale matrices
(diagonal, block diagonal, and full structures at p = 6 and p = 10) and
four matrix-variate pairs at p = 5, q = 3.  A plan binds a case to sample
sizes, a replication count, estimator choices, and a master seed; the
runner draws each replication from a counter-derived seed stream so that
results are independent of execution order and thread count.

Per replication the chosen estimators are fit and the estimate recorded
(for matrix-variate cases, the identified Kronecker product).  Aggregates
per (case, N, estimator) are the empirical bias, the mean Euclidean
distance, their norm-relative versions, the mean EM iteration count, and
the number of failed replications.
"""

from __future__ import annotations

import csv
import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import matsl, mvsl
from .errors import (
    EmptyInputError,
    LaplaceMleError,
    MatrixFormatError,
    PlanValidationError,
)
from .io import read_matrix
from .linalg import SpdMatrix, as_spd, cholesky, frobenius_norm, kronecker
from .mvsl import EmConfig

MVSL_SAMPLE_SIZES = (10, 20, 30, 50, 70, 100, 150, 200)
MATSL_SAMPLE_SIZES = (5, 10, 15, 20, 30, 50, 100)
DEFAULT_RUNS = 200
ESTIMATOR_NAMES = ("em", "moment")

CSV_COLUMNS = (
    "case",
    "kind",
    "n",
    "runs",
    "estimator",
    "empirical_bias",
    "relative_empirical_bias",
    "mean_euclidean_distance",
    "relative_mean_euclidean_distance",
    "mean_iterations",
    "failure_count",
)


@dataclass(frozen=True)
class CaseSpec:
    """A named true-parameter configuration for the study.

    Multivariate cases carry ``sigma``; matrix-variate cases carry
    ``sigma1`` and ``sigma2``.  The identified quantity used by all
    metrics is ``truth``: Sigma itself, or the Kronecker product
    Sigma2 (x) Sigma1.
    """

    name: str
    kind: str  # "mvsl" | "matsl"
    sigma: SpdMatrix | None = None
    sigma1: SpdMatrix | None = None
    sigma2: SpdMatrix | None = None
    source: str = "builtin"

    def __post_init__(self):
        if self.kind not in ("mvsl", "matsl"):
            raise PlanValidationError(f"unknown case kind {self.kind!r}")
        if self.kind == "mvsl" and self.sigma is None:
            raise PlanValidationError(f"case {self.name!r}: mvsl case needs sigma")
        if self.kind == "matsl" and (self.sigma1 is None or self.sigma2 is None):
            raise PlanValidationError(
                f"case {self.name!r}: matsl case needs sigma1 and sigma2"
            )

    @property
    def truth(self) -> np.ndarray:
        if self.kind == "mvsl":
            return self.sigma.matrix
        return kronecker(self.sigma2.matrix, self.sigma1.matrix)

    @property
    def truth_norm(self) -> float:
        return frobenius_norm(self.truth)

    @property
    def default_sample_sizes(self) -> tuple[int, ...]:
        return MVSL_SAMPLE_SIZES if self.kind == "mvsl" else MATSL_SAMPLE_SIZES

    @property
    def default_estimators(self) -> tuple[str, ...]:
        return ("em", "moment") if self.kind == "mvsl" else ("em",)

    def minimum_sample_size(self) -> int:
        if self.kind == "mvsl":
            return self.sigma.dim
        p, q = self.sigma1.dim, self.sigma2.dim
        need = 1
        while need * q < p or need * p < q:
            need += 1
        return need


def _diag(values) -> SpdMatrix:
    return cholesky(np.diag(np.asarray(values, dtype=np.float64)))


def _full(rows) -> SpdMatrix:
    return cholesky(np.array(rows, dtype=np.float64))


_MVSL_BLOCK_P6 = _full(
    [
        [3.0, 1.5, 1.0, 0.0, 0.0, 0.0],
        [1.5, 2.0, 0.5, 0.0, 0.0, 0.0],
        [1.0, 0.5, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 4.0, 1.0, 2.0],
        [0.0, 0.0, 0.0, 1.0, 5.0, 3.0],
        [0.0, 0.0, 0.0, 2.0, 3.0, 6.0],
    ]
)

_MVSL_FULL_P6 = _full(
    [
        [20.0, 3.0, 2.0, 1.0, 4.0, 5.0],
        [3.0, 25.0, 6.0, 2.0, 3.0, 1.0],
        [2.0, 6.0, 30.0, 7.0, 5.0, 4.0],
        [1.0, 2.0, 7.0, 35.0, 6.0, 3.0],
        [4.0, 3.0, 5.0, 6.0, 40.0, 8.0],
        [5.0, 1.0, 4.0, 3.0, 8.0, 45.0],
    ]
)

_MVSL_BLOCK_P10 = _full(
    [
        [5.0, 3.0, 2.5, 2.0, 1.5, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0, 4.0, 2.0, 1.5, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [2.5, 2.0, 3.0, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
        [2.0, 1.5, 1.0, 2.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1.5, 1.0, 0.5, 0.2, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 6.0, 2.0, 1.0, 0.5, 1.5],
        [0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 5.0, 1.2, 0.8, 1.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.2, 4.0, 1.0, 0.6],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.8, 1.0, 3.5, 0.9],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.5, 1.0, 0.6, 0.9, 4.0],
    ]
)

_MVSL_FULL_P10 = _full(
    [
        [10.0, 2.0, 1.0, 0.5, 1.0, 1.5, 0.8, 1.2, 0.9, 0.7],
        [2.0, 9.0, 1.5, 0.7, 1.1, 1.3, 0.6, 1.0, 0.8, 0.5],
        [1.0, 1.5, 8.0, 1.2, 0.9, 0.7, 1.0, 1.1, 0.6, 0.4],
        [0.5, 0.7, 1.2, 7.0, 1.3, 0.9, 1.1, 0.5, 0.4, 0.6],
        [1.0, 1.1, 0.9, 1.3, 9.0, 1.2, 1.4, 0.8, 1.0, 0.7],
        [1.5, 1.3, 0.7, 0.9, 1.2, 10.0, 0.9, 1.1, 0.6, 0.8],
        [0.8, 0.6, 1.0, 1.1, 1.4, 0.9, 8.0, 1.3, 1.2, 0.5],
        [1.2, 1.0, 1.1, 0.5, 0.8, 1.1, 1.3, 9.0, 1.0, 0.6],
        [0.9, 0.8, 0.6, 0.4, 1.0, 0.6, 1.2, 1.0, 8.0, 0.7],
        [0.7, 0.5, 0.4, 0.6, 0.7, 0.8, 0.5, 0.6, 0.7, 7.0],
    ]
)

_MATSL_DIAG_P5 = _diag([1.0, 0.5, 2.0, 3.0, 0.65])

_MATSL_FULL_P5 = _full(
    [
        [5.0, 3.0, 2.5, 2.0, 1.5],
        [3.0, 4.0, 2.0, 1.5, 1.0],
        [2.5, 2.0, 3.0, 1.0, 0.5],
        [2.0, 1.5, 1.0, 2.0, 0.2],
        [1.5, 1.0, 0.5, 0.2, 1.0],
    ]
)

_MATSL_DIAG_Q3 = _diag([3.0, 2.0, 1.0])

_MATSL_NONDIAG_Q3 = _full(
    [
        [3.0, 1.5, 1.0],
        [1.5, 2.0, 0.0],
        [1.0, 0.0, 1.0],
    ]
)

_MATSL_FULL_Q3 = _full(
    [
        [4.0, 1.0, 2.0],
        [1.0, 5.0, 3.0],
        [2.0, 3.0, 6.0],
    ]
)

BUILTIN_CASES: Mapping[str, CaseSpec] = {
    case.name: case
    for case in (
        CaseSpec("mvsl-case1", "mvsl", sigma=_diag([5.0, 4.0, 3.5, 3.0, 2.0, 1.0])),
        CaseSpec("mvsl-case2", "mvsl", sigma=_MVSL_BLOCK_P6),
        CaseSpec("mvsl-case3", "mvsl", sigma=_MVSL_FULL_P6),
        CaseSpec(
            "mvsl-case4",
            "mvsl",
            sigma=_diag([6.0, 5.5, 5.0, 4.0, 3.5, 3.0, 2.5, 2.0, 1.5, 1.0]),
        ),
        CaseSpec("mvsl-case5", "mvsl", sigma=_MVSL_BLOCK_P10),
        CaseSpec("mvsl-case6", "mvsl", sigma=_MVSL_FULL_P10),
        CaseSpec("matsl-case1", "matsl", sigma1=_MATSL_DIAG_P5, sigma2=_MATSL_DIAG_Q3),
        CaseSpec(
            "matsl-case2", "matsl", sigma1=_MATSL_DIAG_P5, sigma2=_MATSL_NONDIAG_Q3
        ),
        CaseSpec("matsl-case3", "matsl", sigma1=_MATSL_FULL_P5, sigma2=_MATSL_DIAG_Q3),
        CaseSpec("matsl-case4", "matsl", sigma1=_MATSL_FULL_P5, sigma2=_MATSL_FULL_Q3),
    )
}


def builtin_case(name: str) -> CaseSpec:
    try:
        return BUILTIN_CASES[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_CASES))
        raise PlanValidationError(
            f"unknown case {name!r}; built-in cases are: {known}"
        ) from None


@dataclass(frozen=True)
class SimulationPlan:
    """A complete, validated description of one study run."""

    case: CaseSpec
    sample_sizes: tuple[int, ...]
    runs: int = DEFAULT_RUNS
    master_seed: int = 0
    em_config: EmConfig = EmConfig()
    estimators: tuple[str, ...] = ("em",)
    allow_undersized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.runs < 1:
            raise PlanValidationError(f"runs must be >= 1, got {self.runs}")
        if not self.sample_sizes:
            raise PlanValidationError("sample_sizes must be non-empty")
        if any(n < 1 for n in self.sample_sizes):
            raise PlanValidationError("sample sizes must be positive")
        if not self.estimators:
            raise PlanValidationError("estimators must be non-empty")
        for est in self.estimators:
            if est not in ESTIMATOR_NAMES:
                raise PlanValidationError(
                    f"unknown estimator {est!r}; choose from {ESTIMATOR_NAMES}"
                )
        if self.case.kind == "matsl" and "moment" in self.estimators:
            raise PlanValidationError(
                "the moment estimator is defined for multivariate cases only"
            )
        if not self.allow_undersized:
            need = self.case.minimum_sample_size()
            bad = [n for n in self.sample_sizes if n < need]
            if bad:
                raise PlanValidationError(
                    f"sample sizes {bad} are below the MLE existence minimum "
                    f"{need} for case {self.case.name!r} "
                    f"(set allow_undersized to exercise failure paths)"
                )


def default_plan(case_name: str, **overrides) -> SimulationPlan:
    """The study protocol for a built-in case: its N grid, s = 200, EM defaults."""
    case = builtin_case(case_name)
    base = dict(
        case=case,
        sample_sizes=case.default_sample_sizes,
        runs=DEFAULT_RUNS,
        estimators=case.default_estimators,
    )
    base.update(overrides)
    return SimulationPlan(**base)


@dataclass(frozen=True)
class EstimatorMetrics:
    """Aggregates for one estimator at one (case, N)."""

    empirical_bias: float
    relative_empirical_bias: float
    mean_euclidean_distance: float
    relative_mean_euclidean_distance: float
    mean_iterations: float | None
    failure_count: int


@dataclass(frozen=True)
class SimulationResult:
    """Aggregates for one (case, N), keyed by estimator name."""

    case_name: str
    kind: str
    n: int
    runs: int
    metrics: Mapping[str, EstimatorMetrics]

    def __post_init__(self):
        object.__setattr__(self, "metrics", dict(self.metrics))

    def __eq__(self, other):
        if not isinstance(other, SimulationResult):
            return NotImplemented
        return (
            self.case_name == other.case_name
            and self.kind == other.kind
            and self.n == other.n
            and self.runs == other.runs
            and self.metrics == other.metrics
        )


def empirical_bias(estimates, truth) -> float:
    """Frobenius norm of (entrywise mean of estimates - truth)."""
    estimates = list(estimates)
    if not estimates:
        raise EmptyInputError("empirical_bias needs at least one estimate")
    truth = np.asarray(truth, dtype=np.float64)
    mean = np.mean(np.stack([np.asarray(e, dtype=np.float64) for e in estimates]), axis=0)
    if mean.shape != truth.shape:
        raise EmptyInputError(
            f"estimate shape {mean.shape} does not match truth {truth.shape}"
        )
    return frobenius_norm(mean - truth)


def mean_euclidean_distance(estimates, truth) -> float:
    """Mean over estimates of the Frobenius distance to truth."""
    estimates = list(estimates)
    if not estimates:
        raise EmptyInputError("mean_euclidean_distance needs at least one estimate")
    truth = np.asarray(truth, dtype=np.float64)
    return float(
        np.mean([frobenius_norm(np.asarray(e, dtype=np.float64) - truth) for e in estimates])
    )


def replication_seed(master_seed: int, case_name: str, n: int, r: int) -> int:
    """Deterministic 64-bit seed for replication r of (case, N).

    Counter-style derivation: the entropy tuple (master seed, CRC32 of the
    case name, N, r) feeds a SeedSequence, so any subset of replications
    can be drawn in any order with identical results.
    """
    case_key = zlib.crc32(case_name.encode("utf-8"))
    ss = np.random.SeedSequence([int(master_seed), case_key, int(n), int(r)])
    return int(ss.generate_state(1, np.uint64)[0])


def _run_replication(plan: SimulationPlan, n: int, r: int) -> dict:
    """Fit every selected estimator on one fresh dataset.

    Returns estimator -> (estimate matrix, iteration count or None), with
    failures recorded as None entries.
    """
    case = plan.case
    seed = replication_seed(plan.master_seed, case.name, n, r)
    out: dict[str, tuple[np.ndarray, float | None] | None] = {}
    if case.kind == "mvsl":
        data = mvsl.sample(case.sigma, n, seed)
        for est in plan.estimators:
            try:
                if est == "em":
                    report = mvsl.em_fit(data, plan.em_config)
                    out[est] = (report.estimate.matrix, float(report.iterations))
                else:
                    out[est] = (mvsl.sample_covariance(data), None)
            except LaplaceMleError:
                out[est] = None
    else:
        data = matsl.sample(case.sigma1, case.sigma2, n, seed)
        for est in plan.estimators:
            try:
                report, kron_est = matsl.em_fit(data, plan.em_config)
                out[est] = (kron_est.kron, float(report.iterations))
            except LaplaceMleError:
                out[est] = None
    return out


def _aggregate(
    plan: SimulationPlan, n: int, outcomes: list[dict]
) -> SimulationResult:
    truth = plan.case.truth
    norm = plan.case.truth_norm
    metrics: dict[str, EstimatorMetrics] = {}
    for est in plan.estimators:
        estimates = []
        iteration_counts = []
        failures = 0
        for outcome in outcomes:
            got = outcome[est]
            if got is None:
                failures += 1
                continue
            estimate, iterations = got
            estimates.append(estimate)
            if iterations is not None:
                iteration_counts.append(iterations)
        if estimates:
            bias = empirical_bias(estimates, truth)
            dist = mean_euclidean_distance(estimates, truth)
        else:
            bias = float("nan")
            dist = float("nan")
        metrics[est] = EstimatorMetrics(
            empirical_bias=bias,
            relative_empirical_bias=bias / norm,
            mean_euclidean_distance=dist,
            relative_mean_euclidean_distance=dist / norm,
            mean_iterations=(
                float(np.mean(iteration_counts)) if iteration_counts else None
            ),
            failure_count=failures,
        )
    return SimulationResult(
        case_name=plan.case.name,
        kind=plan.case.kind,
        n=n,
        runs=plan.runs,
        metrics=metrics,
    )


def run_plan(
    plan: SimulationPlan,
    threads: int = 1,
    progress: Callable[[str], None] | None = None,
) -> list[SimulationResult]:
    """Execute every replication of the plan and aggregate per sample size.

    Replications are independent; with ``threads > 1`` they run on a
    thread pool, and because each replication owns a counter-derived seed
    and aggregation is by replication index, results are identical for
    any thread count.  Fit failures increment ``failure_count`` rather
    than aborting the run.
    """
    results = []
    for n in plan.sample_sizes:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(
                    pool.map(lambda r: _run_replication(plan, n, r), range(plan.runs))
                )
        else:
            outcomes = [_run_replication(plan, n, r) for r in range(plan.runs)]
        results.append(_aggregate(plan, n, outcomes))
        if progress is not None:
            progress(f"{plan.case.name} N={n}: {plan.runs}/{plan.runs} replications")
    return results


def _format_float(value: float) -> str:
    return repr(float(value))


def emit_csv(results: list[SimulationResult], path) -> None:
    """Write one row per (case, N, estimator), full precision, fixed columns."""
    if not results:
        raise EmptyInputError("emit_csv needs at least one result")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for res in results:
            for est, met in res.metrics.items():
                writer.writerow(
                    [
                        res.case_name,
                        res.kind,
                        res.n,
                        res.runs,
                        est,
                        _format_float(met.empirical_bias),
                        _format_float(met.relative_empirical_bias),
                        _format_float(met.mean_euclidean_distance),
                        _format_float(met.relative_mean_euclidean_distance),
                        "" if met.mean_iterations is None else _format_float(met.mean_iterations),
                        met.failure_count,
                    ]
                )


def read_csv(path) -> list[SimulationResult]:
    """Parse a results CSV back into SimulationResult values (round-trip)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CSV_COLUMNS):
            raise MatrixFormatError(f"unexpected CSV header: {header!r}")
        grouped: dict[tuple, dict[str, EstimatorMetrics]] = {}
        order: list[tuple] = []
        for row in reader:
            case_name, kind, n, runs, est = row[0], row[1], int(row[2]), int(row[3]), row[4]
            key = (case_name, kind, n, runs)
            if key not in grouped:
                grouped[key] = {}
                order.append(key)
            grouped[key][est] = EstimatorMetrics(
                empirical_bias=float(row[5]),
                relative_empirical_bias=float(row[6]),
                mean_euclidean_distance=float(row[7]),
                relative_mean_euclidean_distance=float(row[8]),
                mean_iterations=None if row[9] == "" else float(row[9]),
                failure_count=int(row[10]),
            )
    return [
        SimulationResult(case_name=k[0], kind=k[1], n=k[2], runs=k[3], metrics=grouped[k])
        for k in order
    ]


def case_from_files(
    kind: str,
    name: str,
    sigma_path=None,
    sigma1_path=None,
    sigma2_path=None,
) -> CaseSpec:
    """Build a user-supplied case from matrix text files."""
    if kind == "mvsl":
        if sigma_path is None:
            raise PlanValidationError("mvsl case requires a sigma file")
        return CaseSpec(
            name, "mvsl", sigma=as_spd(read_matrix(sigma_path), "sigma"), source="user-file"
        )
    if kind == "matsl":
        if sigma1_path is None or sigma2_path is None:
            raise PlanValidationError("matsl case requires sigma1 and sigma2 files")
        return CaseSpec(
            name,
            "matsl",
            sigma1=as_spd(read_matrix(sigma1_path), "sigma1"),
            sigma2=as_spd(read_matrix(sigma2_path), "sigma2"),
            source="user-file",
        )
    raise PlanValidationError(f"unknown case kind {kind!r}")


def load_plan(path, master_seed_fallback: int | None = None) -> SimulationPlan:
    """Read a plan from a JSON key-value file.

    Recognized keys: ``case`` (built-in name) or ``kind`` with
    ``sigma``/``sigma1``/``sigma2`` file paths and optional ``name``;
    ``sample_sizes``, ``runs``, ``master_seed``, ``epsilon``,
    ``max_iterations``, ``q_floor``, ``estimators``, ``allow_undersized``.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise PlanValidationError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise PlanValidationError(f"{path}: plan must be a JSON object")
    known = {
        "case",
        "kind",
        "name",
        "sigma",
        "sigma1",
        "sigma2",
        "sample_sizes",
        "runs",
        "master_seed",
        "epsilon",
        "max_iterations",
        "q_floor",
        "estimators",
        "allow_undersized",
    }
    unknown = set(raw) - known
    if unknown:
        raise PlanValidationError(f"{path}: unknown plan keys {sorted(unknown)}")

    if "case" in raw:
        case = builtin_case(raw["case"])
    elif "kind" in raw:
        case = case_from_files(
            raw["kind"],
            raw.get("name", "user-case"),
            sigma_path=raw.get("sigma"),
            sigma1_path=raw.get("sigma1"),
            sigma2_path=raw.get("sigma2"),
        )
    else:
        raise PlanValidationError(f"{path}: plan needs 'case' or 'kind'")

    em_config = EmConfig(
        epsilon=float(raw.get("epsilon", EmConfig().epsilon)),
        max_iterations=int(raw.get("max_iterations", EmConfig().max_iterations)),
        q_floor=float(raw.get("q_floor", EmConfig().q_floor)),
    )
    master_seed = raw.get("master_seed", master_seed_fallback)
    if master_seed is None:
        master_seed = 0
    return SimulationPlan(
        case=case,
        sample_sizes=tuple(raw.get("sample_sizes", case.default_sample_sizes)),
        runs=int(raw.get("runs", DEFAULT_RUNS)),
        master_seed=int(master_seed),
        em_config=em_config,
        estimators=tuple(raw.get("estimators", case.default_estimators)),
        allow_undersized=bool(raw.get("allow_undersized", False)),
    )
