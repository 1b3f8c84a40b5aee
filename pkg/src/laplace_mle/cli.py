"""Command-line front end: sampling, density evaluation, fitting, studies.

Exit codes: 0 success, 1 validation error (bad flags, malformed or non-SPD
inputs, existence violations, invalid plans), 2 numerical failure during a
fit, 3 I/O failure.  Every error path prints a single machine-parseable
line ``error: ...`` to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import bessel, io, matsl, mvsl, simstudy
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
from .linalg import as_spd
from .mvsl import EmConfig

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

_VALIDATION_ERRORS = (
    NotSymmetricError,
    NotPositiveDefiniteError,
    DimensionMismatchError,
    DimensionOverflowError,
    ExistenceViolationError,
    InsufficientDataError,
    EmptyInputError,
    MatrixFormatError,
    PlanValidationError,
    NonPositiveArgumentError,
    ValueError,
)

_NUMERICAL_ERRORS = (NonFiniteError, SingularInitialError, Underflow)

MASTER_SEED_ENV = "LAPLACE_MLE_SEED"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors map to exit code 1."""

    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="laplace-mle",
        description=(
            "Multivariate and matrix-variate symmetric Laplace distributions: "
            "sampling, density evaluation, EM fitting, and simulation studies."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    sp = sub.add_parser("sample", help="draw a dataset from a distribution")
    sp.add_argument("--dist", choices=("mvsl", "matsl"), required=True,
                    help="distribution family")
    sp.add_argument("--sigma", help="scale matrix file (mvsl)")
    sp.add_argument("--sigma1", help="row-scale matrix file (matsl)")
    sp.add_argument("--sigma2", help="column-scale matrix file (matsl)")
    sp.add_argument("--n", type=int, required=True, help="number of observations")
    sp.add_argument("--seed", type=int, default=None,
                    help=f"RNG seed (default: ${MASTER_SEED_ENV} or 0)")
    sp.add_argument("--out", required=True, help="output dataset path")

    dp = sub.add_parser("density", help="evaluate log-densities of a dataset")
    dp.add_argument("--dist", choices=("mvsl", "matsl"), required=True)
    dp.add_argument("--sigma", help="scale matrix file (mvsl)")
    dp.add_argument("--sigma1", help="row-scale matrix file (matsl)")
    dp.add_argument("--sigma2", help="column-scale matrix file (matsl)")
    dp.add_argument("--data", required=True, help="dataset path")
    dp.add_argument("--out", help="write values here instead of stdout")

    fm = sub.add_parser("fit-mvsl", help="EM fit of the multivariate scale matrix")
    fm.add_argument("--data", required=True, help="N-by-p dataset path")
    fm.add_argument("--epsilon", type=float, default=EmConfig().epsilon,
                    help="log-likelihood stopping threshold (default 1e-11)")
    fm.add_argument("--max-iters", type=int, default=EmConfig().max_iterations,
                    help="iteration cap (default 5000)")
    fm.add_argument("--initial", help="optional initial scale matrix file")
    fm.add_argument("--out", required=True, help="report output path")

    ft = sub.add_parser("fit-matsl", help="flip-flop EM fit of the Kronecker pair")
    ft.add_argument("--data", required=True, help="matrix dataset path (header N p q)")
    ft.add_argument("--epsilon", type=float, default=EmConfig().epsilon,
                    help="log-likelihood stopping threshold (default 1e-11)")
    ft.add_argument("--max-iters", type=int, default=EmConfig().max_iterations,
                    help="iteration cap (default 5000)")
    ft.add_argument("--initial1", help="optional initial row-scale matrix file")
    ft.add_argument("--initial2", help="optional initial column-scale matrix file")
    ft.add_argument("--out", required=True, help="report output path")

    sm = sub.add_parser("simulate", help="run a Monte Carlo study and emit CSV")
    group = sm.add_mutually_exclusive_group(required=True)
    group.add_argument("--case", help="built-in case name (e.g. matsl-case1)")
    group.add_argument("--plan", help="JSON plan file")
    sm.add_argument("--out", required=True, help="CSV output path")
    sm.add_argument("--threads", type=int, default=1,
                    help="worker threads (affects wall time only, never content)")
    sm.add_argument("--seed", type=int, default=None,
                    help=f"master seed (default: plan value, ${MASTER_SEED_ENV}, or 0)")
    sm.add_argument("--runs", type=int, default=None,
                    help="replications per sample size (default: plan value or 200)")
    sm.add_argument("--epsilon", type=float, default=None,
                    help="EM stopping threshold override")

    # test-harness helper; no help string keeps it out of the command list
    be = sub.add_parser("bessel-eval")
    be.add_argument("--two-nu", type=int, required=True, help="twice the order")
    be.add_argument("--x", type=float, required=True, help="positive argument")
    be.add_argument("--fn", choices=("value", "log", "ratio"), default="value")
    return parser


def _env_seed() -> int:
    raw = os.environ.get(MASTER_SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise PlanValidationError(
            f"environment variable {MASTER_SEED_ENV}={raw!r} is not an integer"
        ) from None


def _load_spd(path, name):
    return as_spd(io.read_matrix(path), name)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise _UsageError(message)


def _cmd_sample(args) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    _require(args.n >= 1, "--n must be >= 1")
    if args.dist == "mvsl":
        _require(args.sigma is not None, "--dist mvsl requires --sigma")
        spd = _load_spd(args.sigma, "sigma")
        data = mvsl.sample(spd, args.n, seed)
        io.write_vector_dataset(args.out, data)
        print(f"wrote {data.n} observations (p={data.p}, seed={seed}) to {args.out}")
    else:
        _require(
            args.sigma1 is not None and args.sigma2 is not None,
            "--dist matsl requires --sigma1 and --sigma2",
        )
        s1 = _load_spd(args.sigma1, "sigma1")
        s2 = _load_spd(args.sigma2, "sigma2")
        data = matsl.sample(s1, s2, args.n, seed)
        io.write_matrix_dataset(args.out, data)
        print(
            f"wrote {data.n} observations (p={data.p}, q={data.q}, seed={seed}) "
            f"to {args.out}"
        )
    return EXIT_OK


def _cmd_density(args) -> int:
    if args.dist == "mvsl":
        _require(args.sigma is not None, "--dist mvsl requires --sigma")
        m = mvsl.model(_load_spd(args.sigma, "sigma"))
        data = io.read_vector_dataset(args.data)
        values = [mvsl.log_pdf(m, y) for y in data.observations]
    else:
        _require(
            args.sigma1 is not None and args.sigma2 is not None,
            "--dist matsl requires --sigma1 and --sigma2",
        )
        m = matsl.model(
            _load_spd(args.sigma1, "sigma1"), _load_spd(args.sigma2, "sigma2")
        )
        data = io.read_matrix_dataset(args.data)
        values = [matsl.log_pdf(m, x) for x in data.observations]
    lines = "\n".join(repr(v) for v in values) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(lines)
        print(f"wrote {len(values)} log-density values to {args.out}")
    else:
        sys.stdout.write(lines)
    return EXIT_OK


def _format_report_common(report) -> list[str]:
    return [
        f"# iterations: {report.iterations}",
        f"# converged: {str(report.converged).lower()}",
        f"# final_log_likelihood: {report.final_log_likelihood!r}",
    ]


def _cmd_fit_mvsl(args) -> int:
    data = io.read_vector_dataset(args.data)
    config = EmConfig(epsilon=args.epsilon, max_iterations=args.max_iters)
    initial = _load_spd(args.initial, "initial") if args.initial else None
    report = mvsl.em_fit(data, config, initial=initial)
    lines = _format_report_common(report)
    lines.append(f"# sigma ({data.p} x {data.p}):")
    body = io.format_matrix(report.estimate.matrix)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n" + body)
    status = "converged" if report.converged else "did not converge"
    print(
        f"{status} after {report.iterations} iterations, "
        f"log-likelihood {report.final_log_likelihood!r}; report: {args.out}"
    )
    return EXIT_OK


def _cmd_fit_matsl(args) -> int:
    data = io.read_matrix_dataset(args.data)
    config = EmConfig(epsilon=args.epsilon, max_iterations=args.max_iters)
    _require(
        (args.initial1 is None) == (args.initial2 is None),
        "provide both --initial1 and --initial2, or neither",
    )
    initial1 = _load_spd(args.initial1, "initial1") if args.initial1 else None
    initial2 = _load_spd(args.initial2, "initial2") if args.initial2 else None
    report, estimate = matsl.em_fit(data, config, initial1=initial1, initial2=initial2)
    lines = _format_report_common(report)
    lines.append(f"# normalization_scale: {estimate.scale!r}")
    sections = [
        (f"sigma1 ({data.p} x {data.p})", estimate.sigma1_hat.matrix),
        (f"sigma2 ({data.q} x {data.q})", estimate.sigma2_hat.matrix),
        (f"kronecker ({data.p * data.q} x {data.p * data.q})", estimate.kron),
    ]
    parts = ["\n".join(lines)]
    for title, matrix in sections:
        parts.append(f"# {title}:")
        parts.append(io.format_matrix(matrix).rstrip("\n"))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
    status = "converged" if report.converged else "did not converge"
    print(
        f"{status} after {report.iterations} iterations, "
        f"log-likelihood {report.final_log_likelihood!r}; report: {args.out}"
    )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    _require(args.threads >= 1, "--threads must be >= 1")
    if args.plan:
        plan = simstudy.load_plan(args.plan, master_seed_fallback=_env_seed())
    else:
        plan = simstudy.default_plan(
            args.case, master_seed=args.seed if args.seed is not None else _env_seed()
        )
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.epsilon is not None:
        overrides["em_config"] = EmConfig(
            epsilon=args.epsilon,
            max_iterations=plan.em_config.max_iterations,
            q_floor=plan.em_config.q_floor,
        )
    if overrides:
        plan = replace(plan, **overrides)
    results = simstudy.run_plan(
        plan, threads=args.threads, progress=lambda msg: print(msg, file=sys.stderr)
    )
    simstudy.emit_csv(results, args.out)
    print(f"wrote {sum(len(r.metrics) for r in results)} result rows to {args.out}")
    return EXIT_OK


def _cmd_bessel_eval(args) -> int:
    nu = args.two_nu / 2.0
    if args.fn == "value":
        value = bessel.bessel_k(nu, args.x)
    elif args.fn == "log":
        value = bessel.bessel_k_log(nu, args.x)
    else:
        value = bessel.bessel_k_ratio(nu, args.x)
    print(repr(value))
    return EXIT_OK


_COMMANDS = {
    "sample": _cmd_sample,
    "density": _cmd_density,
    "fit-mvsl": _cmd_fit_mvsl,
    "fit-matsl": _cmd_fit_matsl,
    "simulate": _cmd_simulate,
    "bessel-eval": _cmd_bessel_eval,
}


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except _NUMERICAL_ERRORS as exc:
        return _fail(str(exc), EXIT_NUMERICAL)
    except _VALIDATION_ERRORS as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    except LaplaceMleError as exc:
        return _fail(str(exc), EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())
