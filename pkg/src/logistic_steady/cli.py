"""
Command line

    logistic-steady solve --config configs/main_n3.json --variant main --mu 0
    logistic-steady sweep --config configs/main_n3.json --mu-max 0.5 --steps 16
    logistic-steady eigen --config configs/unit_ball_eigen.json

Exit codes: 0 all certificates pass, 1 a certificate failed, 2 configuration
error, 3 hypothesis failure, 4 non-convergence.
"""

import argparse
import asyncio
import csv
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from . import __version__
from .config import (
    LambdaMode,
    RunConfig,
    Settings,
    Variant,
    apply_overrides,
    build_problem,
    load_config,
    load_settings,
)
from .errors import ConfigError, ConvergenceError, LogisticSteadyError
from .functionals import write_trace_csv
from .grid import DomainKind, RadialGrid
from .oracles import ExactExample, bounded_exact_example, build_exact_example, export_oracle_csv, verify_oracle
from .pipeline import (
    PipelineResult,
    audit_solution,
    bisect_threshold,
    compute_window,
    json_float,
    resolve_lambda,
    run_related,
    solve_bounded,
    solve_fast_growth,
    solve_main,
)
from .problem import ProblemSpec, derive_constants
from .spectral import DomainTag, extrapolated_eigen

logger = logging.getLogger("LogisticSteadyLogger")

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"


def configure_logging(log_dir: Optional[Path], level: str = "INFO") -> None:
    """File log in ``log_dir`` (overwritten per run) plus warnings on stderr"""
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        path = (log_dir / "logistic_steady.log").resolve()
        if not any(isinstance(h, logging.FileHandler) and Path(h.baseFilename) == path for h in logger.handlers):
            handler = logging.FileHandler(path, mode="w")
            handler.setLevel(logging.DEBUG)
            handler.setFormatter(logging.Formatter(LOG_FORMAT))
            logger.addHandler(handler)
    if not any(type(h) is logging.StreamHandler for h in logger.handlers):
        stream = logging.StreamHandler(sys.stderr)
        stream.setLevel(logging.WARNING)
        stream.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(stream)


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def write_solution_csv(result: PipelineResult, path: Path) -> None:
    grid = result.solution.grid
    columns = {
        "r": grid.nodes,
        "u": result.solution.values,
        "ell_d": result.upper.values if result.upper is not None else np.full(grid.size, np.nan),
        "lower": result.lower.values if result.lower is not None else np.full(grid.size, np.nan),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(columns))
        for row in zip(*columns.values()):
            writer.writerow([f"{value:.17g}" for value in row])


class RunManifest(BaseModel):
    version: str
    command: str
    config: Dict[str, Any]
    input_hash: str
    seed: int
    constants: Optional[Dict[str, Any]] = None
    timings: Dict[str, float]
    certificates: List[Dict[str, Any]]
    outputs: Dict[str, str]


def write_manifest(
    out_dir: Path,
    command: str,
    config: RunConfig,
    settings: Settings,
    timings: Dict[str, float],
    outputs: Sequence[str],
    certificates: Optional[List[Dict[str, Any]]] = None,
    constants: Optional[Dict[str, Any]] = None,
) -> RunManifest:
    echo = config.echo()
    inventory = {name: sha256_text((out_dir / name).read_text(encoding="utf-8")) for name in outputs}
    manifest = RunManifest(
        version=__version__,
        command=command,
        config=echo,
        input_hash=sha256_text(canonical_json({"config": echo, "version": __version__, "seed": settings.seed})),
        seed=settings.seed,
        constants=constants,
        timings=timings,
        certificates=certificates or [],
        outputs=inventory,
    )
    _write_text(out_dir / "manifest.json", json.dumps(manifest.model_dump(), indent=2))
    return manifest


def grid_for(config: RunConfig) -> RadialGrid:
    try:
        return config.domain.build(config.dimension)
    except ValueError as e:
        raise ConfigError(f"Invalid domain: {e}")


def problem_for(config: RunConfig, grid: RadialGrid) -> ProblemSpec:
    """Build the problem and resolve lambda against the computed window"""
    problem = config.require_problem()
    lam_config = problem.lambda_config
    placeholder = lam_config.value if lam_config.value is not None else 1.0
    spec = build_problem(problem, config.domain, placeholder)
    if lam_config.mode == LambdaMode.NUMBER:
        return spec
    lam1, lamstar, _ = compute_window(spec, grid)
    lam = resolve_lambda(lam_config, lam1.value, lamstar.value)
    logger.info(f"Resolved lambda = {lam:.10g} ({lam_config.mode.value}) from lambda_1={lam1.value:.10g}")
    return spec.with_lambda(lam)


def runner_for(config: RunConfig, spec: ProblemSpec, grid: RadialGrid) -> Callable[[Optional[float]], PipelineResult]:
    """Per-mu pipeline call for the configured variant, sharing the immutable inputs"""
    solver = config.solver
    window = compute_window(spec, grid)[2]
    variant = config.variant
    if variant == Variant.MAIN:
        consts = derive_constants(spec.with_mu(0.0), grid) if window.inside else None
        return lambda mu: solve_main(spec, grid, mu, solver, consts=consts, window=window)
    if variant == Variant.RELATED:
        return lambda mu: run_related(spec, grid, mu, solver, window=window)
    if variant == Variant.FAST_GROWTH:
        return lambda mu: solve_fast_growth(spec, grid, mu, solver, window=window)
    if variant == Variant.BOUNDED:
        problem = config.require_problem()
        bump = config.bump
        return lambda mu: solve_bounded(
            spec,
            grid,
            mu,
            solver,
            bump=bump.spec(),
            inner_radius=bump.inner_radius,
            C1_bar=problem.C1_bar,
            window=window,
        )
    raise ValueError(f"Variant {variant.value} has no pipeline")


def _oracle_example(config: RunConfig) -> ExactExample:
    oracle = config.require_oracle()
    try:
        if oracle.bounded:
            return bounded_exact_example(oracle.mu, oracle.dimension, oracle.beta)
        return build_exact_example(oracle.dimension, oracle.beta, oracle.mu)
    except ValueError as e:
        raise ConfigError(str(e))


def cmd_verify(config: RunConfig, settings: Settings, out_dir: Path) -> int:
    started = time.perf_counter()
    example = _oracle_example(config)
    grid = grid_for(config)
    expected = DomainKind.BALL if example.bounded else DomainKind.WHOLE
    if grid.kind != expected or (example.bounded and grid.radius != 2.0):
        raise ConfigError(f"The oracle needs a {expected.value} grid{' of radius 2' if example.bounded else ''}")
    report = verify_oracle(example, grid)
    elapsed = time.perf_counter() - started
    _write_text(out_dir / "report.json", json.dumps(report.model_dump(), indent=2))
    export_oracle_csv(example, grid, out_dir / "solution.csv")
    write_manifest(
        out_dir,
        "solve",
        config,
        settings,
        {"verify": elapsed},
        ["report.json", "solution.csv"],
        certificates=[{"name": "oracle", "passed": report.passed}],
    )
    print(f"{'intervals':>10} {'weak residual':>14} {'refined':>12} {'order':>7} {'window rejected':>16}")
    print(
        f"{report.intervals:>10d} {report.weak_residual:>14.4e} {report.refined_residual:>12.4e} "
        f"{report.order:>7.3f} {str(report.window_rejected):>16}"
    )
    return 0 if report.passed else 1


def cmd_solve(config: RunConfig, settings: Settings, out_dir: Path) -> int:
    if config.variant == Variant.VERIFY:
        return cmd_verify(config, settings, out_dir)
    timings: Dict[str, float] = {}
    started = time.perf_counter()
    grid = grid_for(config)
    spec = problem_for(config, grid)
    timings["setup"] = time.perf_counter() - started

    started = time.perf_counter()
    mu = config.require_problem().mu
    result = runner_for(config, spec, grid)(mu)
    timings["pipeline"] = time.perf_counter() - started
    if result.report.success:
        started = time.perf_counter()
        audit_solution(spec, grid, result, config.solver, seed=settings.seed)
        timings["audit"] = time.perf_counter() - started

    report = result.report
    _write_text(out_dir / "report.json", json.dumps(report.model_dump(mode="json"), indent=2))
    write_solution_csv(result, out_dir / "solution.csv")
    outputs = ["report.json", "solution.csv"]
    for stage, trace in result.traces.items():
        name = f"trace_{stage}.csv"
        write_trace_csv(trace, out_dir / name)
        outputs.append(name)
    write_manifest(
        out_dir,
        "solve",
        config,
        settings,
        timings,
        outputs,
        certificates=[c.model_dump() for c in report.certificates],
        constants=report.constants.model_dump() if report.constants is not None else None,
    )
    print(f"{'certificate':<28} {'passed':>7} {'value':>14}")
    for c in report.certificates:
        value = "" if c.value is None else f"{c.value:.6g}"
        print(f"{c.name:<28} {str(c.passed):>7} {value:>14}")
    print(f"status: {report.status}")
    report.raise_on_failure()
    return 0


class SweepRow(BaseModel):
    mu: float
    success: bool
    status: str
    norm: Optional[float] = None
    min_u: Optional[float] = None
    C3: Optional[float] = None
    energy_comparison: Optional[float] = None
    energy_truncated: Optional[float] = None


def sweep_point(runner: Callable[[Optional[float]], PipelineResult], mu: float, out_dir: Path, index: int) -> SweepRow:
    try:
        result = runner(mu)
    except ConvergenceError as e:
        logger.warning(f"Sweep point mu={mu:g} did not converge: {e}")
        return SweepRow(mu=mu, success=False, status="not-converged")
    report = result.report
    _write_text(out_dir / "points" / f"point_{index:03d}.json", json.dumps(report.model_dump(mode="json"), indent=2))
    free = result.solution.grid.free_mask()
    return SweepRow(
        mu=mu,
        success=report.success,
        status=report.status,
        norm=result.solution.energy_norm(),
        min_u=float(result.solution.values[free].min()),
        C3=report.C3,
        energy_comparison=report.energies.get("comparison"),
        energy_truncated=report.energies.get("truncated"),
    )


async def run_sweep(
    runner: Callable[[Optional[float]], PipelineResult],
    mus: Sequence[float],
    out_dir: Path,
    threads: int = 1,
) -> List[SweepRow]:
    """Evaluate sweep points concurrently; rows come back in mu order"""
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        tasks = [loop.run_in_executor(pool, sweep_point, runner, mu, out_dir, i) for i, mu in enumerate(mus)]
        rows = await asyncio.gather(*tasks)
    return list(rows)


def sweep_grid(mu_max: float, steps: int) -> List[float]:
    if mu_max <= 0:
        return [0.0]
    return [mu_max * k / steps for k in range(steps + 1)]


def is_prefix(rows: Sequence[SweepRow]) -> bool:
    """True when every success precedes every failure along mu"""
    seen_failure = False
    for row in rows:
        if not row.success:
            seen_failure = True
        elif seen_failure:
            return False
    return True


def cmd_sweep(config: RunConfig, settings: Settings, out_dir: Path, mu_max: float, steps: int, threads: int) -> int:
    if config.variant == Variant.VERIFY:
        raise ConfigError("The verify variant cannot be swept")
    if steps < 1:
        raise ConfigError(f"--steps must be at least 1, got {steps}")
    timings: Dict[str, float] = {}
    started = time.perf_counter()
    grid = grid_for(config)
    spec = problem_for(config, grid)
    runner = runner_for(config, spec, grid)
    timings["setup"] = time.perf_counter() - started

    started = time.perf_counter()
    mus = sweep_grid(mu_max, steps)
    rows = asyncio.run(run_sweep(runner, mus, out_dir, threads))
    timings["sweep"] = time.perf_counter() - started

    summary: Dict[str, Any] = {"mu_max": mu_max, "steps": steps, "prefix": is_prefix(rows)}
    successes = [r.mu for r in rows if r.success]
    failures = [r.mu for r in rows if not r.success]
    if successes and failures and is_prefix(rows):
        started = time.perf_counter()

        def predicate(mu: float) -> bool:
            try:
                return runner(mu).report.success
            except ConvergenceError:
                return False

        lo, hi, evaluations = bisect_threshold(
            predicate, max(successes), min(failures), config.solver.threshold_width * mu_max
        )
        timings["bisection"] = time.perf_counter() - started
        summary.update({"mu0": lo, "bracket": [lo, hi], "width": hi - lo, "evaluations": evaluations})
    elif successes and not failures:
        summary.update({"mu0": max(successes), "bracket": None, "note": "no failure up to mu_max"})
    else:
        summary.update({"mu0": None, "bracket": None})

    fields = list(SweepRow.model_fields)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow(["" if getattr(row, f) is None else getattr(row, f) for f in fields])
    _write_text(out_dir / "sweep_summary.json", json.dumps(summary, indent=2))
    write_manifest(out_dir, "sweep", config, settings, timings, ["sweep.csv", "sweep_summary.json"])
    print(f"{'mu':>12} {'success':>8} {'min u':>14} {'C3':>12}")
    for row in rows:
        min_u = "" if row.min_u is None else f"{row.min_u:.6g}"
        c3 = "" if row.C3 is None else f"{row.C3:.6g}"
        print(f"{row.mu:>12.6g} {str(row.success):>8} {min_u:>14} {c3:>12}")
    print(f"mu0: {summary.get('mu0')}")
    return 0 if successes and summary["prefix"] else 1


def cmd_eigen(config: RunConfig, settings: Settings, out_dir: Path) -> int:
    started = time.perf_counter()
    grid = grid_for(config)
    if config.variant == Variant.VERIFY:
        spec = _oracle_example(config).spec()
    else:
        spec = problem_for(config, grid)
    lam1, lamstar, window = compute_window(spec, grid)
    full = extrapolated_eigen(grid, spec.a)
    zero = extrapolated_eigen(grid, spec.a, DomainTag.ZERO_SET, spec.zero_set)
    payload = {
        "lambda": spec.lam,
        "lambda_1": lam1.value,
        "lambda_star": json_float(lamstar.value),
        "lower_margin": window.lower_margin,
        "upper_margin": json_float(window.upper_margin),
        "inside": window.inside,
        "richardson": {
            "lambda_1": full.extrapolated,
            "lambda_1_order": full.observed_order,
            "lambda_star": json_float(zero.extrapolated),
        },
        "eigen": {"full": lam1.summary(), "zero_set": lamstar.summary()},
    }
    _write_text(out_dir / "eigen.json", json.dumps(payload, indent=2))
    write_manifest(out_dir, "eigen", config, settings, {"eigen": time.perf_counter() - started}, ["eigen.json"])
    print(json.dumps(payload, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logistic-steady",
        description="Certified positive steady states of logistic equations with harvesting.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, required=True, help="JSON run file")
        p.add_argument("--variant", choices=[v.value for v in Variant], help="override the configured variant")
        p.add_argument("--grid-nodes", type=int, help="number of grid intervals")
        p.add_argument("--r-infinity", type=float, help="outer radius of the grid")
        p.add_argument("--tol", type=float, help="minimizer tolerance")
        p.add_argument("--out-dir", type=Path, default=Path("out"), help="directory for artifacts")

    solve = sub.add_parser("solve", help="run one pipeline and certify the result")
    common(solve)
    solve.add_argument("--mu", type=float, help="harvesting level")

    sweep = sub.add_parser("sweep", help="run the pipeline over a mu grid and bracket the threshold")
    common(sweep)
    sweep.add_argument("--mu-max", type=float, required=True)
    sweep.add_argument("--steps", type=int, default=16)
    sweep.add_argument("--threads", type=int, default=1)

    eigen = sub.add_parser("eigen", help="principal eigenvalues and the lambda window")
    common(eigen)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
        configure_logging(None, settings.log_level)
        config = load_config(args.config)
        config = apply_overrides(
            config,
            variant=args.variant,
            mu=getattr(args, "mu", None),
            grid_nodes=args.grid_nodes,
            r_infinity=args.r_infinity,
            tol=args.tol,
        )
        out_dir: Path = args.out_dir
        configure_logging(out_dir, settings.log_level)
        logger.info(f"logistic-steady {__version__}: {args.command} with {args.config}")
        match args.command:
            case "solve":
                return cmd_solve(config, settings, out_dir)
            case "sweep":
                return cmd_sweep(config, settings, out_dir, args.mu_max, args.steps, args.threads)
            case "eigen":
                return cmd_eigen(config, settings, out_dir)
            case _:
                raise ValueError(f"Unknown command: {args.command}")
    except LogisticSteadyError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception:
        logger.critical(f"FATAL error in command '{args.command}'", exc_info=True)
        return 1
