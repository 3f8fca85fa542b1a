"""
Existence pipelines

Each driver runs the construction for one problem variant and returns a
PipelineReport with every certificate it checked:

- related: minimize the comparison functional below ell d, then again above
  the first minimizer, and certify positivity through the harmonic comparison
- main: close the related solution with the truncation ladder m = 1, 2, 4, ...
- fast-growth: build a positive subsolution from the boosted problem first
- bounded: the same on a ball, with Green profiles in place of the instanton
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel
from pydantic import Field as PydanticField

from .config import LambdaConfig, LambdaMode, SolverConfig
from .errors import CertificateError, ConfigError, ConvergenceError, HypothesisError
from .functionals import (
    EnergyFunctional,
    FunctionalVariant,
    GradientCheckReport,
    MinimizationResult,
    ObstacleSet,
    TraceRow,
    TruncatedNonlinearity,
    build_functional,
    gradient_check,
    minimize_constrained,
)
from .grid import DomainKind, Field, FieldRole, RadialGrid, solve_poisson
from .oracles import VerificationReport, decay_certificate, strong_residual, verify_solution, weak_residual
from .problem import (
    CERTIFICATE_TOL,
    BumpSpec,
    DerivedConstants,
    HypothesisReport,
    ProblemSpec,
    ProblemVariant,
    SampledProblem,
    build_d_bounded,
    check_growth_equivalence,
    check_supersolution,
    derive_constants,
    truncation_exponent,
    validate_hypotheses,
)
from .spectral import DomainTag, EigenResult, WindowCheck, check_lambda_window, principal_eigen

logger = logging.getLogger("LogisticSteadyLogger")


def json_float(value: float) -> Union[float, str]:
    return "inf" if math.isinf(value) else value


class WindowRecord(BaseModel):
    lam: float
    lambda_1: float
    lambda_star: Union[float, str]
    lower_margin: float
    upper_margin: Union[float, str]
    inside: bool

    @classmethod
    def from_check(cls, check: WindowCheck) -> "WindowRecord":
        return cls(
            lam=check.lam,
            lambda_1=check.lam1,
            lambda_star=json_float(check.lamstar),
            lower_margin=check.lower_margin,
            upper_margin=json_float(check.upper_margin),
            inside=check.inside,
        )


class StageRecord(BaseModel):
    name: str
    mu: float
    iterations: int
    converged: bool
    energy: float
    relative_gradient: float
    min_value: float
    max_value: float


class PositivityRecord(BaseModel):
    x0: float
    value: float
    rho: float
    reference_radius: float
    epsilon: float
    epsilon_bracket: Optional[Tuple[float, float]] = None
    comparison_ok: bool
    comparison_margin: float
    potential_C: float
    mu0_analytic: Optional[float] = None


class LadderStep(BaseModel):
    m: float
    sup: float
    norm: float
    C6: float
    C7: float
    energy: float
    iterations: int
    closed: bool


class FastGrowthRecord(BaseModel):
    c: float
    C9: float
    mu3: float
    chain_ok: bool
    chain_margins: List[float]
    sup: float


class BoundedRecord(BaseModel):
    c: float
    C: float
    hopf_margin: float
    growth_consistent: bool
    sup_dist_ratio: float
    sup_d_ratio: float
    profile_c: Optional[float] = None
    profile_C: Optional[float] = None
    mu7: Optional[float] = None
    collar_min: Optional[float] = None
    collar_max: Optional[float] = None


class Certificate(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    detail: str = ""


class PipelineReport(BaseModel):
    variant: str
    status: str = "running"
    lam: float
    mu: float
    window: Optional[WindowRecord] = None
    hypotheses: Optional[HypothesisReport] = None
    constants: Optional[DerivedConstants] = None
    stages: List[StageRecord] = PydanticField(default_factory=list)
    positivity: Optional[PositivityRecord] = None
    ladder: List[LadderStep] = PydanticField(default_factory=list)
    fast_growth: Optional[FastGrowthRecord] = None
    bounded: Optional[BoundedRecord] = None
    residual: Optional[float] = None
    weak_residual: Optional[float] = None
    C3: Optional[float] = None
    C5: Optional[float] = None
    energies: Dict[str, float] = PydanticField(default_factory=dict)
    thresholds: Dict[str, float] = PydanticField(default_factory=dict)
    certificates: List[Certificate] = PydanticField(default_factory=list)
    gradient_check: Optional[GradientCheckReport] = None
    verification: Optional[VerificationReport] = None
    message: Optional[str] = None

    @property
    def success(self) -> bool:
        return self.status == "success"

    def certify(self, name: str, passed: bool, value: Optional[float] = None, detail: str = "") -> bool:
        passed = bool(passed)
        self.certificates.append(Certificate(name=name, passed=passed, value=value, detail=detail))
        if not passed:
            logger.warning(f"Certificate '{name}' failed (value={value}) {detail}".rstrip())
        return passed

    def failures(self) -> List[Certificate]:
        return [c for c in self.certificates if not c.passed]

    def finish(self, message: Optional[str] = None) -> "PipelineReport":
        ok = bool(self.certificates) and not self.failures()
        self.status = "success" if ok else "failed"
        if message:
            self.message = message
        logger.info(f"Pipeline {self.variant} at mu={self.mu:g}: {self.status}")
        return self

    def raise_on_failure(self) -> None:
        failures = self.failures()
        if failures:
            names = ", ".join(c.name for c in failures)
            raise CertificateError(f"Certificates failed: {names}")


@dataclass(eq=False)
class PipelineResult:
    report: PipelineReport
    solution: Field
    upper: Optional[Field] = None
    lower: Optional[Field] = None
    traces: Dict[str, List[TraceRow]] = field(default_factory=dict)


def compute_window(spec: ProblemSpec, grid: RadialGrid) -> Tuple[EigenResult, EigenResult, WindowCheck]:
    """lambda_1 on the whole grid, lambda_* on the interior of the zero set of b"""
    lam1 = principal_eigen(grid, spec.a)
    lamstar = principal_eigen(grid, spec.a, DomainTag.ZERO_SET, spec.zero_set)
    return lam1, lamstar, check_lambda_window(spec.lam, lam1, lamstar)


def resolve_lambda(config: LambdaConfig, lam1: float, lamstar: float) -> float:
    if config.mode == LambdaMode.NUMBER:
        assert config.value is not None
        return float(config.value)
    if config.mode == LambdaMode.MIDWAY:
        if math.isinf(lamstar):
            raise ConfigError("lambda mode 'midway' needs a finite lambda_* (b must vanish on a ball)")
        return 0.5 * (lam1 + lamstar)
    assert config.factor is not None
    return config.factor * lam1


def _stage_record(name: str, mu: float, result: MinimizationResult) -> StageRecord:
    return StageRecord(
        name=name,
        mu=mu,
        iterations=result.iterations,
        converged=result.converged,
        energy=result.energy.total,
        relative_gradient=result.relative_gradient,
        min_value=result.u.inf(),
        max_value=result.u.sup(),
    )


def _minimize(
    name: str,
    start: Field,
    obstacle: ObstacleSet,
    functional: EnergyFunctional,
    solver: SolverConfig,
    role: FieldRole = FieldRole.SOLUTION,
) -> MinimizationResult:
    logger.info(f"{name}: minimizing {functional.variant.value if functional.variant else 'energy'} over {obstacle.kind.value} set")
    result = minimize_constrained(start, obstacle, functional, tol=solver.tol, max_iter=solver.max_iter, role=role)
    if not result.converged:
        raise ConvergenceError(
            f"{name} did not converge in {result.iterations} iterations (relative gradient {result.relative_gradient:.3e})"
        )
    return result


def _window_gate(report: PipelineReport, spec: ProblemSpec, grid: RadialGrid, window: Optional[WindowCheck]) -> WindowCheck:
    if window is None or window.lam != spec.lam:
        window = compute_window(spec, grid)[2]
    report.window = WindowRecord.from_check(window)
    return window


def _hypothesis_gate(
    report: PipelineReport,
    spec: ProblemSpec,
    grid: RadialGrid,
    variant: ProblemVariant,
    window: WindowCheck,
    d: Optional[Field] = None,
) -> None:
    hypotheses = validate_hypotheses(spec, grid, variant, d=d, window=(window.lam1, window.lamstar))
    report.hypotheses = hypotheses
    hypotheses.require()


def _decay_radius(grid: RadialGrid, solver: SolverConfig) -> float:
    radius = solver.decay_radius
    return radius if radius < grid.radius else grid.radius / 2


def positivity_point(u: Field, cap: float) -> Tuple[float, float, float]:
    """Node of largest value, its value, and the half-width of the positive interval around it"""
    grid = u.grid
    r = grid.nodes
    free = grid.free_mask()
    x = u.values
    positive = (x > 0) & free
    i0 = int(np.argmax(np.where(free, x, -np.inf)))
    right = i0
    while right + 1 < grid.size and positive[right + 1]:
        right += 1
    left = i0
    while left - 1 >= 0 and positive[left - 1]:
        left -= 1
    rho = float(r[right] - r[i0])
    if left > 0:
        rho = min(rho, float(r[i0] - r[left]))
    return float(r[i0]), float(x[i0]), min(rho, cap)


@dataclass(eq=False)
class RelatedResult:
    u_hat: Field
    u_bar: Field
    upper: Field
    w: Field
    energy: float
    positive: bool
    traces: Dict[str, List[TraceRow]]


def solve_related(
    spec: ProblemSpec,
    consts: DerivedConstants,
    grid: RadialGrid,
    mu: float,
    solver: SolverConfig = SolverConfig(),
    report: Optional[PipelineReport] = None,
    d: Optional[Field] = None,
    mu2: Optional[float] = None,
) -> Tuple[RelatedResult, PipelineReport]:
    """Stages 1 and 2 of the construction for the comparison problem.

    Args:
        spec: problem definition (lambda already resolved)
        consts: derived constants giving the obstacle ell d
        grid: grid to solve on
        mu: harvesting level
        solver: tolerances and iteration limits
        report: report to extend; a new one is created when omitted
        d: carrying-capacity profile (Aubin-Talenti when omitted)
        mu2: harvesting level of the stage-1 subsolution, defaults to mu

    Returns:
        The stage fields and the report with stage records and certificates
    """
    mu2 = mu if mu2 is None else mu2
    if report is None:
        report = PipelineReport(variant="related", lam=spec.lam, mu=mu)
    report.constants = consts
    n = grid.dimension
    problem2 = spec.with_mu(mu2).sample(grid, d)
    upper = Field(grid, consts.ell * problem2.d, FieldRole.SUPERSOLUTION)
    traces: Dict[str, List[TraceRow]] = {}

    logger.info(f"Stage 1: minimizing comparison functional over N, mu={mu2:g}")
    functional1 = build_functional(problem2, FunctionalVariant.COMPARISON, consts)
    stage1 = _minimize("Stage 1", upper.with_values(0.5 * upper.values), ObstacleSet.upper_only(upper), functional1, solver)
    u_hat = stage1.u.with_values(stage1.u.values, FieldRole.SUBSOLUTION)
    report.stages.append(_stage_record("stage 1 (comparison over N)", mu2, stage1))
    traces["stage1"] = stage1.trace

    problem = spec.with_mu(mu).sample(grid, d)
    w = solve_poisson(grid, problem.field("h"), grid.default_bc)
    free = problem.free
    if not np.any(u_hat.values[free] > 0):
        report.certify(
            "stage 1 positive somewhere",
            False,
            u_hat.sup(),
            "stage-1 minimizer is nonpositive everywhere: lambda too small or mu too large",
        )
        return RelatedResult(u_hat, u_hat, upper, w, stage1.energy.total, False, traces), report

    logger.info(f"Stage 2: minimizing comparison functional over the ordered set, mu={mu:g}")
    functional2 = build_functional(problem, FunctionalVariant.COMPARISON, consts)
    obstacle = ObstacleSet.ordered(u_hat, upper)
    stage2 = _minimize("Stage 2", u_hat, obstacle, functional2, solver)
    u_bar = stage2.u.with_values(stage2.u.values, FieldRole.SUBSOLUTION)
    report.stages.append(_stage_record("stage 2 (comparison over ordered set)", mu, stage2))
    traces["stage2"] = stage2.trace
    energy = stage2.energy.total
    report.energies["comparison"] = energy
    if energy < 0:
        report.C5 = -2.0 * energy

    report.certify(
        "comparison bound",
        (consts.comparison_margin or 0.0) >= -CERTIFICATE_TOL,
        consts.comparison_margin,
    )
    supersolution = check_supersolution(spec.with_mu(mu), consts, grid, d)
    report.certify("ell d supersolution", supersolution.passed, supersolution.min_value)
    over = float(np.max(u_bar.values - upper.values))
    report.certify("upper obstacle", over <= CERTIFICATE_TOL, over, "u_bar <= ell d")
    under = float(np.max(u_hat.values - u_bar.values))
    report.certify("ordering", under <= CERTIFICATE_TOL, under, "u_hat <= u_bar")

    positive = bool(np.all(u_bar.values[free] > 0))
    report.certify("positivity of u_bar", positive, float(u_bar.values[free].min()))

    if grid.kind == DomainKind.WHOLE:
        x0, value, rho = positivity_point(u_hat, solver.positivity_radius)
        r_ref = max(x0 + rho, float(grid.nodes[1]))
        ref_value = float(grid.interpolate(u_hat.values, r_ref))
        epsilon = (1 - 1e-6) * max(ref_value, 0.0) * r_ref ** (n - 2)
        region = free & (grid.nodes >= r_ref)
        r = grid.nodes[region]
        envelope = epsilon * r ** (2.0 - n)
        shifted = u_bar.values[region] + mu * w.values[region]
        margin = float(np.min(shifted - envelope)) if region.any() else 0.0
        potential_C = float(np.max(r ** (n - 2) * w.values[region])) if region.any() else 0.0
        mu0 = epsilon / potential_C if potential_C > 0 else None
        report.positivity = PositivityRecord(
            x0=x0,
            value=value,
            rho=rho,
            reference_radius=r_ref,
            epsilon=epsilon,
            comparison_ok=margin >= -CERTIFICATE_TOL,
            comparison_margin=margin,
            potential_C=potential_C,
            mu0_analytic=mu0,
        )
        if mu0 is not None:
            report.thresholds["mu0_analytic"] = mu0
        report.certify(
            "harmonic comparison",
            margin >= -CERTIFICATE_TOL,
            margin,
            f"epsilon/r^(N-2) <= u_bar + mu w for r >= {r_ref:.4g}",
        )
    return RelatedResult(u_hat, u_bar, upper, w, energy, positive, traces), report


def truncation_ladder(
    problem: SampledProblem,
    obstacle: ObstacleSet,
    start: Field,
    solver: SolverConfig,
    variant: FunctionalVariant = FunctionalVariant.TRUNCATED,
) -> Tuple[MinimizationResult, TruncatedNonlinearity, List[LadderStep]]:
    """Minimize the truncated functional for m = 2^k until sup u^m <= m"""
    p = truncation_exponent(problem.grid.dimension)
    m = 2.0 ** math.ceil(math.log2(max(start.sup(), 1.0)))
    current = start
    steps: List[LadderStep] = []
    for _ in range(solver.max_doublings + 1):
        truncation = TruncatedNonlinearity(problem.g, m, p)
        functional = build_functional(problem, variant, truncation=truncation)
        result = _minimize(f"Truncation m={m:g}", current, obstacle, functional, solver)
        sup = result.u.sup()
        norm = result.u.energy_norm()
        C6 = sup / norm if norm > 0 else math.inf
        closed = sup <= m
        steps.append(
            LadderStep(
                m=m,
                sup=sup,
                norm=norm,
                C6=C6,
                C7=C6 * norm,
                energy=result.energy.total,
                iterations=result.iterations,
                closed=closed,
            )
        )
        logger.info(f"Truncation level m={m:g}: sup u={sup:.8g}, closed={closed}")
        if closed:
            return result, truncation, steps
        current = result.u
        m *= 2
    raise ConvergenceError(f"Truncation ladder did not close below m = {m / 2:g}")


def _close(
    spec: ProblemSpec,
    grid: RadialGrid,
    lower: Field,
    report: PipelineReport,
    solver: SolverConfig,
    comparison_energy: Optional[float] = None,
    upper: Optional[Field] = None,
) -> Tuple[MinimizationResult, List[TraceRow]]:
    """Truncation ladder above ``lower`` plus the final-solution certificates"""
    problem = spec.sample(grid)
    logger.info(f"Stage 3: truncation ladder over M_mu, mu={spec.mu:g}")
    result, truncation, steps = truncation_ladder(problem, ObstacleSet.lower_only(lower), lower, solver)
    report.ladder = steps
    u = result.u
    report.energies["truncated"] = result.energy.total

    residual = strong_residual(u, problem)
    report.residual = residual
    report.weak_residual = weak_residual(u, problem)
    report.certify("residual", residual <= solver.residual_tol, residual, f"strong residual <= {solver.residual_tol:g}")
    free = problem.free
    report.certify("positivity", bool(np.all(u.values[free] > 0)), float(u.values[free].min()))
    report.certify(
        "truncation closure",
        steps[-1].closed and truncation.agrees_with_g(u.values),
        steps[-1].m,
        "j_m(u) = g(u) at every node",
    )
    above = float(np.min(u.values - lower.values))
    report.certify("above subsolution", above >= -CERTIFICATE_TOL, above)
    if upper is not None:
        below = float(np.min(upper.values - u.values))
        report.certify(
            "below ell d",
            below >= -CERTIFICATE_TOL * max(1.0, upper.sup()),
            below,
            "u <= ell d at every node",
        )
    if comparison_energy is not None:
        energy = result.energy.total
        slack = CERTIFICATE_TOL * max(1.0, abs(comparison_energy))
        report.certify(
            "energy ordering",
            energy <= comparison_energy + slack and comparison_energy < 0,
            energy,
            f"I^m(u^m) <= I(u_bar) = {comparison_energy:.8g} < 0",
        )
    if grid.kind == DomainKind.WHOLE:
        decay = decay_certificate(u, _decay_radius(grid, solver))
        report.C3 = decay.C3
        report.certify("decay lower bound", decay.passed, decay.C3, f"min r^(N-2) u over r >= {decay.radius:g}")
    return result, result.trace


def audit_solution(
    spec: ProblemSpec,
    grid: RadialGrid,
    result: PipelineResult,
    solver: SolverConfig = SolverConfig(),
    seed: int = 0,
    pairs: int = 8,
) -> PipelineReport:
    """Re-check a closed solution outside the pipeline that produced it.

    The truncated functional at the last ladder level gets a seeded
    finite-difference gradient check, and the solution is handed to
    verify_solution (residuals, positivity, Rayleigh, decay). Runs without a
    ladder (the related variant solves a different equation) are left alone.
    """
    report = result.report
    if not report.ladder:
        return report
    u = result.solution
    spec = spec.with_mu(report.mu)
    problem = spec.sample(grid)
    truncation = TruncatedNonlinearity(problem.g, report.ladder[-1].m, truncation_exponent(grid.dimension))
    functional = build_functional(problem, FunctionalVariant.TRUNCATED, truncation=truncation)
    envelope = np.maximum(np.abs(u.values), 1e-3 * max(u.sup(), 1e-12))
    report.gradient_check = gradient_check(functional, envelope, pairs=pairs, seed=seed)
    logger.info(f"Gradient check (seed {seed}): max relative error {report.gradient_check.max_relative_error:.3e}")

    decay_radius = _decay_radius(grid, solver) if grid.kind == DomainKind.WHOLE else None
    verification = verify_solution(u, spec, grid, decay_radius=decay_radius)
    report.verification = verification
    report.certify(
        "independent verification",
        verification.certificates_ok and verification.strong_residual <= solver.residual_tol,
        verification.strong_residual,
        "verify_solution: residual, positivity, Rayleigh and decay",
    )
    report.finish(report.message)
    return report


def run_related(
    spec: ProblemSpec,
    grid: RadialGrid,
    mu: Optional[float] = None,
    solver: SolverConfig = SolverConfig(),
    consts: Optional[DerivedConstants] = None,
    window: Optional[WindowCheck] = None,
) -> PipelineResult:
    """Gated run of the related (comparison) problem alone"""
    mu = spec.mu if mu is None else float(mu)
    spec = spec.with_mu(mu)
    report = PipelineReport(variant="related", lam=spec.lam, mu=mu)
    window = _window_gate(report, spec, grid, window)
    if window.lower_margin <= 0:
        raise HypothesisError("H lambda", f"lambda={spec.lam:.8g} must exceed lambda_1={window.lam1:.8g}")
    consts = consts or derive_constants(spec, grid)
    related, report = solve_related(spec, consts, grid, mu, solver, report)
    if related.positive and grid.kind == DomainKind.WHOLE:
        decay = decay_certificate(related.u_bar, _decay_radius(grid, solver))
        report.C3 = decay.C3
        report.certify("decay lower bound", decay.passed, decay.C3)
    report.finish()
    return PipelineResult(report, related.u_bar, related.upper, related.u_hat, related.traces)


def solve_main(
    spec: ProblemSpec,
    grid: RadialGrid,
    mu: Optional[float] = None,
    solver: SolverConfig = SolverConfig(),
    consts: Optional[DerivedConstants] = None,
    window: Optional[WindowCheck] = None,
    mu2: Optional[float] = None,
) -> PipelineResult:
    """Positive solution on R^N for lambda_1 < lambda < lambda_* and small mu"""
    if grid.kind != DomainKind.WHOLE:
        raise ValueError(f"solve_main needs a whole-space grid, got {grid.kind.value}")
    mu = spec.mu if mu is None else float(mu)
    spec = spec.with_mu(mu)
    report = PipelineReport(variant="main", lam=spec.lam, mu=mu)
    window = _window_gate(report, spec, grid, window)
    _hypothesis_gate(report, spec, grid, ProblemVariant.STANDARD, window)
    consts = consts or derive_constants(spec, grid)

    related, report = solve_related(spec, consts, grid, mu, solver, report, mu2=mu2)
    if not related.positive:
        report.finish("u_bar is not positive: mu is beyond the construction's range")
        return PipelineResult(report, related.u_bar, related.upper, related.u_hat, related.traces)

    result, trace = _close(spec, grid, related.u_bar, report, solver, related.energy, related.upper)
    report.finish()
    traces = {**related.traces, "stage3": trace}
    return PipelineResult(report, result.u, related.upper, related.u_bar, traces)


def negative_energy_start(problem: SampledProblem, scan: int = 80) -> Tuple[Field, float]:
    """t phi_1 with the lowest boosted energy over t = 2^-k; the energy must be negative.

    u = 0 is a critical point of the boosted functional, so the descent has
    to start strictly below zero energy to stay away from it.
    """
    grid = problem.grid
    eigen = principal_eigen(grid, Field(grid, problem.a))
    if eigen.eigenfunction is None:
        raise ConvergenceError("No principal eigenfunction for the boosted start")
    phi = np.abs(eigen.eigenfunction.values)
    phi[~problem.free] = 0.0
    phi /= float(phi.max())
    functional = build_functional(
        problem,
        FunctionalVariant.FAST_GROWTH,
        truncation=TruncatedNonlinearity(problem.g, 1.0, truncation_exponent(grid.dimension)),
    )
    best_t, best_energy = 0.0, 0.0
    for k in range(scan + 1):
        t = 2.0**-k
        energy = functional.value(t * phi)
        if energy < best_energy:
            best_t, best_energy = t, energy
    if best_energy >= 0:
        raise ConvergenceError("Boosted energy is nonnegative along the principal eigenfunction")
    logger.info(f"Boosted start t phi_1 with t={best_t:.6g}, energy {best_energy:.8g}")
    return Field(grid, best_t * phi), best_energy


def solve_fast_growth(
    spec: ProblemSpec,
    grid: RadialGrid,
    mu: Optional[float] = None,
    solver: SolverConfig = SolverConfig(),
    window: Optional[WindowCheck] = None,
) -> PipelineResult:
    """Positive solution for b = lam a upsilon with fast-growing upsilon.

    A positive solution of the boosted problem (b~ = lam a max(upsilon, 1),
    g~ = g + (u+)^2, no harvesting) gives c = min over supp h and
    mu_3 = lam c^2 / C9; below mu_3 it is a subsolution of the harvested
    problem. ``mu`` defaults to mu_3 / 2.
    """
    if spec.upsilon is None:
        raise ValueError("solve_fast_growth needs an upsilon profile")
    if grid.kind != DomainKind.WHOLE:
        raise ValueError(f"solve_fast_growth needs a whole-space grid, got {grid.kind.value}")
    report = PipelineReport(variant="fast-growth", lam=spec.lam, mu=spec.mu if mu is None else float(mu))
    window = _window_gate(report, spec, grid, window)
    _hypothesis_gate(report, spec, grid, ProblemVariant.FAST_GROWTH, window)

    boosted = spec.with_mu(0.0).sample(grid)
    start, start_energy = negative_energy_start(boosted)
    report.energies["boosted start"] = start_energy
    logger.info("Stage 1: minimizing the boosted functional over u >= 0")
    sub_result, _, sub_steps = truncation_ladder(
        boosted, ObstacleSet.nonneg(grid), start, solver, FunctionalVariant.FAST_GROWTH
    )
    u_ring = sub_result.u.with_values(sub_result.u.values, FieldRole.SUBSOLUTION)
    report.stages.append(_stage_record("boosted subsolution", 0.0, sub_result))
    report.energies["fast-growth"] = sub_result.energy.total
    below_zero = sub_result.energy.total < 0
    report.certify("boosted energy negative", below_zero, sub_result.energy.total, "I~(u) < 0 = I~(0)")
    free = boosted.free
    positive = bool(np.all(u_ring.values[free] > 0))
    report.certify("subsolution positivity", positive, float(u_ring.values[free].min()))

    support = free & (boosted.h > 0)
    a = boosted.a
    c = float(u_ring.values[support].min()) if positive else 0.0
    C9 = float(np.max(boosted.h[support] / a[support]))
    mu3 = spec.lam * c**2 / C9
    report.thresholds["mu3"] = mu3
    mu = 0.5 * mu3 if mu is None else float(mu)
    report.mu = mu
    spec = spec.with_mu(mu)
    if mu > mu3:
        logger.warning(f"mu={mu:g} exceeds mu_3={mu3:g}; the harvest domination chain may fail")

    upsilon = spec.upsilon
    assert upsilon is not None
    b_tilde = spec.lam * a * np.maximum(upsilon(grid.nodes), 1.0)
    x = u_ring.values
    g_tilde = spec.g(x) + np.maximum(x, 0.0) ** 2
    h = boosted.h
    chain = [mu * h, (spec.lam * c**2 / C9) * h, c**2 * b_tilde, b_tilde * g_tilde]
    margins = []
    chain_ok = True
    for lhs, rhs in zip(chain[:-1], chain[1:]):
        gap = (rhs - lhs)[support]
        scale = np.maximum(1.0, np.abs(rhs[support]))
        margins.append(float(gap.min()))
        chain_ok = chain_ok and bool(np.all(gap >= -CERTIFICATE_TOL * scale))
    report.fast_growth = FastGrowthRecord(
        c=c, C9=C9, mu3=mu3, chain_ok=chain_ok, chain_margins=margins, sup=u_ring.sup()
    )
    report.certify("harvest domination", chain_ok, min(margins), "mu h <= (lam c^2/C9) h <= c^2 b~ <= b~ g~(u)")
    report.certify("mu3 positive", mu3 > 0, mu3)
    traces = {"stage1": sub_result.trace}
    if not (below_zero and positive and chain_ok):
        report.finish("boosted subsolution does not dominate the harvest")
        return PipelineResult(report, u_ring, None, u_ring, traces)

    result, trace = _close(spec, grid, u_ring, report, solver)
    report.finish()
    traces["stage3"] = trace
    logger.info(f"Fast-growth ladder used {len(sub_steps)} level(s) for the subsolution")
    return PipelineResult(report, result.u, None, u_ring, traces)


def _bisect_epsilon(
    target: np.ndarray, profile: np.ndarray, mask: np.ndarray, iterations: int = 60
) -> Tuple[float, float]:
    """Bracket the largest eps with eps * profile <= target on ``mask``"""

    def holds(eps: float) -> bool:
        return bool(np.all(eps * profile[mask] <= target[mask] + CERTIFICATE_TOL))

    hi = 1.0
    while holds(hi) and hi < 1e12:
        hi *= 2
    lo = 0.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def solve_bounded(
    spec: ProblemSpec,
    grid: RadialGrid,
    mu: Optional[float] = None,
    solver: SolverConfig = SolverConfig(),
    bump: BumpSpec = BumpSpec(),
    inner_radius: Optional[float] = None,
    C1_bar: Optional[float] = None,
    window: Optional[WindowCheck] = None,
) -> PipelineResult:
    """Positive solution with zero Dirichlet data on a ball"""
    if grid.kind != DomainKind.BALL:
        raise ValueError(f"solve_bounded needs a ball grid, got {grid.kind.value}")
    mu = spec.mu if mu is None else float(mu)
    spec = spec.with_mu(mu)
    report = PipelineReport(variant="bounded", lam=spec.lam, mu=mu)
    profile = build_d_bounded(grid, inner_radius=inner_radius, bump=bump)
    d = profile.d
    growth = check_growth_equivalence(spec, profile, C1_bar)
    assert profile.c is not None and profile.C is not None and profile.hopf_margin is not None
    record = BoundedRecord(
        c=profile.c,
        C=profile.C,
        hopf_margin=profile.hopf_margin,
        growth_consistent=growth.consistent,
        sup_dist_ratio=growth.sup_dist_ratio,
        sup_d_ratio=growth.sup_d_ratio,
    )
    report.bounded = record
    report.certify("growth equivalence", growth.consistent, growth.constants_ratio)
    if growth.dist_bound_ok is not None:
        report.certify("growth bound (dist)", growth.dist_bound_ok, growth.sup_dist_ratio)
    window = _window_gate(report, spec, grid, window)
    _hypothesis_gate(report, spec, grid, ProblemVariant.BOUNDED, window, d=d)
    consts = derive_constants(spec, grid, d)

    related, report = solve_related(spec, consts, grid, mu, solver, report, d=d)
    if not related.positive:
        report.finish("u_bar is not positive: mu is beyond the construction's range")
        return PipelineResult(report, related.u_bar, related.upper, related.u_hat, related.traces)

    # Second Green profile, its bump inside the positive core of u_hat.
    free = grid.free_mask()
    x = related.u_hat.values
    nonpositive = free & (x <= 0)
    r_pos = float(grid.nodes[nonpositive].min()) if nonpositive.any() else grid.radius
    r_in = inner_radius if inner_radius is not None else grid.radius / 4
    delta = min(r_in, 0.5 * r_pos)
    d_hat = build_d_bounded(grid, inner_radius=r_in, bump=BumpSpec(radius=delta, mass=bump.mass, shape=bump.shape))
    assert d_hat.c is not None
    target = related.u_bar.values + mu * related.w.values
    eps_lo, eps_hi = _bisect_epsilon(target, d_hat.d.values, free)
    dist = grid.radius - grid.nodes[free]
    w_dist = float(np.max(related.w.values[free] / dist))
    mu7 = eps_lo * d_hat.c / w_dist if w_dist > 0 else None
    margin = float(np.min(target[free] - eps_lo * d_hat.d.values[free]))
    x0, value, rho = positivity_point(related.u_hat, solver.positivity_radius)
    report.positivity = PositivityRecord(
        x0=x0,
        value=value,
        rho=rho,
        reference_radius=delta,
        epsilon=eps_lo,
        epsilon_bracket=(eps_lo, eps_hi),
        comparison_ok=eps_lo > 0 and margin >= -CERTIFICATE_TOL,
        comparison_margin=margin,
        potential_C=w_dist,
        mu0_analytic=mu7,
    )
    record.profile_c = d_hat.c
    record.profile_C = d_hat.C
    record.mu7 = mu7
    if mu7 is not None:
        report.thresholds["mu7"] = mu7
    report.certify("Green comparison", eps_lo > 0 and margin >= -CERTIFICATE_TOL, eps_lo, "eps d_hat <= u_bar + mu w")

    result, trace = _close(spec, grid, related.u_bar, report, solver, related.energy)
    u = result.u
    collar = free & (grid.nodes >= 0.9 * grid.radius)
    ratios = u.values[collar] / (grid.radius - grid.nodes[collar])
    record.collar_min = float(ratios.min())
    record.collar_max = float(ratios.max())
    report.certify(
        "boundary collar",
        bool(ratios.min() > 0 and np.isfinite(ratios.max())),
        float(ratios.min()),
        "u / dist bounded above and below near the boundary",
    )
    report.finish()
    traces = {**related.traces, "stage3": trace}
    return PipelineResult(report, u, related.upper, related.u_bar, traces)


class ThresholdResult(BaseModel):
    mu0: float
    width: float
    mu_hi: float
    evaluations: List[Tuple[float, bool]]
    mu0_analytic: Optional[float] = None


def bisect_threshold(
    predicate: Callable[[float], bool], lo: float, hi: float, width: float
) -> Tuple[float, float, List[Tuple[float, bool]]]:
    """Shrink [lo, hi] with predicate(lo) true and predicate(hi) false to the given width"""
    evaluations = []
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        ok = predicate(mid)
        evaluations.append((mid, ok))
        if ok:
            lo = mid
        else:
            hi = mid
    return lo, hi, evaluations


def find_mu_threshold(
    spec: ProblemSpec,
    grid: RadialGrid,
    mu_hi: float,
    solver: SolverConfig = SolverConfig(),
    consts: Optional[DerivedConstants] = None,
    runner: Optional[Callable[[float], PipelineResult]] = None,
) -> ThresholdResult:
    """Largest certified mu in [0, mu_hi], bracketed to solver.threshold_width * mu_hi"""
    if mu_hi <= 0:
        raise ValueError(f"mu_hi must be positive, got {mu_hi}")
    if runner is None:
        window = compute_window(spec, grid)[2]
        consts = consts or derive_constants(spec.with_mu(0.0), grid)

        def runner(mu: float) -> PipelineResult:
            return solve_main(spec, grid, mu, solver, consts=consts, window=window)

    analytic: List[Optional[float]] = []

    def predicate(mu: float) -> bool:
        try:
            result = runner(mu)
        except ConvergenceError as e:
            logger.warning(f"mu={mu:g} counted as failure: {e}")
            return False
        if mu == 0 and result.report.positivity is not None:
            analytic.append(result.report.positivity.mu0_analytic)
        return result.report.success

    if not predicate(0.0):
        raise CertificateError("Pipeline fails at mu = 0: no certified positive solution without harvesting")
    evaluations = [(0.0, True)]
    if predicate(mu_hi):
        logger.warning(f"Pipeline still succeeds at mu_hi={mu_hi:g}; the threshold lies above the search range")
        return ThresholdResult(mu0=mu_hi, width=0.0, mu_hi=mu_hi, evaluations=evaluations + [(mu_hi, True)])
    evaluations.append((mu_hi, False))
    lo, hi, steps = bisect_threshold(predicate, 0.0, mu_hi, solver.threshold_width * mu_hi)
    logger.info(f"Harvesting threshold mu_0 in [{lo:.6g}, {hi:.6g}]")
    return ThresholdResult(
        mu0=lo,
        width=hi - lo,
        mu_hi=mu_hi,
        evaluations=evaluations + steps,
        mu0_analytic=analytic[0] if analytic else None,
    )
