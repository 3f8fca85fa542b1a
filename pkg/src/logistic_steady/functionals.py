"""
Energy functionals and constrained minimization

The functionals are the Dirichlet energy plus nodewise terms (linear growth,
comparison, truncated nonlinearity, harvesting), evaluated with the grid's
quadrature. Minimization over box-shaped obstacle sets uses a projected
gradient method in the energy metric with Armijo backtracking.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel
from scipy.optimize import minimize_scalar

from .grid import (
    BoundaryCondition,
    Field,
    FieldRole,
    RadialGrid,
    Stiffness,
    solve_tridiagonal,
)
from .problem import (
    DerivedConstants,
    Nonlinearity,
    ProblemSpec,
    SampledProblem,
    truncation_exponent,
)

logger = logging.getLogger("LogisticSteadyLogger")

ESCAPE_WARNING = 1e12


class FunctionalVariant(str, Enum):
    COMPARISON = "comparison-I"
    TRUNCATED = "truncated-Im"
    FAST_GROWTH = "fast-growth"


@dataclass(frozen=True)
class TruncatedNonlinearity:
    """j_m(s) = g(s) for s <= m and g(m) - m^p + s^p beyond"""

    g: Nonlinearity
    m: float
    p: float

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"Truncation level must be at least 1, got {self.m}")
        if self.p <= 1:
            raise ValueError(f"Truncation exponent must exceed 1, got {self.p}")

    @property
    def offset(self) -> float:
        return float(self.g(self.m)) - self.m**self.p

    def __call__(self, s: Union[float, np.ndarray]) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        tail = self.offset + np.maximum(s, self.m) ** self.p
        return np.where(s <= self.m, self.g(s), tail)

    def primitive(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """J_m(s) = int_0^s j_m"""
        s = np.asarray(s, dtype=float)
        m, p = self.m, self.p
        top = np.maximum(s, m)
        tail = (
            float(self.g.primitive(m))
            + self.offset * (top - m)
            + (top ** (p + 1) - m ** (p + 1)) / (p + 1)
        )
        return np.where(s <= m, self.g.primitive(s), tail)

    def continuity_gap(self) -> float:
        below = float(self.g(self.m))
        above = self.offset + self.m**self.p
        return abs(above - below)

    def is_nonnegative(self, s_max: float = 1e6, samples: int = 400) -> bool:
        s = np.concatenate(([0.0], np.logspace(-12, math.log10(s_max), samples)))
        return bool(np.all(self(s) >= 0))

    def agrees_with_g(self, values: np.ndarray) -> bool:
        """j_m(u) is g(u) at every node, i.e. the truncation is inactive"""
        return bool(np.all(self(values) == self.g(values)))


class SuperlinearCheck(BaseModel):
    samples: List[float]
    ratios: List[float]
    tail_slope: float
    passed: bool


def lower_envelope(g: Nonlinearity, p: float, s: float) -> float:
    """j(s) = inf over m >= 1 of j_m(s)"""
    if s <= 1:
        return float(g(s))
    result = minimize_scalar(
        lambda m: float(g(m)) - m**p,
        bounds=(1.0, s),
        method="bounded",
        options={"xatol": 1e-10 * s},
    )
    best = min(float(result.fun), float(g(1.0)) - 1.0, float(g(s)) - s**p)
    return min(float(g(s)), best + s**p)


def superlinear_limit_check(
    g: Nonlinearity, p: float, s_max: float = 1e6, samples: int = 25
) -> SuperlinearCheck:
    """j(s)/s -> inf, checked on a log ray up to s_max"""
    s = np.logspace(0, math.log10(s_max), samples)
    ratios = np.array([lower_envelope(g, p, x) / x for x in s])
    tail = s >= s_max / 100
    slope = float(np.polyfit(np.log(s[tail]), np.log(np.maximum(ratios[tail], 1e-300)), 1)[0])
    passed = bool(slope > 0.05 and np.all(np.diff(ratios[tail]) > 0))
    return SuperlinearCheck(
        samples=s.tolist(), ratios=ratios.tolist(), tail_slope=slope, passed=passed
    )


class EnergyTerm:
    """A nodewise energy density with its derivative"""

    part = ""

    def density(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class LinearGrowthTerm(EnergyTerm):
    part = "linear"

    def __init__(self, coef: np.ndarray, positive_part: bool):
        self.coef = coef
        self.positive_part = positive_part

    def _arg(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0.0) if self.positive_part else x

    def density(self, x: np.ndarray) -> np.ndarray:
        return -0.5 * self.coef * self._arg(x) ** 2

    def derivative(self, x: np.ndarray) -> np.ndarray:
        return -self.coef * self._arg(x)


class ComparisonTerm(EnergyTerm):
    """G(x, u) = lam a int_0^u s k(s/(l d)) ds with k(s) = s^beta"""

    part = "comparison"

    def __init__(self, coef: np.ndarray, scale: np.ndarray, beta: float):
        self.coef = coef
        self.scale = scale
        self.beta = beta
        # Zero where l d vanishes (Dirichlet node); the upper obstacle pins u to 0 there.
        scale = np.asarray(scale, dtype=float)
        self.inverse_scale = np.divide(1.0, scale, out=np.zeros_like(scale), where=scale > 0)

    def density(self, x: np.ndarray) -> np.ndarray:
        xp = np.maximum(x, 0.0)
        return self.coef * xp**2 * (xp * self.inverse_scale) ** self.beta / (self.beta + 2)

    def derivative(self, x: np.ndarray) -> np.ndarray:
        xp = np.maximum(x, 0.0)
        return self.coef * xp * (xp * self.inverse_scale) ** self.beta


class TruncatedTerm(EnergyTerm):
    part = "truncated"

    def __init__(self, coef: np.ndarray, truncation: TruncatedNonlinearity):
        self.coef = coef
        self.truncation = truncation

    def density(self, x: np.ndarray) -> np.ndarray:
        return self.coef * self.truncation.primitive(x)

    def derivative(self, x: np.ndarray) -> np.ndarray:
        return self.coef * self.truncation(x)


class HarvestTerm(EnergyTerm):
    part = "harvest"

    def __init__(self, coef: np.ndarray):
        self.coef = coef

    def density(self, x: np.ndarray) -> np.ndarray:
        return self.coef * x

    def derivative(self, x: np.ndarray) -> np.ndarray:
        return self.coef * np.ones_like(x)


class EnergyBreakdown(BaseModel):
    dirichlet: float = 0.0
    linear: float = 0.0
    comparison: float = 0.0
    truncated: float = 0.0
    harvest: float = 0.0
    total: float = 0.0


class EnergyFunctional:
    """E(u) = 1/2 u^T A u + sum_i w_i (sum of term densities at node i)"""

    def __init__(
        self,
        grid: RadialGrid,
        terms: Sequence[EnergyTerm],
        variant: Optional[FunctionalVariant] = None,
        bc: Optional[BoundaryCondition] = None,
    ):
        self.grid = grid
        self.terms = list(terms)
        self.variant = variant
        self.stiffness: Stiffness = grid.stiffness(bc)
        self.free = self.stiffness.free
        self.weights = grid.weights

    def breakdown(self, x: np.ndarray) -> EnergyBreakdown:
        parts: Dict[str, float] = {"dirichlet": 0.5 * float(x @ self.stiffness.matvec(x))}
        for term in self.terms:
            parts[term.part] = parts.get(term.part, 0.0) + float(
                np.dot(self.weights[self.free], term.density(x)[self.free])
            )
        if abs(parts.get("comparison", 0.0)) > ESCAPE_WARNING:
            logger.warning(f"Comparison integral {parts['comparison']:.3e} suggests an escaping iterate")
        return EnergyBreakdown(**parts, total=sum(parts.values()))

    def value(self, x: np.ndarray) -> float:
        return self.breakdown(x).total

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Weighted gradient G with dE(u)[v] = sum_i w_i G_i v_i, zero at fixed nodes"""
        g = self.stiffness.matvec(x) / self.weights
        for term in self.terms:
            g = g + term.derivative(x)
        g[~self.free] = 0.0
        return g

    def residual_scale(self, x: np.ndarray) -> float:
        """Sum of the weighted norms of the gradient's parts"""
        w = self.weights[self.free]
        parts = [self.stiffness.matvec(x) / self.weights] + [t.derivative(x) for t in self.terms]
        return float(sum(math.sqrt(np.dot(w, p[self.free] ** 2)) for p in parts))

    def directional_derivative(self, x: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(self.weights, self.gradient(x) * v))


def _sampled(problem: Union[ProblemSpec, SampledProblem], grid: RadialGrid) -> SampledProblem:
    if isinstance(problem, SampledProblem):
        return problem
    return problem.sample(grid)


def build_functional(
    problem: SampledProblem,
    variant: FunctionalVariant,
    consts: Optional[DerivedConstants] = None,
    truncation: Optional[TruncatedNonlinearity] = None,
    bc: Optional[BoundaryCondition] = None,
) -> EnergyFunctional:
    """Assemble one of the three functionals on the sampled problem.

    comparison-I:  1/2|u|^2 - lam/2 int a (u+)^2 + int G(x, u) + mu int h u
    truncated-Im:  1/2|u|^2 - lam/2 int a u^2 + int b J_m(u) + mu int h u
    fast-growth:   1/2|u|^2 - lam/2 int a u^2 + 2 int b~ J_m(u), with
                   b~ = lam a max(upsilon, 1) and J_m built on g + (u+)^2
    """
    variant = FunctionalVariant(variant)
    lam_a = problem.lam * problem.a
    harvest = HarvestTerm(problem.mu * problem.h)
    if variant == FunctionalVariant.COMPARISON:
        if consts is None:
            raise ValueError("The comparison functional needs derived constants")
        terms: List[EnergyTerm] = [
            LinearGrowthTerm(lam_a, positive_part=True),
            ComparisonTerm(lam_a, consts.l * problem.d, consts.beta),
            harvest,
        ]
    elif variant == FunctionalVariant.TRUNCATED:
        if truncation is None:
            raise ValueError("The truncated functional needs a truncation level")
        terms = [
            LinearGrowthTerm(lam_a, positive_part=False),
            TruncatedTerm(problem.b, truncation),
            harvest,
        ]
    else:
        upsilon = problem.spec.upsilon
        if upsilon is None:
            raise ValueError("The fast-growth functional needs an upsilon profile")
        m = truncation.m if truncation is not None else 1.0
        p = truncation.p if truncation is not None else truncation_exponent(problem.grid.dimension)
        boosted = TruncatedNonlinearity(problem.g.plus(Nonlinearity.power(2.0)), m, p)
        b_tilde = lam_a * np.maximum(upsilon(problem.grid.nodes), 1.0)
        terms = [
            LinearGrowthTerm(lam_a, positive_part=False),
            TruncatedTerm(2.0 * b_tilde, boosted),
        ]
    return EnergyFunctional(problem.grid, terms, variant, bc)


def eval_energy(
    u: Field,
    problem: Union[ProblemSpec, SampledProblem],
    consts: Optional[DerivedConstants],
    variant: FunctionalVariant,
    truncation: Optional[TruncatedNonlinearity] = None,
) -> EnergyBreakdown:
    functional = build_functional(_sampled(problem, u.grid), variant, consts, truncation)
    return functional.breakdown(u.values)


def eval_gradient(
    u: Field,
    problem: Union[ProblemSpec, SampledProblem],
    consts: Optional[DerivedConstants],
    variant: FunctionalVariant,
    truncation: Optional[TruncatedNonlinearity] = None,
) -> Field:
    functional = build_functional(_sampled(problem, u.grid), variant, consts, truncation)
    return Field(u.grid, functional.gradient(u.values), FieldRole.RESIDUAL)


class GradientCheckReport(BaseModel):
    pairs: int
    step: float
    max_relative_error: float
    errors: List[float]


def gradient_check(
    functional: EnergyFunctional,
    envelope: np.ndarray,
    pairs: int = 20,
    step: float = 1e-6,
    seed: int = 0,
) -> GradientCheckReport:
    """Central differences of the energy against the weighted gradient"""
    rng = np.random.default_rng(seed)
    free = functional.free
    errors = []
    for _ in range(pairs):
        x = envelope * rng.uniform(-0.5, 1.5, envelope.size)
        v = envelope * rng.normal(size=envelope.size)
        x[~free] = 0.0
        v[~free] = 0.0
        fd = (functional.value(x + step * v) - functional.value(x - step * v)) / (2 * step)
        exact = functional.directional_derivative(x, v)
        errors.append(abs(exact - fd) / (abs(fd) + 1e-12))
    return GradientCheckReport(
        pairs=pairs, step=step, max_relative_error=max(errors), errors=errors
    )


class ObstacleKind(str, Enum):
    UPPER = "upper-only"
    ORDERED = "ordered"
    LOWER = "lower-only"
    NONNEG = "nonneg"


@dataclass(frozen=True, eq=False)
class ObstacleSet:
    kind: ObstacleKind
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.lower is not None and self.upper is not None:
            gap = float(np.min(self.upper - self.lower))
            if gap < -1e-12:
                raise ValueError(f"Obstacle lower bound exceeds upper bound by {-gap:.3e}")

    @classmethod
    def upper_only(cls, upper: Field) -> "ObstacleSet":
        return cls(ObstacleKind.UPPER, upper=upper.values)

    @classmethod
    def ordered(cls, lower: Field, upper: Field) -> "ObstacleSet":
        return cls(ObstacleKind.ORDERED, lower=lower.values, upper=np.maximum(upper.values, lower.values))

    @classmethod
    def lower_only(cls, lower: Field) -> "ObstacleSet":
        return cls(ObstacleKind.LOWER, lower=lower.values)

    @classmethod
    def nonneg(cls, grid: RadialGrid) -> "ObstacleSet":
        return cls(ObstacleKind.NONNEG, lower=np.zeros(grid.size))

    def bounds(self, size: int) -> Tuple[np.ndarray, np.ndarray]:
        lo = self.lower if self.lower is not None else np.full(size, -np.inf)
        hi = self.upper if self.upper is not None else np.full(size, np.inf)
        return lo, hi

    def project(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds(x.size)
        return np.minimum(np.maximum(x, lo), hi)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        lo, hi = self.bounds(x.size)
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))


class TraceRow(BaseModel):
    iteration: int
    energy: float
    gradient_norm: float
    step: float
    direction: str


@dataclass(eq=False)
class MinimizationResult:
    u: Field
    energy: EnergyBreakdown
    iterations: int
    converged: bool
    gradient_norm: float
    relative_gradient: float
    trace: List[TraceRow] = field(default_factory=list)

    def kkt_violation(self, functional: EnergyFunctional, obstacle: ObstacleSet) -> float:
        """Largest weighted-gradient component that a feasible move could still reduce"""
        x = self.u.values
        g = functional.gradient(x)
        lo, hi = obstacle.bounds(x.size)
        at_lo = x <= lo
        at_hi = x >= hi
        violation = np.where(at_lo, np.minimum(g, 0.0), np.where(at_hi, np.maximum(g, 0.0), g))
        return float(np.max(np.abs(violation[functional.free]))) if functional.free.any() else 0.0


def write_trace_csv(trace: Sequence[TraceRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "energy", "gradient_norm", "step", "direction"])
        for row in trace:
            writer.writerow(
                [
                    row.iteration,
                    f"{row.energy:.17g}",
                    f"{row.gradient_norm:.17g}",
                    f"{row.step:.17g}",
                    row.direction,
                ]
            )


def _binding(x: np.ndarray, g: np.ndarray, lo: np.ndarray, hi: np.ndarray, eps: float) -> np.ndarray:
    return ((x <= lo + eps) & (g > 0)) | ((x >= hi - eps) & (g < 0))


def minimize_constrained(
    start: Field,
    obstacle: ObstacleSet,
    functional: EnergyFunctional,
    tol: float = 1e-9,
    max_iter: int = 20000,
    role: FieldRole = FieldRole.SOLUTION,
    sigma: float = 1e-4,
    backtrack: float = 0.5,
) -> MinimizationResult:
    """Projected gradient descent in the energy metric over a box obstacle set.

    Non-binding nodes move along the Riesz representative of the gradient
    (a tridiagonal solve with the reduced stiffness), the step is clamped to
    the obstacle and accepted by Armijo backtracking. Exhausting
    ``max_iter`` returns the last iterate flagged ``converged=False``.
    """
    grid = start.grid
    free = functional.free
    weights = functional.weights
    stiffness = functional.stiffness
    lo, hi = obstacle.bounds(grid.size)

    x = obstacle.project(start.values.copy())
    x[~free] = 0.0
    energy = functional.value(x)
    g = functional.gradient(x)
    t_init = 1.0
    prev_x: Optional[np.ndarray] = None
    prev_wg: Optional[np.ndarray] = None
    trace: List[TraceRow] = []
    converged = False
    gnorm = math.inf
    relative = math.inf
    iteration = 0

    for iteration in range(1, max_iter + 1):
        exact_binding = _binding(x, g, lo, hi, 0.0) | ~free
        gnorm = math.sqrt(float(np.dot(weights[~exact_binding], g[~exact_binding] ** 2)))
        scale = functional.residual_scale(x)
        relative = gnorm / scale if scale > 0 else 0.0
        if relative <= tol:
            converged = True
            break

        wg = weights * g
        if prev_x is not None and prev_wg is not None:
            s = x - prev_x
            y = wg - prev_wg
            curvature = float(s @ y)
            if curvature > 0:
                t_init = min(max(float(s @ stiffness.matvec(s)) / curvature, 1e-8), 1e8)

        projected_gap = float(np.max(np.abs(x - obstacle.project(x - g))[free])) if free.any() else 0.0
        eps = min(1e-3 * (float(np.max(np.abs(x))) + 1e-300), projected_gap)
        near = free & _binding(x, g, lo, hi, eps)
        movable = free & ~near
        direction = np.zeros(grid.size)
        diag, off = stiffness.reduced(movable)
        direction[movable] = solve_tridiagonal(diag, off, -wg[movable])
        # Nodes close to a bound with the gradient pushing outward take a diagonally
        # scaled step, so the projection lands them on the bound.
        direction[near] = -wg[near] / stiffness.diag[near]

        accepted = False
        kind = "riesz"
        noise = 1e-14 * (abs(energy) + functional.breakdown(x).dirichlet + 1.0)
        for attempt in range(2):
            t = t_init
            for _ in range(60):
                trial = obstacle.project(x + t * direction)
                trial[~free] = 0.0
                predicted = float(np.dot(wg, trial - x))
                if predicted >= 0:
                    t *= backtrack
                    continue
                trial_energy = functional.value(trial)
                if trial_energy <= energy + sigma * predicted + noise:
                    accepted = True
                    break
                t *= backtrack
            if accepted:
                break
            # Fall back to the plain projected weighted gradient.
            kind = "gradient"
            direction = np.where(free, -g, 0.0)
            t_init = 1.0 / float(np.max((stiffness.diag / weights)[free]))

        if not accepted:
            logger.warning(f"Line search stalled at iteration {iteration}, relative gradient {relative:.3e}")
            break

        prev_x, prev_wg = x, wg
        x, energy = trial, trial_energy
        g = functional.gradient(x)
        trace.append(
            TraceRow(iteration=iteration, energy=energy, gradient_norm=gnorm, step=t, direction=kind)
        )
        if iteration % 500 == 0:
            logger.debug(f"Iteration {iteration}: energy={energy:.12g}, relative gradient={relative:.3e}")

    if not converged:
        logger.warning(
            f"Minimization stopped after {iteration} iterations with relative gradient {relative:.3e} (tol {tol:.1e})"
        )
    else:
        logger.debug(f"Minimization converged in {iteration} iterations, energy={energy:.12g}")
    return MinimizationResult(
        u=Field(grid, x, role),
        energy=functional.breakdown(x),
        iterations=iteration,
        converged=converged,
        gradient_norm=gnorm,
        relative_gradient=relative,
        trace=trace,
    )


class NormWindow(BaseModel):
    norms: List[float]
    min_norm: float
    max_norm: float
    r0_ok: bool
    R0_ok: bool


def norm_window_check(
    fields: Sequence[Field], lower: float = 1e-8, upper: float = 1e12
) -> NormWindow:
    """Energy norms of a family of minimizers stay inside a positive bounded band"""
    norms = [f.energy_norm() for f in fields]
    low, high = min(norms), max(norms)
    return NormWindow(
        norms=norms,
        min_norm=low,
        max_norm=high,
        r0_ok=low > lower,
        R0_ok=math.isfinite(high) and high < upper,
    )
