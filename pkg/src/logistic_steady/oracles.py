"""
Closed-form oracles and verification utilities

Exact piecewise solutions on R^N and on the ball of radius 2, built from the
first radial Dirichlet eigenfunction of the unit ball, together with the
residual measures and certificates used to verify any computed solution.
"""

import csv
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.optimize import brentq
from scipy.special import gamma, jv

from .grid import (
    DomainKind,
    Field,
    FieldRole,
    RadialGrid,
    solve_poisson,
    solve_tridiagonal,
    unit_ball_volume,
)
from .problem import (
    CERTIFICATE_TOL,
    DerivedConstants,
    Nonlinearity,
    ProblemSpec,
    RadialProfile,
    SampledProblem,
    ZeroSet,
    ZeroSetKind,
)
from .spectral import (
    DomainTag,
    RayleighCheck,
    check_lambda_window,
    principal_eigen,
    rayleigh_necessary_check,
)

logger = logging.getLogger("LogisticSteadyLogger")


def first_bessel_zero(order: float) -> float:
    """First positive zero of J_order"""
    left = order + 1.0
    while jv(order, left + 0.5) > 0:
        left += 0.5
    return float(brentq(lambda x: jv(order, x), left, left + 0.5, xtol=1e-15))


@dataclass(frozen=True)
class BallEigenfunction:
    """phi(r) = C r^-nu J_nu(j r) on the unit ball, normalized so phi(0) = j"""

    dimension: int

    @cached_property
    def order(self) -> float:
        return self.dimension / 2 - 1

    @cached_property
    def zero(self) -> float:
        return first_bessel_zero(self.order)

    @cached_property
    def constant(self) -> float:
        nu, j = self.order, self.zero
        return j * float(gamma(nu + 1)) * (2 / j) ** nu

    @property
    def eigenvalue(self) -> float:
        return self.zero**2

    def __call__(self, r: Any) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        nu, j = self.order, self.zero
        safe = np.where(r > 0, r, 1.0)
        values = self.constant * safe**-nu * jv(nu, j * safe)
        return np.where(r > 0, values, j)

    def derivative(self, r: Any) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        nu, j = self.order, self.zero
        safe = np.where(r > 0, r, 1.0)
        values = -self.constant * j * safe**-nu * jv(nu + 1, j * safe)
        return np.where(r > 0, values, 0.0)


@dataclass(frozen=True)
class ExactExample:
    """Exact positive solution with lam = lambda_* + mu outside the window.

    On R^N (``bounded=False``):
        a = 1 | r^{-(N-2) beta},  b = 0 | lam / kappa^beta,
        mu h = mu phi + lam kappa | 0,  u = phi + kappa | kappa r^{2-N}.
    On the ball of radius 2 the exterior branches use r^{2-N} - 2^{2-N}.
    """

    dimension: int
    beta: float
    mu: float
    bounded: bool = False

    @cached_property
    def eigen(self) -> BallEigenfunction:
        return BallEigenfunction(self.dimension)

    @property
    def lamstar(self) -> float:
        return self.eigen.eigenvalue

    @property
    def lam(self) -> float:
        return self.lamstar + self.mu

    @cached_property
    def kappa(self) -> float:
        return -float(self.eigen.derivative(1.0)) / (self.dimension - 2)

    @property
    def outer_radius(self) -> float:
        return 2.0 if self.bounded else math.inf

    @property
    def shift(self) -> float:
        """2^{2-N} on the ball, 0 on R^N"""
        return 2.0 ** (2 - self.dimension) if self.bounded else 0.0

    def _green(self, r: np.ndarray) -> np.ndarray:
        safe = np.where(r > 0, r, 1.0)
        return safe ** (2 - self.dimension) - self.shift

    def a(self, r: Any) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.bounded:
            outer = np.maximum(self._green(r), 0.0) ** self.beta
        else:
            outer = np.where(r > 0, r, 1.0) ** (-(self.dimension - 2) * self.beta)
        return np.where(r <= 1, 1.0, outer)

    def b(self, r: Any) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r <= 1, 0.0, self.lam / self.kappa**self.beta)

    def mu_h(self, r: Any) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inner = self.mu * self.eigen(r) + self.lam * self.kappa * (1 - self.shift)
        return np.where(r <= 1, inner, 0.0)

    def u(self, r: Any) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inner = self.eigen(r) + self.kappa * (1 - self.shift)
        return np.where(r <= 1, inner, self.kappa * np.maximum(self._green(r), 0.0))

    def du(self, r: Any) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        outer = -(self.dimension - 2) * self.kappa * safe ** (1 - self.dimension)
        return np.where(r <= 1, self.eigen.derivative(r), outer)

    @property
    def g(self) -> Nonlinearity:
        return Nonlinearity.power(1 + self.beta)

    def one_sided_derivatives(self) -> Dict[str, float]:
        inner = float(self.eigen.derivative(1.0))
        outer = -(self.dimension - 2) * self.kappa
        return {"inner": inner, "outer": outer}

    def spec(self) -> ProblemSpec:
        params = {"dimension": self.dimension, "beta": self.beta, "mu": self.mu, "bounded": self.bounded}
        family = "exact-bounded" if self.bounded else "exact"
        return ProblemSpec(
            dimension=self.dimension,
            lam=self.lam,
            mu=self.mu,
            a=RadialProfile(family, self.a, {**params, "field": "a"}),
            b=RadialProfile(family, self.b, {**params, "field": "b"}, zero_radius=1.0),
            h=RadialProfile(family, lambda r: self.mu_h(r) / self.mu, {**params, "field": "h"}, support_radius=1.0),
            g=self.g,
            beta=self.beta,
            zero_set=ZeroSet(ZeroSetKind.BALL, 1.0),
            domain=DomainKind.BALL if self.bounded else DomainKind.WHOLE,
        )

    def solution(self, grid: RadialGrid) -> Field:
        return Field(grid, self.u(grid.nodes), FieldRole.SOLUTION)

    def manifest(self) -> Dict[str, Any]:
        return {
            "dimension": self.dimension,
            "beta": self.beta,
            "mu": self.mu,
            "lambda": self.lam,
            "lambda_star": self.lamstar,
            "kappa": self.kappa,
            "bessel_zero": self.eigen.zero,
            "eigenfunction_normalization": "phi(0) = first zero of J_{N/2-1}",
            "domain": "ball(2)" if self.bounded else "whole",
        }


def build_exact_example(dimension: int = 3, beta: float = 3.0, mu: float = 0.1) -> ExactExample:
    if beta <= 2:
        raise ValueError(f"Exact example needs beta > 2 for a in L^(N/2), got {beta}")
    if mu <= 0:
        raise ValueError(f"Exact example needs mu > 0, got {mu}")
    if dimension < 3:
        raise ValueError(f"Dimension must be at least 3, got {dimension}")
    return ExactExample(dimension=dimension, beta=beta, mu=mu)


def bounded_exact_example(mu: float, dimension: int = 3, beta: float = 3.0) -> ExactExample:
    if mu <= 0:
        raise ValueError(f"Exact example needs mu > 0, got {mu}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return ExactExample(dimension=dimension, beta=beta, mu=mu, bounded=True)


def boundary_limit_ratio(example: ExactExample, samples: int = 12) -> Dict[str, Any]:
    """[(r^{2-N} - 2^{2-N}) / (2 - r)]^beta as r -> 2 and its closed-form limit"""
    n, beta = example.dimension, example.beta
    gaps = np.logspace(-1, -8, samples)
    r = 2.0 - gaps
    ratios = ((r ** (2 - n) - 2.0 ** (2 - n)) / gaps) ** beta
    limit = ((n - 2) * 2.0 ** (1 - n)) ** beta
    return {"gaps": gaps.tolist(), "ratios": ratios.tolist(), "limit": limit}


def equation_residual(u: Field, problem: SampledProblem) -> np.ndarray:
    """W R with R = -Delta u - lam a u + b g(u) + mu h, zero at fixed nodes"""
    grid = u.grid
    stiffness = grid.stiffness()
    x = u.values
    rhs = problem.lam * problem.a * x - problem.b * problem.g(x) - problem.mu * problem.h
    out = stiffness.matvec(x) - grid.weights * rhs
    out[~stiffness.free] = 0.0
    return out


def weak_residual(u: Field, problem: SampledProblem) -> float:
    """sup_v |sum w R v| / |v|, relative to |u| (dual norm through A^{-1})"""
    grid = u.grid
    stiffness = grid.stiffness()
    free = stiffness.free
    r = equation_residual(u, problem)[free]
    diag, off = stiffness.reduced(free)
    z = solve_tridiagonal(diag, off, r)
    norm_u = math.sqrt(float(u.values @ stiffness.matvec(u.values)))
    return math.sqrt(max(float(r @ z), 0.0)) / norm_u


def strong_residual(u: Field, problem: SampledProblem) -> float:
    """Weighted L2 norm of R relative to the sum of the norms of its terms"""
    grid = u.grid
    stiffness = grid.stiffness()
    free = stiffness.free
    w = grid.weights[free]
    x = u.values
    terms = [
        stiffness.matvec(x) / grid.weights,
        problem.lam * problem.a * x,
        problem.b * problem.g(x),
        problem.mu * problem.h,
    ]
    scale = sum(math.sqrt(float(np.dot(w, t[free] ** 2))) for t in terms)
    residual = equation_residual(u, problem)[free] / w
    return math.sqrt(float(np.dot(w, residual**2))) / scale


def convergence_order(
    residual_fn: Callable[[RadialGrid], float], grid: RadialGrid
) -> Dict[str, float]:
    """Residuals on a grid and its refinement, and the observed order"""
    coarse = residual_fn(grid)
    fine = residual_fn(grid.refined())
    order = math.log2(coarse / fine) if fine > 0 else math.inf
    return {"coarse": coarse, "fine": fine, "order": order}


def oracle_residual(example: ExactExample, grid: RadialGrid) -> float:
    u = example.solution(grid)
    return weak_residual(u, example.spec().sample(grid))


class DecayCertificate(BaseModel):
    radius: float
    C3: float
    passed: bool


def decay_certificate(u: Field, radius: float) -> DecayCertificate:
    """min over r >= radius of r^{N-2} u, on nodes where the equation is posed"""
    grid = u.grid
    region = (grid.nodes >= radius) & grid.free_mask()
    if not region.any():
        return DecayCertificate(radius=radius, C3=0.0, passed=False)
    scaled = grid.nodes[region] ** (grid.dimension - 2) * u.values[region]
    c3 = float(scaled.min())
    return DecayCertificate(radius=radius, C3=c3, passed=c3 > 0)


class VerificationReport(BaseModel):
    weak_residual: float
    strong_residual: float
    positive: bool
    min_value: float
    upper_bound_ok: Optional[bool] = None
    upper_bound_margin: Optional[float] = None
    decay: Optional[DecayCertificate] = None
    rayleigh: RayleighCheck

    @property
    def certificates_ok(self) -> bool:
        checks = [self.positive, self.rayleigh.holds]
        if self.upper_bound_ok is not None:
            checks.append(self.upper_bound_ok)
        if self.decay is not None:
            checks.append(self.decay.passed)
        return all(checks)


def verify_solution(
    u: Field,
    spec: ProblemSpec,
    grid: RadialGrid,
    consts: Optional[DerivedConstants] = None,
    d: Optional[Field] = None,
    decay_radius: Optional[float] = None,
) -> VerificationReport:
    """Residuals of -Delta u = lam a u - b g(u) - mu h plus the applicable bound certificates"""
    problem = spec.sample(grid, d)
    free = problem.free
    interior = u.values[free]
    report = VerificationReport(
        weak_residual=weak_residual(u, problem),
        strong_residual=strong_residual(u, problem),
        positive=bool(np.all(interior > 0)),
        min_value=float(interior.min()),
        rayleigh=rayleigh_necessary_check(u, spec, grid),
    )
    if consts is not None:
        margin = float(np.min(consts.ell * problem.d - u.values))
        report.upper_bound_margin = margin
        report.upper_bound_ok = margin >= -CERTIFICATE_TOL
    if decay_radius is not None and grid.kind == DomainKind.WHOLE:
        report.decay = decay_certificate(u, decay_radius)
    return report


class PotentialDecay(BaseModel):
    C: float
    radius: float
    mass: float


def newtonian_exterior(r: Any, mass: float, dimension: int) -> np.ndarray:
    """Exterior potential of a radial charge of total mass ``mass``"""
    r = np.asarray(r, dtype=float)
    n = dimension
    return mass * r ** (2 - n) / (n * (n - 2) * unit_ball_volume(n))


def verify_potential_decay(h: Field, grid: RadialGrid) -> Tuple[Field, PotentialDecay]:
    """Solve -Delta w = h and certify w <= C / r^{N-2} on the outer half of the grid"""
    w = solve_poisson(grid, h, grid.default_bc, FieldRole.POTENTIAL)
    outer = grid.nodes >= grid.radius / 2
    scaled = grid.nodes[outer] ** (grid.dimension - 2) * w.values[outer]
    decay = PotentialDecay(C=float(scaled.max()), radius=grid.radius / 2, mass=h.integral())
    logger.info(f"Potential decay constant C = {decay.C:.8g} beyond r = {decay.radius:.4g}")
    return w, decay


def export_oracle_csv(example: ExactExample, grid: RadialGrid, path: Path) -> None:
    r = grid.nodes
    columns: List[np.ndarray] = [r, example.a(r), example.b(r), example.mu_h(r), example.u(r)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "a", "b", "mu_h", "u"])
        for row in zip(*columns):
            writer.writerow([f"{value:.17g}" for value in row])


class OracleReport(BaseModel):
    domain: str
    intervals: int
    weak_residual: float
    refined_residual: float
    order: float
    strong_residual: float
    value_gap: float
    slope_gap: float
    lambda_star: float
    lambda_star_numeric: float
    window_rejected: bool
    C1_bar: Optional[float] = None
    limit_ratio: Optional[float] = None
    passed: bool
    manifest: Dict[str, Any]


def verify_oracle(
    example: ExactExample,
    grid: RadialGrid,
    residual_tol: float = 5e-4,
    min_order: float = 1.9,
) -> OracleReport:
    """Residual, refinement order, C1 matching and window rejection of an exact example"""
    spec = example.spec()
    study = convergence_order(lambda g: oracle_residual(example, g), grid)
    u = example.solution(grid)
    strong = strong_residual(u, spec.sample(grid))
    sides = example.one_sided_derivatives()
    inner_value = float(example.eigen(1.0)) + example.kappa * (1 - example.shift)
    outer_value = example.kappa * (1 - example.shift)
    value_gap = abs(inner_value - outer_value)
    slope_gap = abs(sides["inner"] - sides["outer"])
    lam1 = principal_eigen(grid, spec.a)
    lamstar = principal_eigen(grid, spec.a, DomainTag.ZERO_SET, spec.zero_set)
    window = check_lambda_window(example.lam, lam1, lamstar)

    C1_bar = None
    limit = None
    if example.bounded:
        free = grid.free_mask() & (grid.nodes > 1)
        dist = grid.radius - grid.nodes[free]
        C1_bar = float(np.max(example.b(grid.nodes[free]) * dist**example.beta / example.a(grid.nodes[free])))
        limit = boundary_limit_ratio(example)["limit"]

    passed = (
        study["coarse"] <= residual_tol
        and study["order"] >= min_order
        and not window.inside
        and (C1_bar is None or math.isfinite(C1_bar))
    )
    report = OracleReport(
        domain="ball(2)" if example.bounded else "whole",
        intervals=grid.intervals,
        weak_residual=study["coarse"],
        refined_residual=study["fine"],
        order=study["order"],
        strong_residual=strong,
        value_gap=value_gap,
        slope_gap=slope_gap,
        lambda_star=example.lamstar,
        lambda_star_numeric=lamstar.value,
        window_rejected=not window.inside,
        C1_bar=C1_bar,
        limit_ratio=limit,
        passed=passed,
        manifest=example.manifest(),
    )
    logger.info(
        f"Oracle on {report.domain}: weak residual {report.weak_residual:.3e}, order {report.order:.3f}, "
        f"window rejected={report.window_rejected}"
    )
    return report
