"""
Spectral module

Principal eigenvalue of -Delta phi = theta a phi on the full domain (lambda_1)
and on the interior of the zero set of b (lambda_*), the admissible window
check and the Rayleigh necessary condition evaluated on a computed solution.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Union

import numpy as np
from pydantic import BaseModel
from scipy import sparse
from scipy.sparse.linalg import splu

from .grid import BoundaryCondition, DomainKind, Field, FieldRole, RadialGrid
from .problem import CERTIFICATE_TOL, ProblemSpec, RadialProfile, ZeroSet

logger = logging.getLogger("LogisticSteadyLogger")


class DomainTag(str, Enum):
    FULL = "full"
    ZERO_SET = "B0-interior"


@dataclass(frozen=True, eq=False)
class EigenResult:
    value: float
    eigenfunction: Optional[Field]
    residual: float
    domain: DomainTag
    iterations: int = 0
    converged: bool = True
    intervals: int = 0
    radius: float = 0.0

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def summary(self) -> Dict[str, Any]:
        return {
            "value": "inf" if self.is_infinite else self.value,
            "residual": self.residual,
            "domain": self.domain.value,
            "iterations": self.iterations,
            "converged": self.converged,
            "intervals": self.intervals,
            "radius": self.radius,
        }


def _sample_weight(grid: RadialGrid, a: Union[Field, RadialProfile]) -> np.ndarray:
    if isinstance(a, Field):
        if a.grid is grid or a.values.size == grid.size and np.array_equal(a.grid.nodes, grid.nodes):
            return a.values
        return a.grid.interpolate(a.values, grid.nodes)
    return a(grid.nodes)


def _inverse_iteration(
    grid: RadialGrid,
    weight: np.ndarray,
    bc: BoundaryCondition,
    tol: float,
    max_iter: int,
) -> EigenResult:
    stiffness = grid.stiffness(bc)
    free = stiffness.free
    if np.any(weight[free] <= 0):
        raise ValueError("Eigenvalue weight a must be positive at every free node")
    A = stiffness.to_sparse()[free][:, free].tocsc()
    mass = grid.weights[free] * weight[free]
    M = sparse.diags(mass, format="csc")

    solver = splu(A)
    x = np.ones(mass.size)
    x /= math.sqrt(x @ (mass * x))
    theta = float(x @ (A @ x))
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        y = solver.solve(mass * x)
        y /= math.sqrt(y @ (mass * y))
        new_theta = float(y @ (A @ y))
        increment = abs(new_theta - theta) / new_theta
        x, theta = y, new_theta
        logger.debug(f"Inverse iteration {iterations}: theta={theta:.15g}, increment={increment:.3e}")
        if increment < 1e-6:
            converged = True
            break

    # Rayleigh-quotient refinement; kept only if it stays on the positive branch.
    for _ in range(6):
        try:
            y = splu((A - theta * M).tocsc()).solve(mass * x)
        except RuntimeError:
            break
        y /= math.sqrt(y @ (mass * y))
        if y.sum() < 0:
            y = -y
        new_theta = float(y @ (A @ y))
        if np.any(y <= 0) or new_theta > theta * (1 + 1e-6):
            break
        increment = abs(new_theta - theta) / new_theta
        x, theta = y, new_theta
        iterations += 1
        if increment < tol:
            converged = True
            break

    if x.sum() < 0:
        x = -x
    phi = np.zeros(grid.size)
    phi[free] = x
    residual_vec = (A @ x - theta * mass * x) / grid.weights[free]
    residual = math.sqrt(residual_vec @ (grid.weights[free] * residual_vec))
    scale = theta * math.sqrt((weight[free] * x) @ (grid.weights[free] * weight[free] * x))
    return EigenResult(
        value=theta,
        eigenfunction=Field(grid, phi, FieldRole.EIGENFUNCTION),
        residual=residual / scale,
        domain=DomainTag.FULL,
        iterations=iterations,
        converged=converged,
        intervals=grid.intervals,
        radius=grid.radius,
    )


def principal_eigen(
    grid: RadialGrid,
    a: Union[Field, RadialProfile],
    domain: DomainTag = DomainTag.FULL,
    zero_set: Optional[ZeroSet] = None,
    bc: Optional[BoundaryCondition] = None,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> EigenResult:
    """Smallest theta with -Delta phi = theta a phi, phi > 0 and sum w a phi^2 = 1.

    For the zero-set tag the problem is posed with Dirichlet data on the
    ball of radius ``zero_set.radius`` and the eigenfunction is extended by
    zero; an empty zero set gives the +inf sentinel.
    """
    domain = DomainTag(domain)
    if domain == DomainTag.ZERO_SET:
        if zero_set is None or not zero_set.has_interior:
            logger.info("Zero set of b has empty interior: lambda_* = inf")
            return EigenResult(
                value=math.inf,
                eigenfunction=None,
                residual=0.0,
                domain=domain,
                intervals=grid.intervals,
                radius=grid.radius,
            )
        sub = grid.subgrid(zero_set.radius)
        result = _inverse_iteration(
            sub, _sample_weight(sub, a), BoundaryCondition.DIRICHLET, tol, max_iter
        )
        assert result.eigenfunction is not None
        extended = Field(
            grid,
            sub.interpolate(result.eigenfunction.values, grid.nodes),
            FieldRole.EIGENFUNCTION,
        )
        result = EigenResult(
            value=result.value,
            eigenfunction=extended,
            residual=result.residual,
            domain=domain,
            iterations=result.iterations,
            converged=result.converged,
            intervals=sub.intervals,
            radius=sub.radius,
        )
    else:
        bc = BoundaryCondition(bc or grid.default_bc)
        result = _inverse_iteration(grid, _sample_weight(grid, a), bc, tol, max_iter)

    if not result.converged:
        logger.warning(
            f"Eigen iteration on {domain.value} stopped after {result.iterations} steps, residual {result.residual:.3e}"
        )
    logger.info(f"Principal eigenvalue ({domain.value}): {result.value:.10g}, residual {result.residual:.3e}")
    return result


class EigenExtrapolation(BaseModel):
    coarse: float
    fine: float
    extrapolated: float
    observed_order: Optional[float] = None


def richardson(coarse: float, fine: float) -> float:
    """Second-order Richardson value from a grid and its refinement"""
    return (4.0 * fine - coarse) / 3.0


def extrapolated_eigen(
    grid: RadialGrid,
    a: RadialProfile,
    domain: DomainTag = DomainTag.FULL,
    zero_set: Optional[ZeroSet] = None,
) -> EigenExtrapolation:
    coarse = principal_eigen(grid, a, domain, zero_set).value
    if math.isinf(coarse):
        return EigenExtrapolation(coarse=coarse, fine=coarse, extrapolated=coarse)
    finer = grid.refined()
    fine = principal_eigen(finer, a, domain, zero_set).value
    finest = principal_eigen(finer.refined(), a, domain, zero_set).value
    order = None
    if fine != finest and coarse != fine:
        order = math.log2(abs(coarse - fine) / abs(fine - finest))
    return EigenExtrapolation(
        coarse=coarse,
        fine=fine,
        extrapolated=richardson(coarse, fine),
        observed_order=order,
    )


class TruncationBias(BaseModel):
    radius: float
    extended_radius: float
    value: float
    extended_value: float

    @property
    def bias(self) -> float:
        return self.value - self.extended_value


def truncation_bias(grid: RadialGrid, a: RadialProfile) -> TruncationBias:
    """lambda_1 at R_inf against the same mesh continued out to at least 2 R_inf"""
    if grid.kind != DomainKind.WHOLE:
        raise ValueError("Truncation bias is only defined for whole-space grids")
    extended = grid.extended(2 * grid.radius)
    value = principal_eigen(grid, a).value
    extended_value = principal_eigen(extended, a).value
    return TruncationBias(
        radius=grid.radius,
        extended_radius=extended.radius,
        value=value,
        extended_value=extended_value,
    )


class WindowCheck(BaseModel):
    lam: float
    lam1: float
    lamstar: float
    inside: bool
    lower_margin: float
    upper_margin: float


def check_lambda_window(
    lam: float, lam1: EigenResult, lamstar: Union[EigenResult, float]
) -> WindowCheck:
    """lambda_1 < lambda < lambda_*, with both margins"""
    upper = lamstar.value if isinstance(lamstar, EigenResult) else float(lamstar)
    lower_margin = lam - lam1.value
    upper_margin = upper - lam
    return WindowCheck(
        lam=lam,
        lam1=lam1.value,
        lamstar=upper,
        inside=lower_margin > 0 and upper_margin > 0,
        lower_margin=lower_margin,
        upper_margin=upper_margin,
    )


class RayleighCheck(BaseModel):
    dirichlet: float
    weighted: float
    slack: float
    holds: bool
    strict: bool


def rayleigh_necessary_check(u: Field, spec: ProblemSpec, grid: RadialGrid) -> RayleighCheck:
    """|u|^2 <= lam int a u^2 for a positive solution u"""
    sampled = spec.sample(grid)
    dirichlet = float(u.values @ grid.stiffness().matvec(u.values))
    weighted = spec.lam * float(np.dot(grid.weights, sampled.a * u.values**2))
    slack = weighted - dirichlet
    tol = CERTIFICATE_TOL * max(weighted, 1.0)
    return RayleighCheck(
        dirichlet=dirichlet,
        weighted=weighted,
        slack=slack,
        holds=slack >= -tol,
        strict=slack > tol,
    )
