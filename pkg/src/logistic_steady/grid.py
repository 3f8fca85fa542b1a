"""
Radial grid module

This module discretizes radially symmetric domains (a truncated copy of R^N,
a ball or an annulus) with a finite-volume mesh whose face radii make the
discrete Laplacian exact on radial harmonic functions and on r^2. It provides
the quadrature, the stiffness matrix and the linear solves every solver stage
is built on.
"""

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel
from scipy import sparse
from scipy.linalg import solveh_banded
from scipy.optimize import brentq

logger = logging.getLogger("LogisticSteadyLogger")

MIN_INTERVALS = 16


class DomainKind(str, Enum):
    WHOLE = "whole"
    BALL = "ball"
    ANNULUS = "annulus"


class BoundaryCondition(str, Enum):
    DIRICHLET = "dirichlet-zero"
    DECAY = "decay-matched"


class FieldRole(str, Enum):
    GENERIC = "generic"
    SOLUTION = "solution"
    SUBSOLUTION = "subsolution"
    SUPERSOLUTION = "supersolution"
    POTENTIAL = "potential"
    EIGENFUNCTION = "eigenfunction"
    COEFFICIENT = "coefficient"
    RESIDUAL = "residual"


def unit_ball_volume(dimension: int) -> float:
    """Volume of the unit ball in R^N"""
    return math.pi ** (dimension / 2) / math.gamma(dimension / 2 + 1)


def critical_exponent(dimension: int) -> float:
    """Sobolev exponent 2N/(N-2)"""
    return 2 * dimension / (dimension - 2)


class GridSummary(BaseModel):
    kind: DomainKind
    dimension: int
    intervals: int
    radius: float
    inner_radius: float
    stretch: float
    volume: float


@dataclass(frozen=True, eq=False)
class Stiffness:
    """Symmetric tridiagonal stiffness matrix of the radial Dirichlet form.

    ``diag`` and ``off`` hold the main and first off diagonal; ``free`` marks
    the nodes where the equation is posed (Dirichlet nodes are fixed at zero).
    """

    diag: np.ndarray
    off: np.ndarray
    free: np.ndarray
    bc: BoundaryCondition

    def matvec(self, values: np.ndarray) -> np.ndarray:
        out = self.diag * values
        out[:-1] += self.off * values[1:]
        out[1:] += self.off * values[:-1]
        return out

    def to_sparse(self) -> sparse.csc_matrix:
        return sparse.diags(
            [self.off, self.diag, self.off], [-1, 0, 1], format="csc"
        )

    def reduced(
        self, mask: np.ndarray, shift: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Restrict to the nodes in ``mask``; couplings across removed nodes vanish."""
        idx = np.flatnonzero(mask)
        diag = self.diag[idx].copy()
        if shift is not None:
            diag += shift[idx]
        adjacent = np.diff(idx) == 1
        off = np.where(adjacent, self.off[idx[:-1]], 0.0)
        return diag, off


def solve_tridiagonal(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric positive definite tridiagonal system.

    Raises:
        numpy.linalg.LinAlgError: if the matrix is not positive definite
    """
    if diag.size == 0:
        return np.zeros(0)
    ab = np.zeros((2, diag.size))
    ab[0, 1:] = off
    ab[1] = diag
    return solveh_banded(ab, rhs, lower=False, check_finite=False)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes r_0 < ... < r_M of a radial mesh with control-volume quadrature"""

    dimension: int
    nodes: np.ndarray
    kind: DomainKind
    stretch: float = 1.0
    inner_radius: float = 0.0
    anchor: Optional[float] = None

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def intervals(self) -> int:
        return self.size - 1

    @property
    def radius(self) -> float:
        return float(self.nodes[-1])

    @property
    def omega(self) -> float:
        return unit_ball_volume(self.dimension)

    @property
    def default_bc(self) -> BoundaryCondition:
        if self.kind == DomainKind.WHOLE:
            return BoundaryCondition.DECAY
        return BoundaryCondition.DIRICHLET

    @cached_property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @cached_property
    def conductance(self) -> np.ndarray:
        """Flux coefficients c_{i+1/2}, exact for radial harmonic functions"""
        n, omega = self.dimension, self.omega
        left, right = self.nodes[:-1], self.nodes[1:]
        cond = np.empty(self.intervals)
        origin = left == 0.0
        if origin.any():
            # Only the first interval of a ball or whole-space grid touches r = 0.
            r1 = right[origin]
            cond[origin] = n * omega * (r1 / 2) ** (n - 1) / r1
        inner = ~origin
        gap = -np.expm1((n - 2) * np.log(left[inner] / right[inner]))
        cond[inner] = n * omega * (n - 2) / (left[inner] ** (2 - n) * gap)
        return cond

    @cached_property
    def face_powers(self) -> np.ndarray:
        """rho^N at every face, including the two boundary faces"""
        n, omega = self.dimension, self.omega
        inner = self.conductance * (self.nodes[1:] ** 2 - self.nodes[:-1] ** 2)
        inner /= 2 * n * omega
        return np.concatenate(
            ([self.nodes[0] ** n], inner, [self.nodes[-1] ** n])
        )

    @cached_property
    def faces(self) -> np.ndarray:
        return self.face_powers ** (1.0 / self.dimension)

    @cached_property
    def weights(self) -> np.ndarray:
        return self.omega * np.diff(self.face_powers)

    @property
    def volume(self) -> float:
        return self.omega * (self.radius**self.dimension - self.inner_radius**self.dimension)

    def decay_coefficient(self) -> float:
        """Conductance of the exterior (R, inf) for the r^{2-N} tail"""
        n = self.dimension
        return n * self.omega * (n - 2) * self.radius ** (n - 2)

    def free_mask(self, bc: Optional[BoundaryCondition] = None) -> np.ndarray:
        bc = BoundaryCondition(bc or self.default_bc)
        if bc == BoundaryCondition.DECAY and self.kind != DomainKind.WHOLE:
            raise ValueError(
                f"Decay-matched boundary condition needs a whole-space grid, got {self.kind.value}"
            )
        free = np.ones(self.size, dtype=bool)
        if bc == BoundaryCondition.DIRICHLET:
            free[-1] = False
        if self.kind == DomainKind.ANNULUS:
            free[0] = False
        return free

    def stiffness(self, bc: Optional[BoundaryCondition] = None) -> Stiffness:
        bc = BoundaryCondition(bc or self.default_bc)
        free = self.free_mask(bc)
        cond = self.conductance
        diag = np.zeros(self.size)
        diag[:-1] += cond
        diag[1:] += cond
        if bc == BoundaryCondition.DECAY:
            diag[-1] += self.decay_coefficient()
        return Stiffness(diag=diag, off=-cond, free=free, bc=bc)

    def refined(self) -> "RadialGrid":
        """Nested grid with twice the intervals; every current node is kept"""
        return build_grid(
            self.kind,
            2 * self.intervals,
            math.sqrt(self.stretch),
            radius=self.radius,
            inner_radius=self.inner_radius,
            dimension=self.dimension,
            anchor=self.anchor,
        )

    def extended(self, radius: float) -> "RadialGrid":
        """Same mesh continued with the same stretch until it reaches ``radius``"""
        if self.kind != DomainKind.WHOLE:
            raise ValueError("Only whole-space grids can be extended")
        if radius <= self.radius:
            return self
        first = float(self.spacing[0])
        q = self.stretch
        if q == 1.0:
            intervals = math.ceil(radius / first)
            outer = intervals * first
        else:
            intervals = math.ceil(math.log1p(radius * (q - 1) / first) / math.log(q))
            outer = first * math.expm1(intervals * math.log(q)) / (q - 1)
        return build_grid(
            self.kind, intervals, q, radius=outer, dimension=self.dimension
        )

    def subgrid(self, radius: float) -> "RadialGrid":
        """Ball grid on [0, radius] reusing the nodes below ``radius``"""
        if self.kind == DomainKind.ANNULUS:
            raise ValueError("Sub-balls are only defined for grids containing the origin")
        if not 0.0 < radius < self.radius:
            raise ValueError(f"Sub-ball radius {radius} outside (0, {self.radius})")
        local = float(np.interp(radius, self.nodes[1:], self.spacing))
        kept = self.nodes[self.nodes < radius - 0.25 * local]
        nodes = np.append(kept, radius)
        if nodes.size - 1 < MIN_INTERVALS:
            raise ValueError(
                f"Sub-ball of radius {radius} holds only {nodes.size - 1} intervals"
            )
        return RadialGrid(
            dimension=self.dimension,
            nodes=nodes,
            kind=DomainKind.BALL,
            stretch=self.stretch,
        )

    def interpolate(self, values: np.ndarray, radii: Union[float, np.ndarray]) -> np.ndarray:
        """Piecewise-linear interpolation of nodal values, zero beyond the grid"""
        return np.interp(radii, self.nodes, values, right=0.0)

    def summary(self) -> GridSummary:
        return GridSummary(
            kind=self.kind,
            dimension=self.dimension,
            intervals=self.intervals,
            radius=self.radius,
            inner_radius=self.inner_radius,
            stretch=self.stretch,
            volume=self.volume,
        )

    def to_dict(self) -> Dict[str, Any]:
        data = self.summary().model_dump(mode="json")
        data["nodes"] = self.nodes.tolist()
        data["weights"] = self.weights.tolist()
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def anchored_stretch(intervals: int, stretch: float, length: float, anchor: float) -> Tuple[float, int]:
    """Stretch ratio close to ``stretch`` that puts node k exactly at ``anchor``.

    Returns the adjusted ratio and the node index k.
    """
    ratio = anchor / length
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"Anchor {anchor} must lie strictly inside (0, {length})")
    if stretch == 1.0:
        k = ratio * intervals
        if not math.isclose(k, round(k), rel_tol=0.0, abs_tol=1e-9):
            raise ValueError(f"Uniform grid with {intervals} intervals has no node at r = {anchor}")
        return 1.0, int(round(k))
    log_q = math.log(stretch)
    k = round(math.log1p(ratio * math.expm1(intervals * log_q)) / log_q)
    k = min(max(k, 1), intervals - 1)

    def mismatch(q: float) -> float:
        lq = math.log(q)
        return math.expm1(k * lq) / math.expm1(intervals * lq) - ratio

    if k / intervals <= ratio:
        raise ValueError(f"Stretch {stretch} cannot place node {k} of {intervals} at r = {anchor}")
    upper = stretch
    while mismatch(upper) > 0:
        upper = 1.0 + 2.0 * (upper - 1.0)
    adjusted = brentq(mismatch, 1.0 + 1e-12, upper, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    return float(adjusted), int(k)


def build_grid(
    kind: Union[DomainKind, str],
    intervals: int,
    stretch: float = 1.0,
    radius: float = 1.0,
    inner_radius: float = 0.0,
    dimension: int = 3,
    anchor: Optional[float] = None,
) -> RadialGrid:
    """Build a radial grid with geometric spacing growing toward the outer boundary.

    Args:
        kind: whole, ball or annulus
        intervals: number of intervals M (the grid has M + 1 nodes)
        stretch: ratio between consecutive intervals, 1 for a uniform mesh
        radius: R for a ball, R_inf for the truncated whole space, R_out for an annulus
        inner_radius: R_in for an annulus
        dimension: N >= 3
        anchor: radius that must be a node (coefficient jumps); the stretch is
            adjusted slightly to hit it

    Returns:
        RadialGrid
    """
    kind = DomainKind(kind)
    if int(dimension) != dimension or dimension < 3:
        raise ValueError(f"Dimension must be an integer N >= 3, got {dimension}")
    if intervals < MIN_INTERVALS:
        raise ValueError(f"Grid needs at least {MIN_INTERVALS} intervals, got {intervals}")
    if radius <= 0:
        raise ValueError(f"Radius must be positive, got {radius}")
    if stretch < 1:
        raise ValueError(f"Stretch ratio must be at least 1, got {stretch}")
    if kind == DomainKind.ANNULUS:
        if not 0 < inner_radius < radius:
            raise ValueError(
                f"Annulus needs 0 < R_in < R_out, got R_in={inner_radius}, R_out={radius}"
            )
    else:
        inner_radius = 0.0

    length = radius - inner_radius
    anchor_index = None
    if anchor is not None:
        stretch, anchor_index = anchored_stretch(intervals, stretch, length, anchor - inner_radius)
    steps = np.arange(intervals + 1)
    if stretch == 1.0:
        offsets = length * steps / intervals
    else:
        log_q = math.log(stretch)
        offsets = length * np.expm1(steps * log_q) / math.expm1(intervals * log_q)
    nodes = inner_radius + offsets
    nodes[0] = inner_radius
    nodes[-1] = radius
    if anchor_index is not None:
        nodes[anchor_index] = anchor

    grid = RadialGrid(
        dimension=int(dimension),
        nodes=nodes,
        kind=kind,
        stretch=float(stretch),
        inner_radius=float(inner_radius),
        anchor=None if anchor is None else float(anchor),
    )
    logger.debug(
        f"Built {kind.value} grid: N={dimension}, M={intervals}, R={radius}, "
        f"stretch={stretch}, first spacing={grid.spacing[0]:.3e}"
    )
    return grid


@dataclass(frozen=True, eq=False)
class Field:
    """Values at the nodes of a grid, tagged with the role they play"""

    grid: RadialGrid
    values: np.ndarray
    role: FieldRole = FieldRole.GENERIC

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValueError(
                f"Field has shape {values.shape}, grid has {self.grid.size} nodes"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: RadialGrid, fn: Any, role: FieldRole = FieldRole.GENERIC) -> "Field":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float) * np.ones(grid.size), role)

    def with_values(self, values: np.ndarray, role: Optional[FieldRole] = None) -> "Field":
        return Field(self.grid, values, role or self.role)

    def integral(self) -> float:
        return integrate(self.grid, self)

    def sup(self) -> float:
        return float(self.values.max())

    def inf(self) -> float:
        return float(self.values.min())

    def weighted_norm(self) -> float:
        return float(np.sqrt(np.dot(self.grid.weights, self.values**2)))

    def energy_norm(self, bc: Optional[BoundaryCondition] = None) -> float:
        return energy_norm(self.grid, self, bc)

    def __call__(self, radii: Union[float, np.ndarray]) -> np.ndarray:
        return self.grid.interpolate(self.values, radii)


def _check_field(grid: RadialGrid, f: Field) -> None:
    if f.values.shape != (grid.size,):
        raise ValueError(
            f"Dimension mismatch: field has {f.values.size} values, grid has {grid.size} nodes"
        )


def apply_laplacian(
    grid: RadialGrid, u: Field, bc: Optional[BoundaryCondition] = None
) -> Field:
    """Discrete -Delta u = W^{-1} A u, zero at Dirichlet nodes"""
    _check_field(grid, u)
    stiffness = grid.stiffness(bc)
    values = stiffness.matvec(u.values) / grid.weights
    values[~stiffness.free] = 0.0
    return Field(grid, values, FieldRole.GENERIC)


def integrate(grid: RadialGrid, f: Field) -> float:
    _check_field(grid, f)
    return float(np.dot(grid.weights, f.values))


def gradient_form(
    grid: RadialGrid, u: Field, v: Field, bc: Optional[BoundaryCondition] = None
) -> float:
    """Discrete integral of grad u . grad v"""
    _check_field(grid, u)
    _check_field(grid, v)
    return float(np.dot(u.values, grid.stiffness(bc).matvec(v.values)))


def energy_norm(grid: RadialGrid, u: Field, bc: Optional[BoundaryCondition] = None) -> float:
    return math.sqrt(max(gradient_form(grid, u, u, bc), 0.0))


def solve_poisson(
    grid: RadialGrid,
    f: Field,
    bc: Optional[BoundaryCondition] = None,
    role: FieldRole = FieldRole.POTENTIAL,
) -> Field:
    """Solve -Delta w = f with zero Dirichlet data or the decay-matched tail"""
    _check_field(grid, f)
    stiffness = grid.stiffness(bc)
    free = stiffness.free
    diag, off = stiffness.reduced(free)
    values = np.zeros(grid.size)
    values[free] = solve_tridiagonal(diag, off, (grid.weights * f.values)[free])
    return Field(grid, values, role)
