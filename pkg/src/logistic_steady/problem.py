"""
Problem data module

Coefficient profiles, power-sum nonlinearities and the problem definition,
together with the hypothesis checks, the derived comparison constants and the
carrying-capacity profiles d (the Aubin-Talenti instanton on R^N and the
Green profile on a ball).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from .errors import HypothesisError
from .grid import (
    BoundaryCondition,
    DomainKind,
    Field,
    FieldRole,
    RadialGrid,
    apply_laplacian,
    critical_exponent,
    solve_poisson,
)

logger = logging.getLogger("LogisticSteadyLogger")

# Nodewise inequalities below this size count as equalities.
CERTIFICATE_TOL = 1e-9
COMPARISON_SAMPLES = 200


@dataclass(frozen=True)
class Nonlinearity:
    """g(s) = sum c_k s^{p_k} for s > 0 and 0 for s <= 0"""

    terms: Tuple[Tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("Nonlinearity needs at least one (coefficient, power) term")
        for coef, power in self.terms:
            if coef < 0:
                raise ValueError(f"Nonlinearity coefficients must be nonnegative, got {coef}")
            if power < 1:
                raise ValueError(f"Nonlinearity powers must be at least 1, got {power}")

    @classmethod
    def power(cls, exponent: float, coefficient: float = 1.0) -> "Nonlinearity":
        return cls(((float(coefficient), float(exponent)),))

    @property
    def min_power(self) -> float:
        return min(p for c, p in self.terms if c > 0)

    @property
    def max_power(self) -> float:
        return max(p for c, p in self.terms if c > 0)

    def _eval(self, s: Any, kind: str) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        sp = np.maximum(s, 0.0)
        out = np.zeros_like(sp)
        for coef, power in self.terms:
            if kind == "value":
                out = out + coef * sp**power
            elif kind == "derivative":
                out = out + coef * power * sp ** (power - 1)
            else:
                out = out + coef * sp ** (power + 1) / (power + 1)
        if kind == "derivative":
            out = np.where(s > 0, out, 0.0)
        return out

    def __call__(self, s: Any) -> np.ndarray:
        return self._eval(s, "value")

    def derivative(self, s: Any) -> np.ndarray:
        return self._eval(s, "derivative")

    def primitive(self, s: Any) -> np.ndarray:
        """G(s) = int_0^s g"""
        return self._eval(s, "primitive")

    def plus(self, other: "Nonlinearity") -> "Nonlinearity":
        return Nonlinearity(self.terms + other.terms)

    def label(self) -> str:
        return " + ".join(f"{c:g}*s^{p:g}" for c, p in self.terms)


@dataclass(frozen=True)
class RadialProfile:
    """A nonnegative radial coefficient given by a family name and parameters"""

    family: str
    fn: Callable[[np.ndarray], np.ndarray]
    params: Dict[str, Any] = field(default_factory=dict)
    support_radius: Optional[float] = None
    zero_radius: Optional[float] = None

    def __call__(self, radii: Any) -> np.ndarray:
        radii = np.asarray(radii, dtype=float)
        return np.asarray(self.fn(radii), dtype=float) * np.ones_like(radii)

    def sample(self, grid: RadialGrid, role: FieldRole = FieldRole.COEFFICIENT) -> Field:
        return Field(grid, self(grid.nodes), role)

    def scaled(self, factor: float) -> "RadialProfile":
        fn = self.fn
        return replace(
            self,
            fn=lambda r: factor * np.asarray(fn(r), dtype=float),
            params={**self.params, "scale": factor * self.params.get("scale", 1.0)},
        )

    def describe(self) -> Dict[str, Any]:
        return {"family": self.family, **self.params}


class ZeroSetKind(str, Enum):
    EMPTY = "empty"
    MEASURE_ZERO = "measure-zero"
    BALL = "ball"


@dataclass(frozen=True)
class ZeroSet:
    kind: ZeroSetKind = ZeroSetKind.EMPTY
    radius: float = 0.0

    @property
    def has_interior(self) -> bool:
        return self.kind == ZeroSetKind.BALL and self.radius > 0


class ProblemVariant(str, Enum):
    STANDARD = "standard"
    FAST_GROWTH = "fast-growth"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class ProblemSpec:
    """-Delta u = lam a u - b g(u) - mu h on a radial domain.

    When ``upsilon`` is set, b is taken as lam * a * upsilon.
    """

    dimension: int
    lam: float
    mu: float
    a: RadialProfile
    b: Optional[RadialProfile]
    h: RadialProfile
    g: Nonlinearity
    beta: float
    C1: Optional[float] = None
    q: float = 2.0
    s: float = 4.0
    C2: Optional[float] = None
    zero_set: ZeroSet = ZeroSet()
    upsilon: Optional[RadialProfile] = None
    domain: DomainKind = DomainKind.WHOLE

    def __post_init__(self) -> None:
        if self.dimension < 3:
            raise ValueError(f"Dimension must be at least 3, got {self.dimension}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.b is None and self.upsilon is None:
            raise ValueError("Either b or upsilon must be given")

    def with_mu(self, mu: float) -> "ProblemSpec":
        return replace(self, mu=float(mu))

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return replace(self, lam=float(lam))

    def b_values(self, radii: np.ndarray) -> np.ndarray:
        if self.b is not None:
            return self.b(radii)
        assert self.upsilon is not None
        return self.lam * self.a(radii) * self.upsilon(radii)

    def sample(self, grid: RadialGrid, d: Optional[Field] = None) -> "SampledProblem":
        if grid.dimension != self.dimension:
            raise ValueError(
                f"Grid dimension {grid.dimension} does not match problem dimension {self.dimension}"
            )
        free = grid.free_mask()
        radii = grid.nodes
        with np.errstate(divide="ignore", invalid="ignore"):
            b = np.where(free, self.b_values(radii), 0.0)
            h = np.where(free, self.h(radii), 0.0)
        if d is None:
            d_values = aubin_talenti(radii, self.dimension)
        else:
            d_values = d.values
        return SampledProblem(
            grid=grid,
            spec=self,
            a=self.a(radii),
            b=b,
            h=h,
            d=d_values,
            free=free,
        )


@dataclass(frozen=True, eq=False)
class SampledProblem:
    """Problem coefficients evaluated at the nodes of one grid"""

    grid: RadialGrid
    spec: ProblemSpec
    a: np.ndarray
    b: np.ndarray
    h: np.ndarray
    d: np.ndarray
    free: np.ndarray

    @property
    def lam(self) -> float:
        return self.spec.lam

    @property
    def mu(self) -> float:
        return self.spec.mu

    @property
    def g(self) -> Nonlinearity:
        return self.spec.g

    def field(self, name: str) -> Field:
        return Field(self.grid, getattr(self, name), FieldRole.COEFFICIENT)


def aubin_talenti(radii: Any, dimension: int) -> np.ndarray:
    """d(r) = (1 + r^2)^{-(N-2)/2}"""
    radii = np.asarray(radii, dtype=float)
    return (1.0 + radii**2) ** (-(dimension - 2) / 2)


def lebesgue_norm(grid: RadialGrid, values: np.ndarray, exponent: float) -> float:
    if math.isinf(exponent):
        return float(np.max(np.abs(values)))
    return float(np.dot(grid.weights, np.abs(values) ** exponent) ** (1.0 / exponent))


def _tail_slope(radii: np.ndarray, values: np.ndarray) -> Optional[float]:
    """Log-log slope of a positive tail; None when the tail vanishes"""
    positive = values > 0
    if positive.sum() < 3 or not positive[-1]:
        return None
    return float(np.polyfit(np.log(radii[positive]), np.log(values[positive]), 1)[0])


def _integrable_tail(grid: RadialGrid, values: np.ndarray, exponent: float) -> Tuple[bool, Optional[float]]:
    """Whether sum w |f|^t converges as R_inf grows, judged on r^N |f|^t"""
    outer = grid.nodes >= grid.radius / 8
    radii = grid.nodes[outer]
    slope = _tail_slope(radii, radii**grid.dimension * np.abs(values[outer]) ** exponent)
    if slope is None:
        return True, None
    return slope < -1e-2, slope


class HypothesisCheck(BaseModel):
    name: str
    passed: bool
    detail: str = ""
    value: Optional[float] = None


class HypothesisReport(BaseModel):
    variant: ProblemVariant
    checks: List[HypothesisCheck] = []

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[HypothesisCheck]:
        return [check for check in self.checks if not check.passed]

    def get(self, name: str) -> HypothesisCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def require(self) -> None:
        """Raise HypothesisError for the first failing check"""
        failures = self.failures()
        if failures:
            raise HypothesisError(failures[0].name, failures[0].detail)


def _check_a(spec: ProblemSpec, grid: RadialGrid, sampled: SampledProblem, variant: ProblemVariant) -> HypothesisCheck:
    a = sampled.a[sampled.free]
    if not np.all(np.isfinite(a)) or a.min() <= 0:
        return HypothesisCheck(name="H a", passed=False, detail="a must be positive and bounded at every node")
    if variant == ProblemVariant.BOUNDED:
        return HypothesisCheck(name="H a''", passed=True, detail="a positive and bounded", value=float(a.max()))
    ok, slope = _integrable_tail(grid, sampled.a, spec.dimension / 2)
    detail = "a in L^{N/2}" if ok else "a is not in L^{N/2}: r^N a^{N/2} does not decay"
    return HypothesisCheck(name="H a", passed=ok, detail=detail, value=slope)


def _log_slope(s: np.ndarray, ratio: np.ndarray) -> float:
    return float(np.polyfit(np.log(s), np.log(np.maximum(ratio, 1e-300)), 1)[0])


def small_argument_slope(g: Nonlinearity, exponent: float) -> float:
    """Log slope of g(s)/s^exponent as s -> 0; zero for g vanishing near 0"""
    small = np.logspace(-6, -12, 13)
    ratio = g(small) / small**exponent
    if np.all(ratio == 0):
        return 0.0
    return _log_slope(small, ratio)


def _check_g(spec: ProblemSpec, variant: ProblemVariant) -> List[HypothesisCheck]:
    g = spec.g
    if np.any(g(np.array([-1.0, -1e-3])) != 0):
        return [HypothesisCheck(name="H g", passed=False, detail="g must vanish on s <= 0")]
    large = np.logspace(1, 8, 15)
    growth = g(large) / large
    growth_slope = _log_slope(large, growth)
    infinity_ok = growth_slope > 1e-3 and growth[-1] > growth[0]

    if variant == ProblemVariant.FAST_GROWTH:
        name = "H g'"
        slope = small_argument_slope(g, 1.0)
        # g(s)/s -> 0: the ratio shrinks with s
        zero_ok = slope > 1e-3 or np.all(g(np.logspace(-6, -12, 13)) == 0)
        zero_detail = f"g(s)/s -> 0 at zero (log slope {slope:.3f})"
    else:
        name = "H g"
        slope = small_argument_slope(g, 1 + spec.beta)
        zero_ok = slope > -1e-3
        zero_detail = f"limsup g(s)/s^(1+beta) finite at zero (log slope {slope:.3f})"

    if not zero_ok:
        detail = f"fails at zero: {zero_detail}"
    elif not infinity_ok:
        detail = f"g(s)/s does not grow to infinity (log slope {growth_slope:.3f})"
    else:
        detail = zero_detail
    return [HypothesisCheck(name=name, passed=bool(zero_ok and infinity_ok), detail=detail, value=slope)]


def _check_b(spec: ProblemSpec, grid: RadialGrid, sampled: SampledProblem, variant: ProblemVariant) -> List[HypothesisCheck]:
    free = sampled.free
    b, a, d = sampled.b[free], sampled.a[free], sampled.d[free]
    radii = grid.nodes[free]
    if not np.all(np.isfinite(b)) or b.min() < 0 or b.max() == 0:
        return [HypothesisCheck(name="H b", passed=False, detail="b must be finite, nonnegative and not identically zero")]
    checks = []
    if variant == ProblemVariant.FAST_GROWTH:
        assert spec.upsilon is not None
        ups = spec.upsilon(radii)
        ok = bool(np.all(np.isfinite(ups)) and ups.min() >= 0)
        checks.append(
            HypothesisCheck(name="H b'", passed=ok, detail="b = lam a upsilon with upsilon locally bounded", value=float(ups.max()))
        )
    elif variant == ProblemVariant.BOUNDED:
        dist = grid.radius - radii
        tight = float(np.max(b * dist**spec.beta / a))
        ok = spec.C1 is None or tight <= spec.C1 * (1 + CERTIFICATE_TOL)
        checks.append(
            HypothesisCheck(name="H b''", passed=ok, detail=f"tightest C1 for b <= C1 a dist^-beta is {tight:.6g}", value=tight)
        )
    else:
        tight = float(np.max(b * d**spec.beta / a))
        ok = spec.C1 is None or tight <= spec.C1 * (1 + CERTIFICATE_TOL)
        checks.append(
            HypothesisCheck(name="H b", passed=ok, detail=f"tightest C1 for b <= C1 a d^-beta is {tight:.6g}", value=tight)
        )

    zero = spec.zero_set
    zeros = b == 0
    if zero.kind == ZeroSetKind.BALL:
        inside = radii <= zero.radius
        ok = bool(np.all(zeros[inside]) and not np.any(zeros[~inside]))
        detail = f"b vanishes exactly on the closed ball of radius {zero.radius}"
    else:
        ok = not np.any(zeros[1:] & zeros[:-1])
        detail = "zero set of b has measure zero"
    checks.append(HypothesisCheck(name="H b zero set", passed=ok, detail=detail if ok else f"violated: {detail}"))
    return checks


def tail_decay_constants(grid: RadialGrid, h: np.ndarray, q: float) -> Tuple[np.ndarray, np.ndarray]:
    """R^{N/r'} |h|_{L^q(r > R)} over dyadic R, with 1/q + 1/r' = 1"""
    conj = q / (q - 1)
    radii = []
    values = []
    radius = grid.radius / 2
    while radius >= grid.nodes[1]:
        outside = grid.nodes > radius
        norm = float(np.dot(grid.weights[outside], h[outside] ** q) ** (1 / q))
        radii.append(radius)
        values.append(radius ** (grid.dimension / conj) * norm)
        radius /= 2
    return np.array(radii[::-1]), np.array(values[::-1])


def _check_h(spec: ProblemSpec, grid: RadialGrid, sampled: SampledProblem, variant: ProblemVariant) -> List[HypothesisCheck]:
    h = sampled.h
    if not np.all(np.isfinite(h)) or h.min() < 0:
        return [HypothesisCheck(name="H h", passed=False, detail="h must be finite and nonnegative")]
    if h.max() == 0:
        ok = spec.mu == 0
        return [HypothesisCheck(name="H h", passed=ok, detail="h is identically zero")]

    n = spec.dimension
    if variant == ProblemVariant.BOUNDED:
        ok = spec.s > n
        return [HypothesisCheck(name="H h''", passed=ok, detail=f"h in L^s with s={spec.s} > N required", value=lebesgue_norm(grid, h, spec.s))]

    if variant == ProblemVariant.FAST_GROWTH:
        support = grid.nodes[h > 0].max()
        compact = support < grid.radius / 2
        a = sampled.a
        c9 = float(np.max(h / a))
        return [
            HypothesisCheck(
                name="H h'",
                passed=bool(compact and np.isfinite(c9)),
                detail=f"h supported in r <= {support:.4g}, h <= C9 a with C9 = {c9:.6g}",
                value=c9,
            )
        ]

    checks = []
    exponents_ok = spec.q > n / 2 and spec.s > n
    tails = [_integrable_tail(grid, h, t)[0] for t in (1.0, spec.q, spec.s)]
    ok = exponents_ok and all(tails)
    checks.append(
        HypothesisCheck(
            name="H h",
            passed=ok,
            detail=f"h in L^1, L^q (q={spec.q}) and L^s (s={spec.s})" if ok else "h fails the integrability tail test or exponent ranges",
        )
    )
    radii, values = tail_decay_constants(grid, h, spec.q)
    c2 = float(values.max()) if values.size else 0.0
    window = (radii >= grid.radius / 64) & (radii <= grid.radius / 4)
    slope = _tail_slope(radii[window], values[window]) if window.sum() >= 3 else None
    alo_ok = slope is None or slope <= 0.1
    if spec.C2 is not None:
        alo_ok = alo_ok and c2 <= spec.C2 * (1 + CERTIFICATE_TOL)
    checks.append(
        HypothesisCheck(
            name="H h decay",
            passed=alo_ok,
            detail=f"sup_R R^(N/r') |h|_Lq(r>R) = {c2:.6g}" + ("" if slope is None else f", tail slope {slope:.3f}"),
            value=c2,
        )
    )
    return checks


def validate_hypotheses(
    spec: ProblemSpec,
    grid: RadialGrid,
    variant: ProblemVariant = ProblemVariant.STANDARD,
    d: Optional[Field] = None,
    window: Optional[Tuple[float, float]] = None,
) -> HypothesisReport:
    """Check the standing hypotheses on the sampled problem.

    Failures are report entries; nothing here raises. ``window`` carries the
    computed (lambda_1, lambda_*) when the lambda hypothesis should be checked.
    """
    variant = ProblemVariant(variant)
    sampled = spec.sample(grid, d)
    report = HypothesisReport(variant=variant)
    report.checks.append(_check_a(spec, grid, sampled, variant))
    report.checks.extend(_check_g(spec, variant))
    report.checks.extend(_check_b(spec, grid, sampled, variant))
    report.checks.extend(_check_h(spec, grid, sampled, variant))
    if window is not None:
        lam1, lamstar = window
        ok = lam1 < spec.lam < lamstar
        report.checks.append(
            HypothesisCheck(
                name="H lambda",
                passed=ok,
                detail=f"lambda_1={lam1:.8g} < lambda={spec.lam:.8g} < lambda_*={lamstar:.8g}",
                value=min(spec.lam - lam1, lamstar - spec.lam),
            )
        )
    report.checks.append(
        HypothesisCheck(name="H mu", passed=spec.mu >= 0, detail=f"mu = {spec.mu}", value=spec.mu)
    )
    for check in report.failures():
        logger.warning(f"Hypothesis {check.name} failed: {check.detail}")
    return report


class DerivedConstants(BaseModel):
    s0: float
    C4: float
    l: float
    varsigma: float = 1.0
    ell: float
    p: float
    beta: float
    C1: float
    comparison_margin: Optional[float] = None

    def k(self, s: Any) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.where(s > 0, np.maximum(s, 0.0) ** self.beta, 0.0)


def truncation_exponent(dimension: int) -> float:
    return min(2.0, (dimension + 2) / (dimension - 2))


def derive_constants(
    spec: ProblemSpec, grid: RadialGrid, d: Optional[Field] = None
) -> DerivedConstants:
    """Find s0, C4, l and ell = varsigma * l for the comparison nonlinearity k(s) = s^beta"""
    sampled = spec.sample(grid, d)
    free = sampled.free
    beta = spec.beta
    if spec.C1 is not None:
        C1 = float(spec.C1)
    else:
        C1 = float(np.max(sampled.b[free] * sampled.d[free] ** beta / sampled.a[free]))
    d_max = float(sampled.d.max())

    slope = small_argument_slope(spec.g, 1 + beta)
    if slope <= -1e-3:
        raise HypothesisError("H g", f"g(s)/s^(1+beta) is unbounded at zero (log slope {slope:.3f})")

    for k in range(31):
        s0 = 2.0**-k
        samples = s0 * np.logspace(-12, 0, 400)
        ratio = C1 * spec.g(samples) / (spec.lam * samples ** (1 + beta))
        if not np.all(np.isfinite(ratio)):
            continue
        C4 = max(1 + 1e-6, (d_max / s0) ** beta, float(ratio.max()))
        break
    else:
        raise HypothesisError("H g", "no admissible s0 in {1, 1/2, ..., 2^-30}")

    l = C4 ** (-1.0 / beta)
    consts = DerivedConstants(
        s0=s0,
        C4=C4,
        l=l,
        ell=l,
        p=truncation_exponent(spec.dimension),
        beta=beta,
        C1=C1,
    )
    margin = check_comparison_bound(sampled, consts)
    consts = consts.model_copy(update={"comparison_margin": margin})
    logger.info(
        f"Derived constants: s0={s0}, C4={C4:.8g}, l={l:.8g}, ell={l:.8g}, "
        f"C1={C1:.6g}, comparison margin={margin:.3e}"
    )
    return consts


def check_comparison_bound(sampled: SampledProblem, consts: DerivedConstants) -> float:
    """Smallest relative slack of lam a s k(s/(l d)) - b g(s) over nodes and s <= s0.

    A nonnegative value means the comparison bound holds on the whole sample.
    """
    s = consts.s0 * np.logspace(-8, 0, COMPARISON_SAMPLES)
    free = sampled.free
    a = sampled.a[free][:, None]
    b = sampled.b[free][:, None]
    d = sampled.d[free][:, None]
    bound = sampled.lam * a * s * consts.k(s / (consts.l * d))
    slack = (bound - b * sampled.g(s)) / bound
    return float(slack.min())


class SupersolutionCheck(BaseModel):
    min_value: float
    passed: bool


def check_supersolution(
    spec: ProblemSpec, consts: DerivedConstants, grid: RadialGrid, d: Optional[Field] = None
) -> SupersolutionCheck:
    """Nodewise -Delta(ell d) + mu h >= 0 (the growth term vanishes at ell d)"""
    sampled = spec.sample(grid, d)
    upper = Field(grid, consts.ell * sampled.d)
    residual = apply_laplacian(grid, upper).values + spec.mu * sampled.h
    value = float(residual[sampled.free].min())
    return SupersolutionCheck(min_value=value, passed=value >= -CERTIFICATE_TOL)


class InstantonKind(str, Enum):
    AUBIN_TALENTI = "aubin-talenti"
    GREEN = "green-convolution"


class BumpShape(str, Enum):
    UNIFORM = "uniform"
    SMOOTH = "smooth"


@dataclass(frozen=True)
class BumpSpec:
    radius: Optional[float] = None
    mass: float = 1.0
    shape: BumpShape = BumpShape.UNIFORM


@dataclass(frozen=True, eq=False)
class Instanton:
    d: Field
    kind: InstantonKind
    center: float = 0.0
    inner_radius: Optional[float] = None
    bump_radius: Optional[float] = None
    mass: Optional[float] = None
    c: Optional[float] = None
    C: Optional[float] = None
    hopf_margin: Optional[float] = None
    identity_error: Optional[float] = None
    superharmonic_min: Optional[float] = None
    harmonic_residual: Optional[float] = None

    def summary(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "center": self.center,
            "inner_radius": self.inner_radius,
            "bump_radius": self.bump_radius,
            "mass": self.mass,
            "c": self.c,
            "C": self.C,
            "hopf_margin": self.hopf_margin,
            "identity_error": self.identity_error,
            "superharmonic_min": self.superharmonic_min,
            "harmonic_residual": self.harmonic_residual,
        }


def build_instanton(grid: RadialGrid) -> Instanton:
    """Aubin-Talenti profile on a whole-space grid"""
    if grid.kind != DomainKind.WHOLE:
        raise ValueError(f"The Aubin-Talenti instanton needs a whole-space grid, got {grid.kind.value}")
    n = grid.dimension
    d = Field(grid, aubin_talenti(grid.nodes, n), FieldRole.SUPERSOLUTION)
    lap = apply_laplacian(grid, d).values
    target = n * (n - 2) * d.values ** (critical_exponent(n) - 1)
    interior = slice(0, grid.size - 1)
    error = float(np.max(np.abs(lap[interior] - target[interior]) / target[interior]))
    logger.debug(f"Aubin-Talenti identity error on {grid.intervals} intervals: {error:.3e}")
    return Instanton(
        d=d,
        kind=InstantonKind.AUBIN_TALENTI,
        identity_error=error,
        superharmonic_min=float(lap.min()),
    )


def bump_values(grid: RadialGrid, bump: BumpSpec, radius: float) -> np.ndarray:
    """Nonnegative bump on r <= radius with discrete mass exactly ``bump.mass``"""
    r = grid.nodes
    if bump.shape == BumpShape.UNIFORM:
        values = np.where(r <= radius, 1.0, 0.0)
    else:
        t = np.clip(r / radius, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            values = np.where(t < 1, np.exp(1 - 1 / (1 - t**2)), 0.0)
    total = float(np.dot(grid.weights, values))
    if total <= 0:
        raise ValueError(f"Bump of radius {radius} contains no grid node")
    return bump.mass * values / total


def build_d_bounded(
    grid: RadialGrid,
    center: float = 0.0,
    inner_radius: Optional[float] = None,
    bump: BumpSpec = BumpSpec(),
) -> Instanton:
    """Green profile d solving -Delta d = eta with d = 0 on the boundary of a ball.

    Args:
        grid: ball grid
        center: offset of the bump center y0 (only 0 is radial)
        inner_radius: r with dist(y0, boundary) > 3r; defaults to R/4
        bump: shape, mass and radius of eta (radius defaults to r/2)
    """
    if grid.kind != DomainKind.BALL:
        raise ValueError(f"Green profile needs a ball grid, got {grid.kind.value}")
    if center != 0.0:
        raise ValueError(f"Radial construction needs the bump centered at the origin, got {center}")
    radius = grid.radius
    r = inner_radius if inner_radius is not None else radius / 4
    if not 0 < r or radius - abs(center) <= 3 * r:
        raise ValueError(f"Need dist(y0, boundary) > 3r, got R={radius}, r={r}")
    delta = bump.radius if bump.radius is not None else r / 2
    if delta > r:
        raise ValueError(f"Bump radius {delta} exceeds inner radius {r}")

    eta = bump_values(grid, bump, delta)
    d = solve_poisson(grid, Field(grid, eta), BoundaryCondition.DIRICHLET, FieldRole.SUPERSOLUTION)
    free = grid.free_mask(BoundaryCondition.DIRICHLET)
    dist = radius - grid.nodes[free]
    ratios = d.values[free] / dist
    lap = apply_laplacian(grid, d, BoundaryCondition.DIRICHLET).values
    outside = free & (eta == 0)
    hopf = float((d.values[-2] - d.values[-1]) / grid.spacing[-1])
    instanton = Instanton(
        d=d,
        kind=InstantonKind.GREEN,
        center=center,
        inner_radius=r,
        bump_radius=delta,
        mass=bump.mass,
        c=float(ratios.min()),
        C=float(ratios.max()),
        hopf_margin=hopf,
        superharmonic_min=float(lap[free].min()),
        harmonic_residual=float(np.max(np.abs(lap[outside]))) if outside.any() else 0.0,
    )
    logger.info(
        f"Green profile on B_{radius}: c={instanton.c:.6g}, C={instanton.C:.6g}, Hopf margin={hopf:.6g}"
    )
    return instanton


class GrowthEquivalenceReport(BaseModel):
    sup_dist_ratio: float
    sup_d_ratio: float
    c: float
    C: float
    consistent: bool
    dist_bound_ok: Optional[bool] = None
    d_bound_ok: Optional[bool] = None

    @property
    def constants_ratio(self) -> float:
        return self.sup_d_ratio / self.sup_dist_ratio


def check_growth_equivalence(
    spec: ProblemSpec,
    d_green: Instanton,
    C1_bar: Optional[float] = None,
) -> GrowthEquivalenceReport:
    """Compare b <= C a dist^-beta with b <= C' a d^-beta on the Green profile's grid"""
    if d_green.c is None or d_green.C is None:
        raise ValueError("Growth equivalence needs the c, C bounds of a Green profile")
    grid = d_green.d.grid
    sampled = spec.sample(grid, d_green.d)
    free = sampled.free
    beta = spec.beta
    a, b, d = sampled.a[free], sampled.b[free], sampled.d[free]
    dist = grid.radius - grid.nodes[free]
    sup_dist = float(np.max(b * dist**beta / a))
    sup_d = float(np.max(b * d**beta / a))
    c, C = d_green.c, d_green.C
    slack = 1 + 1e-9
    consistent = bool(
        np.isfinite(sup_dist)
        and np.isfinite(sup_d)
        and sup_d <= sup_dist * C**beta * slack
        and sup_dist <= sup_d * c ** (-beta) * slack
    )
    report = GrowthEquivalenceReport(
        sup_dist_ratio=sup_dist,
        sup_d_ratio=sup_d,
        c=c,
        C=C,
        consistent=consistent,
    )
    if C1_bar is not None:
        report.dist_bound_ok = sup_dist <= C1_bar * slack
        report.d_bound_ok = sup_d <= C1_bar * C**beta * slack
    return report
