"""
Run configuration

JSON run files are parsed into pydantic models; any parse or validation error
becomes a ConfigError. Environment settings (seed, log level) come from the
process environment, optionally seeded from a ``.env`` file.
"""

import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from .coefficients import ProfileContext, build_profile
from .errors import ConfigError
from .grid import DomainKind, RadialGrid, build_grid
from .problem import (
    BumpShape,
    BumpSpec,
    Nonlinearity,
    ProblemSpec,
    RadialProfile,
    ZeroSet,
    ZeroSetKind,
)

logger = logging.getLogger("LogisticSteadyLogger")

try:
    from dotenv import load_dotenv

    env_path = Path.cwd() / ".env"
    if env_path.exists():
        load_dotenv(dotenv_path=env_path)
except ImportError:
    # dotenv is optional
    pass


class Variant(str, Enum):
    RELATED = "related"
    MAIN = "main"
    FAST_GROWTH = "fast-growth"
    BOUNDED = "bounded"
    VERIFY = "verify"


class LambdaMode(str, Enum):
    NUMBER = "number"
    MIDWAY = "midway"
    SCALED = "scaled"


class ProfileConfig(BaseModel):
    family: str
    params: Dict[str, Any] = Field(default_factory=dict)


class NonlinearityConfig(BaseModel):
    """g(s) = sum c_k s^p_k for s > 0, given as [[c_k, p_k], ...]"""

    terms: List[Tuple[float, float]]

    def build(self) -> Nonlinearity:
        return Nonlinearity(tuple((float(c), float(p)) for c, p in self.terms))


class LambdaConfig(BaseModel):
    mode: LambdaMode = LambdaMode.NUMBER
    value: Optional[float] = None
    factor: Optional[float] = None

    @model_validator(mode="after")
    def _check_mode(self) -> "LambdaConfig":
        if self.mode == LambdaMode.NUMBER and self.value is None:
            raise ValueError("lambda mode 'number' needs a value")
        if self.mode == LambdaMode.SCALED and (self.factor is None or self.factor <= 0):
            raise ValueError("lambda mode 'scaled' needs a positive factor")
        return self


class ZeroSetConfig(BaseModel):
    kind: ZeroSetKind = ZeroSetKind.EMPTY
    radius: float = 0.0


class ProblemConfig(BaseModel):
    dimension: int = 3
    beta: float
    lam: Union[float, LambdaConfig] = Field(alias="lambda")
    mu: Optional[float] = 0.0
    a: ProfileConfig
    b: Optional[ProfileConfig] = None
    h: ProfileConfig
    g: NonlinearityConfig
    upsilon: Optional[ProfileConfig] = None
    zero_set: ZeroSetConfig = Field(default_factory=ZeroSetConfig)
    C1: Optional[float] = None
    C1_bar: Optional[float] = None
    q: float = 2.0
    s: float = 4.0
    C2: Optional[float] = None

    model_config = {"populate_by_name": True}

    @model_validator(mode="after")
    def _check_growth(self) -> "ProblemConfig":
        if self.b is None and self.upsilon is None:
            raise ValueError("problem needs either b or upsilon")
        if self.dimension < 3:
            raise ValueError(f"dimension must be at least 3, got {self.dimension}")
        return self

    @property
    def lambda_config(self) -> LambdaConfig:
        if isinstance(self.lam, LambdaConfig):
            return self.lam
        return LambdaConfig(mode=LambdaMode.NUMBER, value=float(self.lam))


class DomainConfig(BaseModel):
    kind: DomainKind = DomainKind.WHOLE
    radius: float = 200.0
    intervals: int = 800
    stretch: float = 1.0
    inner_radius: float = 0.0
    anchor: Optional[float] = None

    def build(self, dimension: int) -> RadialGrid:
        return build_grid(
            self.kind,
            self.intervals,
            stretch=self.stretch,
            radius=self.radius,
            inner_radius=self.inner_radius,
            dimension=dimension,
            anchor=self.anchor,
        )


class BumpConfig(BaseModel):
    radius: Optional[float] = None
    mass: float = 1.0
    shape: BumpShape = BumpShape.UNIFORM
    inner_radius: Optional[float] = None

    def spec(self) -> BumpSpec:
        return BumpSpec(radius=self.radius, mass=self.mass, shape=self.shape)


class SolverConfig(BaseModel):
    tol: float = 1e-9
    max_iter: int = 20000
    residual_tol: float = 1e-7
    decay_radius: float = 5.0
    positivity_radius: float = 1.0
    max_doublings: int = 20
    mu_hi: Optional[float] = None
    threshold_width: float = 1e-3


class OracleConfig(BaseModel):
    beta: float = 3.0
    mu: float = 0.1
    dimension: int = 3
    bounded: bool = False


class RunConfig(BaseModel):
    name: str = "run"
    variant: Variant = Variant.MAIN
    problem: Optional[ProblemConfig] = None
    oracle: Optional[OracleConfig] = None
    domain: DomainConfig = Field(default_factory=DomainConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    bump: BumpConfig = Field(default_factory=BumpConfig)

    @property
    def dimension(self) -> int:
        if self.problem is not None:
            return self.problem.dimension
        if self.oracle is not None:
            return self.oracle.dimension
        return 3

    def require_problem(self) -> ProblemConfig:
        if self.problem is None:
            raise ConfigError(f"Variant {self.variant.value} needs a 'problem' section")
        return self.problem

    def require_oracle(self) -> OracleConfig:
        if self.oracle is None:
            raise ConfigError("Variant verify needs an 'oracle' section")
        return self.oracle

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a JSON run file"""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}")
    logger.info(f"Loaded config '{config.name}' from {path} (variant {config.variant.value})")
    return config


def apply_overrides(
    config: RunConfig,
    variant: Optional[str] = None,
    mu: Optional[float] = None,
    grid_nodes: Optional[int] = None,
    r_infinity: Optional[float] = None,
    tol: Optional[float] = None,
) -> RunConfig:
    """Command-line values take precedence over the file"""
    update: Dict[str, Any] = {}
    try:
        if variant is not None:
            update["variant"] = Variant(variant)
        if mu is not None:
            if config.problem is not None:
                update["problem"] = config.problem.model_copy(update={"mu": mu})
            if config.oracle is not None:
                update["oracle"] = config.oracle.model_copy(update={"mu": mu})
        domain: Dict[str, Any] = {}
        if grid_nodes is not None:
            domain["intervals"] = grid_nodes
        if r_infinity is not None:
            domain["radius"] = r_infinity
        if domain:
            update["domain"] = config.domain.model_copy(update=domain)
        if tol is not None:
            update["solver"] = config.solver.model_copy(update={"tol": tol})
    except ValueError as e:
        raise ConfigError(f"Invalid override: {e}")
    return config.model_copy(update=update)


def build_problem(problem: ProblemConfig, domain: DomainConfig, lam: float) -> ProblemSpec:
    """Assemble the problem definition at a resolved lambda"""
    outer = domain.radius if domain.kind != DomainKind.WHOLE else None
    ctx = ProfileContext(dimension=problem.dimension, outer_radius=outer)
    try:
        a = build_profile(problem.a.family, problem.a.params, ctx)
        ctx_a = ProfileContext(dimension=problem.dimension, a=a, outer_radius=outer)
        b: Optional[RadialProfile] = None
        if problem.b is not None:
            b = build_profile(problem.b.family, problem.b.params, ctx_a)
        upsilon = None
        if problem.upsilon is not None:
            upsilon = build_profile(problem.upsilon.family, problem.upsilon.params, ctx_a)
        h = build_profile(problem.h.family, problem.h.params, ctx_a)
        return ProblemSpec(
            dimension=problem.dimension,
            lam=lam,
            mu=float(problem.mu or 0.0),
            a=a,
            b=b,
            h=h,
            g=problem.g.build(),
            beta=problem.beta,
            C1=problem.C1,
            q=problem.q,
            s=problem.s,
            C2=problem.C2,
            zero_set=ZeroSet(problem.zero_set.kind, problem.zero_set.radius),
            upsilon=upsilon,
            domain=domain.kind,
        )
    except (KeyError, ValueError) as e:
        raise ConfigError(f"Cannot build problem: {e}")


class Settings(BaseModel):
    seed: int = 0
    log_level: str = "INFO"


def load_settings() -> Settings:
    seed = os.environ.get("LOGISTIC_STEADY_SEED", "0")
    level = os.environ.get("LOGISTIC_STEADY_LOG_LEVEL", "INFO").upper()
    try:
        return Settings(seed=int(seed), log_level=level)
    except ValueError:
        raise ConfigError(f"LOGISTIC_STEADY_SEED must be an integer, got {seed!r}")
