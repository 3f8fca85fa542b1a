"""
Built-in coefficient families

Each family turns a parameter dict into a RadialProfile. Families that depend
on another coefficient (the plateau b is scaled by a) receive it through the
build context.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np

from .grid import unit_ball_volume
from .oracles import bounded_exact_example, build_exact_example
from .problem import RadialProfile, aubin_talenti

logger = logging.getLogger("LogisticSteadyLogger")


@dataclass(frozen=True)
class ProfileContext:
    """What a family may need besides its own parameters"""

    dimension: int
    a: Optional[RadialProfile] = None
    outer_radius: Optional[float] = None


Builder = Callable[[Dict[str, Any], ProfileContext], RadialProfile]


def smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3 - 2 * t)


def _constant(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
    value = float(params.get("value", 1.0))
    return RadialProfile("constant", lambda r: np.full_like(r, value), {"value": value})


def _algebraic(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
    """A (1 + r^2)^{-p/2}"""
    amplitude = float(params.get("amplitude", 1.0))
    power = float(params["power"])
    return RadialProfile(
        "algebraic",
        lambda r: amplitude * (1 + r**2) ** (-power / 2),
        {"amplitude": amplitude, "power": power},
    )


def _gaussian(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
    amplitude = float(params.get("amplitude", 1.0))
    width = float(params.get("width", 1.0))
    return RadialProfile(
        "gaussian",
        lambda r: amplitude * np.exp(-(r**2) / (2 * width**2)),
        {"amplitude": amplitude, "width": width},
    )


def _step(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
    radius = float(params["radius"])
    inside = float(params.get("inside", 1.0))
    outside = float(params.get("outside", 0.0))
    support = radius if outside == 0 else None
    return RadialProfile(
        "step",
        lambda r: np.where(r <= radius, inside, outside),
        {"radius": radius, "inside": inside, "outside": outside},
        support_radius=support,
        zero_radius=radius if inside == 0 else None,
    )


def _bump(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
    """Uniform bump on r <= radius with total mass ``mass``"""
    radius = float(params.get("radius", 1.0))
    mass = float(params.get("mass", 1.0))
    height = mass / (unit_ball_volume(ctx.dimension) * radius**ctx.dimension)
    return RadialProfile(
        "bump",
        lambda r: np.where(r <= radius, height, 0.0),
        {"radius": radius, "mass": mass},
        support_radius=radius,
    )


def _smooth_bump(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
    radius = float(params.get("radius", 1.0))
    amplitude = float(params.get("amplitude", 1.0))

    def fn(r: np.ndarray) -> np.ndarray:
        t = np.clip(r / radius, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(t < 1, amplitude * np.exp(1 - 1 / (1 - t**2)), 0.0)

    return RadialProfile(
        "smooth-bump", fn, {"radius": radius, "amplitude": amplitude}, support_radius=radius
    )


def _upsilon(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
    """1 + c r^k"""
    coefficient = float(params.get("coefficient", 1.0))
    power = float(params.get("power", 4.0))
    return RadialProfile(
        "upsilon",
        lambda r: 1 + coefficient * r**power,
        {"coefficient": coefficient, "power": power},
    )


def _plateau(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
    """b = C1 a envelope^{-beta} smoothstep((r - r0) / width), zero on r <= r0.

    The envelope is the Aubin-Talenti profile on R^N, or the distance to the
    boundary on a ball.
    """
    if ctx.a is None:
        raise ValueError("The plateau family needs the coefficient a")
    a = ctx.a
    C1 = float(params.get("C1", 1.0))
    beta = float(params["beta"])
    r0 = float(params["radius"])
    width = float(params.get("width", 1.0))
    envelope = params.get("envelope", "instanton")
    if envelope == "instanton":
        dimension = ctx.dimension

        def env(r: np.ndarray) -> np.ndarray:
            return aubin_talenti(r, dimension)

    elif envelope == "distance":
        if ctx.outer_radius is None:
            raise ValueError("The distance envelope needs a bounded domain")
        outer = ctx.outer_radius

        def env(r: np.ndarray) -> np.ndarray:
            return np.maximum(outer - r, 0.0)

    else:
        raise ValueError(f"Unknown plateau envelope: {envelope}")

    def fn(r: np.ndarray) -> np.ndarray:
        ramp = smoothstep((r - r0) / width)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = C1 * a(r) * env(r) ** -beta * ramp
        return np.where(r > r0, values, 0.0)

    return RadialProfile(
        "plateau",
        fn,
        {"C1": C1, "beta": beta, "radius": r0, "width": width, "envelope": envelope},
        zero_radius=r0,
    )


def _exact(bounded: bool) -> Builder:
    def build(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
        beta = float(params.get("beta", 3.0))
        mu = float(params.get("mu", 0.1))
        field_name = params.get("field", "a")
        if bounded:
            example = bounded_exact_example(mu, ctx.dimension, beta)
        else:
            example = build_exact_example(ctx.dimension, beta, mu)
        fns: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
            "a": example.a,
            "b": example.b,
            "h": lambda r: example.mu_h(r) / example.mu,
            "u": example.u,
        }
        if field_name not in fns:
            raise ValueError(f"Unknown exact field: {field_name}")
        return RadialProfile(
            "exact-bounded" if bounded else "exact",
            fns[field_name],
            {"beta": beta, "mu": mu, "field": field_name},
            support_radius=1.0 if field_name == "h" else None,
            zero_radius=1.0 if field_name == "b" else None,
        )

    return build


def _tabulated(params: Dict[str, Any], ctx: ProfileContext) -> RadialProfile:
    radii = np.asarray(params["radii"], dtype=float)
    values = np.asarray(params["values"], dtype=float)
    if radii.shape != values.shape or radii.size < 2:
        raise ValueError("Tabulated profile needs matching radii and values with at least two entries")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("Tabulated radii must be strictly increasing")
    return RadialProfile(
        "tabulated",
        lambda r: np.interp(r, radii, values),
        {"radii": radii.tolist(), "values": values.tolist()},
    )


FAMILIES: Dict[str, Builder] = {
    "constant": _constant,
    "algebraic": _algebraic,
    "exact": _exact(bounded=False),
    "exact-bounded": _exact(bounded=True),
    "plateau": _plateau,
    "step": _step,
    "gaussian": _gaussian,
    "bump": _bump,
    "smooth-bump": _smooth_bump,
    "upsilon": _upsilon,
    "tabulated": _tabulated,
}


def build_profile(family: str, params: Dict[str, Any], context: ProfileContext) -> RadialProfile:
    """Look up a coefficient family and build its profile.

    Args:
        family: registered family name
        params: family parameters
        context: dimension and already-built coefficients

    Returns:
        RadialProfile evaluating the coefficient at given radii
    """
    if family not in FAMILIES:
        raise ValueError(f"Unknown coefficient family: {family}. Known: {', '.join(sorted(FAMILIES))}")
    profile = FAMILIES[family](params, context)
    logger.debug(f"Built {family} profile with {profile.params}")
    return profile

