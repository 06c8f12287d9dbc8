"""
Exitmap Scenarios.

Pydantic schema of scenario files and the builtin scenario registry. A
scenario declares a flow and a region (or a hybrid system, a map to
realize, or synthetic samples for the negative controls) together with
the analysis requests and tolerance overrides used by the CLI.
"""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Callable
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from exitmap.config import Tolerances, config
from exitmap.core.flow_core import (
    BUILTIN_FLOW_NAMES,
    Flow,
    Homeomorphism2D,
    MoebiusMap,
    builtin_flow,
    comsin_shear,
    conjugate_flow,
    shear,
)
from exitmap.core.geometry import Region, make_band, make_disc, make_halfplane, moebius_image
from exitmap.modules.hybrid import ImpactingSystem, Policy, ResetMap, induced_system
from exitmap.modules.realization import CircleMapSpec, RealizableMapSpec

logger = logging.getLogger(__name__)

CONJUGACIES = ("comsin_shear", "sine_shear")


def named_homeomorphism(name: str) -> Homeomorphism2D:
    """Fixed homeomorphisms scenarios may conjugate by."""
    if name == "comsin_shear":
        return comsin_shear()
    if name == "sine_shear":
        return shear(lambda x: 0.25 * np.sin(np.pi * np.asarray(x, dtype=float)), "0.25 sin(πx)")
    raise ScenarioError(f"Unknown conjugacy {name!r}; choose from {', '.join(CONJUGACIES)}")


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FlowSpec(_Spec):
    builtin: str = Field(examples=["exmap", "affine_focus"])
    params: dict[str, Any] = Field(default_factory=dict, examples=[{"lam": 1, "mu": 1, "p": 1}])
    integrate: bool = False
    conjugacy: str | None = Field(default=None, examples=["sine_shear"])

    @field_validator("builtin")
    @classmethod
    def _known_flow(cls, v: str) -> str:
        if v not in BUILTIN_FLOW_NAMES:
            names = ", ".join(BUILTIN_FLOW_NAMES)
            raise ValueError(f"unknown builtin flow {v!r}; choose from {names}")
        return v

    @field_validator("conjugacy")
    @classmethod
    def _known_conjugacy(cls, v: str | None) -> str | None:
        if v is not None and v not in CONJUGACIES:
            raise ValueError(f"unknown conjugacy {v!r}; choose from {', '.join(CONJUGACIES)}")
        return v

    def build(self) -> Flow:
        flow = builtin_flow(self.builtin, integrate=self.integrate, **self.params)
        if self.conjugacy:
            flow = conjugate_flow(flow, named_homeomorphism(self.conjugacy))
        return flow


class RegionSpec(_Spec):
    kind: Literal["disc", "halfplane", "band", "moebius_image"] = Field(examples=["disc"])
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = Field(default=1.0, gt=0)
    side: Literal["lower", "upper"] = "lower"
    axis: Literal[0, 1] = 0
    offset: float = 0.0
    half_width: float = Field(default=1.0, gt=0)
    base: RegionSpec | None = None
    # Möbius coefficients a, b, c, d as (re, im) pairs
    matrix: list[tuple[float, float]] | None = Field(
        default=None, examples=[[[0, 1], [0, 1], [1, 0], [-1, 0]]]
    )
    conjugacy: str | None = None
    transversal: bool = False

    @model_validator(mode="after")
    def _moebius_fields(self) -> RegionSpec:
        if self.kind == "moebius_image":
            if self.base is None:
                raise ValueError("moebius_image needs a base region")
            if self.matrix is None or len(self.matrix) != 4:
                raise ValueError("moebius_image needs four complex coefficients a, b, c, d")
        if self.conjugacy is not None and self.conjugacy not in CONJUGACIES:
            raise ValueError(f"unknown conjugacy {self.conjugacy!r}")
        return self

    def build(self) -> Region:
        if self.kind == "disc":
            region = make_disc(self.center, self.radius, transversal=self.transversal)
        elif self.kind == "halfplane":
            region = make_halfplane(self.side, transversal=self.transversal)
        elif self.kind == "band":
            region = make_band(self.axis, self.offset, self.half_width)
        else:
            a, b, c, d = (complex(re, im) for re, im in self.matrix)
            region = moebius_image(self.base.build(), MoebiusMap(np.array([[a, b], [c, d]])))
        if self.conjugacy:
            region = region.transformed(named_homeomorphism(self.conjugacy))
        return region


class AnalysisSpec(_Spec):
    samples: int = Field(default=64, ge=8, examples=[64, 256])
    horizon: float | None = Field(default=None, gt=0)
    span: tuple[float, float] = (-3.0, 3.0)
    period: float | None = Field(default=None, gt=0)


class ResetSpec(_Spec):
    kind: Literal["restitution", "oscillator", "tabulated"] = Field(examples=["restitution"])
    r: float = Field(default=0.5, ge=0, le=1)
    mu: float = Field(default=1.0, gt=0)
    xs: list[float] | None = None
    ys: list[float] | None = None
    domain: tuple[float, float] | None = None

    @model_validator(mode="after")
    def _table(self) -> ResetSpec:
        if self.kind == "tabulated":
            if not self.xs or not self.ys or len(self.xs) != len(self.ys) or len(self.xs) < 2:
                raise ValueError("tabulated reset needs xs and ys of equal length >= 2")
        return self

    def build(self) -> ResetMap:
        if self.kind == "restitution":
            return ResetMap.restitution(self.r)
        if self.kind == "oscillator":
            return ResetMap.oscillator(self.mu)
        return ResetMap.tabulated(self.xs, self.ys, self.domain)


class HybridSpec(_Spec):
    flow: FlowSpec
    reset: ResetSpec | None = None
    lower_flow: FlowSpec | None = None
    sliding: FlowSpec | None = None
    x0: tuple[float, float] = Field(default=(1.0, 0.0), examples=[[1.0, 0.0]])
    horizon: float = Field(default=20.0, gt=0)
    max_events: int = Field(default=100, ge=1)
    policy: Policy = Policy.PREFER_SLIDE
    normal_form: bool = False
    poincare_x: float | None = None
    coordinates: str = Field(default="", examples=["x = velocity, y = height"])

    @model_validator(mode="after")
    def _one_reset(self) -> HybridSpec:
        if (self.reset is None) == (self.lower_flow is None):
            raise ValueError("declare exactly one of reset and lower_flow")
        return self

    def build(self, cfg: Tolerances | None = None) -> ImpactingSystem:
        flow = self.flow.build()
        if self.lower_flow is not None:
            system = induced_system(self.lower_flow.build(), flow, cfg, horizon=self.horizon)
        else:
            reset = self.reset.build()
            system = ImpactingSystem(reset, flow, label=reset.label)
        if self.sliding is not None:
            system.sliding_flow = self.sliding.build()
        return system


class MapSpec(_Spec):
    kind: Literal["neg", "square", "scaled_neg", "tabulated", "tent"] = Field(examples=["neg"])
    mu: float = Field(default=2.0, gt=0)
    alpha: float = Field(default=0.5, gt=0, lt=1)
    xs: list[float] | None = None
    ys: list[float] | None = None
    samples: int = Field(default=32, ge=2)

    @property
    def on_circle(self) -> bool:
        return self.kind == "tent"

    def build(self) -> RealizableMapSpec | CircleMapSpec:
        if self.kind == "neg":
            return RealizableMapSpec.neg()
        if self.kind == "square":
            return RealizableMapSpec.square()
        if self.kind == "scaled_neg":
            return RealizableMapSpec.scaled_neg(self.mu)
        if self.kind == "tent":
            return CircleMapSpec.tent(self.alpha)
        if not self.xs or not self.ys or len(self.xs) != len(self.ys):
            raise ScenarioError("tabulated map needs xs and ys of equal length")
        return RealizableMapSpec.tabulated(self.xs, self.ys)


class SyntheticSpec(_Spec):
    """Hand-made samples that must fail a structural check."""

    kind: Literal["map", "labels"]
    s: list[float]
    values: list[float | None] | None = None
    labels: list[str] | None = None
    periodic: bool = True

    @model_validator(mode="after")
    def _payload(self) -> SyntheticSpec:
        payload = self.values if self.kind == "map" else self.labels
        if payload is None or len(payload) != len(self.s):
            raise ValueError(f"synthetic {self.kind} needs one entry per sample parameter")
        return self


class CoolingSpec(_Spec):
    epsilons: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 5.0])
    alpha: float = Field(default=1.0, gt=0)
    beta: float = Field(default=1.0, gt=0)
    gamma: float = Field(default=1.0, gt=0)
    t_room: float = 20.0
    t_hot: float = 80.0


class Scenario(_Spec):
    name: str = Field(examples=["exmap"])
    description: str = ""
    flow: FlowSpec | None = None
    region: RegionSpec | None = None
    analysis: AnalysisSpec = Field(default_factory=AnalysisSpec)
    hybrid: HybridSpec | None = None
    realize: MapSpec | None = None
    synthetic: SyntheticSpec | None = None
    cooling: CoolingSpec | None = None
    tolerances: dict[str, Any] = Field(default_factory=dict, examples=[{"horizon": 50}])

    @model_validator(mode="after")
    def _flow_needs_region(self) -> Scenario:
        if (self.flow is None) != (self.region is None):
            missing = "region" if self.region is None else "flow"
            raise ValueError(f"scenario declares a flow or region without its {missing}")
        if not any((self.flow, self.hybrid, self.realize, self.synthetic)):
            raise ValueError("scenario declares nothing to compute")
        return self

    def tolerance_set(self, base: Tolerances | None = None) -> Tolerances:
        return (base or config.tolerances).merged(self.tolerances)


def scenario_schema() -> dict[str, Any]:
    return Scenario.model_json_schema()


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario JSON file."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"Cannot read scenario {path}: {exc}") from exc
    try:
        return Scenario.model_validate_json(raw)
    except ValidationError as exc:
        raise ScenarioError(f"Scenario {path} is invalid:\n{exc}") from exc


# ---------------------------------------------------------------------------
# Builtin registry
# ---------------------------------------------------------------------------

def _exmap() -> Scenario:
    return Scenario(
        name="exmap",
        description="v = (x, -y) on the unit disc",
        flow=FlowSpec(builtin="exmap"),
        region=RegionSpec(kind="disc"),
    )


def _affine(p: float = 1.0) -> Scenario:
    return Scenario(
        name=f"affine(p={p:g})",
        description="focus x' = -x - (y - p), y' = x - (y - p) on the lower half plane",
        flow=FlowSpec(builtin="affine_focus", params={"lam": 1.0, "mu": 1.0, "p": p}),
        region=RegionSpec(kind="halfplane", side="lower", transversal=True),
        analysis=AnalysisSpec(samples=33),
    )


def _disc_flow(name: str, description: str) -> Callable[[], Scenario]:
    def build() -> Scenario:
        return Scenario(name=name, description=description, flow=FlowSpec(builtin=name),
                        region=RegionSpec(kind="disc"))

    return build


def _rotation() -> Scenario:
    return Scenario(
        name="rotation",
        description="rigid rotation of period 2 on the unit disc centred at (0.5, 0)",
        flow=FlowSpec(builtin="rotation"),
        region=RegionSpec(kind="disc", center=(0.5, 0.0)),
        analysis=AnalysisSpec(period=2.0, horizon=4.0),
    )


def _fold() -> Scenario:
    return Scenario(
        name="fold",
        description="parabolic orbits tangent to the x axis at the origin",
        flow=FlowSpec(builtin="fold"),
        region=RegionSpec(kind="halfplane", side="lower", transversal=True),
        analysis=AnalysisSpec(samples=61, horizon=20.0),
    )


def _bouncing_ball(r: float = 0.5) -> Scenario:
    return Scenario(
        name=f"bouncing_ball(r={r:g})",
        description="free fall with restitution; launched upward with unit speed",
        hybrid=HybridSpec(
            flow=FlowSpec(builtin="gravity", params={"g": 1.0}),
            reset=ResetSpec(kind="restitution", r=r),
            x0=(1.0, 0.0),
            horizon=2.0 / (1.0 - r) + 10.0,
            max_events=400,
            coordinates="x = velocity, y = height",
        ),
    )


def _impact_oscillator(mu: float = 1.0) -> Scenario:
    return Scenario(
        name=f"impact_oscillator(mu={mu:g})",
        description="harmonic oscillator above a wall with reset max(-mu x, x)",
        hybrid=HybridSpec(
            flow=FlowSpec(builtin="rotation"),
            reset=ResetSpec(kind="oscillator", mu=mu),
            x0=(-1.0, 0.0),
            horizon=10.0,
            normal_form=mu != 1.0,
            poincare_x=-1.0,
        ),
    )


def _zeno_shear() -> Scenario:
    shifted = FlowSpec(builtin="translation", conjugacy="comsin_shear")
    return Scenario(
        name="zeno_shear",
        description="translation conjugated by (x, y + x sin(1/x)); switching is not well ordered",
        hybrid=HybridSpec(flow=shifted, lower_flow=shifted, x0=(-1.0, 0.0), horizon=5.0),
    )


def _cooling() -> Scenario:
    return Scenario(
        name="cooling",
        description="water (T_w) and hot stone (T_s) relaxing to room temperature",
        flow=FlowSpec(builtin="cooling"),
        region=RegionSpec(kind="band", axis=0, offset=20.0, half_width=1.0),
        cooling=CoolingSpec(),
    )


def _realize(kind: str) -> Callable[[], Scenario]:
    def build() -> Scenario:
        return Scenario(name=f"realize_{kind}", realize=MapSpec(kind=kind))

    return build


def _realize_tent(alpha: float = 0.5) -> Scenario:
    return Scenario(name=f"realize_tent(alpha={alpha:g})",
                    realize=MapSpec(kind="tent", alpha=alpha))


_CONTROL_N = 128


def _control_increasing() -> Scenario:
    s = np.arange(_CONTROL_N) / _CONTROL_N
    values = [float(v + 0.1) if 0 < v < 0.5 else None for v in s]
    return Scenario(
        name="control_increasing",
        description="F(s) = s + 0.1 on (0, 0.5): increasing and not the identity",
        synthetic=SyntheticSpec(kind="map", s=s.tolist(), values=values),
    )


def _control_two_peak() -> Scenario:
    s = np.arange(_CONTROL_N) / _CONTROL_N
    values = 0.5 + 0.3 * np.sin(4 * np.pi * s)
    return Scenario(
        name="control_two_peak",
        description="total circle map with two strict maxima away from the diagonal",
        synthetic=SyntheticSpec(kind="map", s=s.tolist(), values=values.tolist()),
    )


def _control_bc() -> Scenario:
    s = np.arange(_CONTROL_N) / _CONTROL_N
    labels = ["B" if v < 0.5 else "C" for v in s]
    return Scenario(
        name="control_bc",
        description="type B on [0, 0.5) abutting type C on [0.5, 1)",
        synthetic=SyntheticSpec(kind="labels", s=s.tolist(), labels=labels),
    )


BUILTIN_SCENARIOS: dict[str, Callable[..., Scenario]] = {
    "exmap": _exmap,
    "affine": _affine,
    "source": _disc_flow("source", "x' = x on the unit disc"),
    "sink": _disc_flow("sink", "x' = -x on the unit disc"),
    "rotation": _rotation,
    "fold": _fold,
    "bouncing_ball": _bouncing_ball,
    "impact_oscillator": _impact_oscillator,
    "zeno_shear": _zeno_shear,
    "cooling": _cooling,
    "realize_neg": _realize("neg"),
    "realize_square": _realize("square"),
    "realize_tent": _realize_tent,
    "control_increasing": _control_increasing,
    "control_two_peak": _control_two_peak,
    "control_bc": _control_bc,
}

NEGATIVE_CONTROLS = ("control_increasing", "control_two_peak", "control_bc")

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def _parse_args(raw: str) -> tuple[list[float], dict[str, float]]:
    args: list[float] = []
    kwargs: dict[str, float] = {}
    for part in filter(None, (p.strip() for p in raw.split(","))):
        key, sep, value = part.partition("=")
        try:
            if sep:
                kwargs[key.strip()] = float(value)
            else:
                args.append(float(part))
        except ValueError as exc:
            raise ScenarioError(f"Bad builtin argument {part!r}") from exc
    return args, kwargs


def builtin_scenario(name: str) -> Scenario:
    """Resolve ``name`` or ``name(args)``, e.g. ``affine(-1)`` or ``bouncing_ball(r=0.3)``."""
    match = _CALL.match(name)
    if not match or match.group(1) not in BUILTIN_SCENARIOS:
        raise ScenarioError(
            f"Unknown builtin scenario {name!r}; choose from {', '.join(BUILTIN_SCENARIOS)}"
        )
    args, kwargs = _parse_args(match.group(2) or "")
    try:
        return BUILTIN_SCENARIOS[match.group(1)](*args, **kwargs)
    except TypeError as exc:
        raise ScenarioError(f"Bad parameters for builtin {name!r}: {exc}") from exc
    except ValidationError as exc:
        raise ScenarioError(f"Builtin {name!r} produced an invalid scenario:\n{exc}") from exc


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario.model_dump(mode="json", exclude_defaults=True), indent=2)


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class ScenarioError(Exception):
    """Scenario file unreadable, invalid, or naming an unknown builtin."""
