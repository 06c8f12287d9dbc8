"""
Realization.

Builds flows with a prescribed first-out map.

Half plane: for P continuous, identity on [0, ∞) and strictly decreasing
onto [0, ∞) on (-∞, 0], the flow Φ = H ∘ Ψ ∘ H⁻¹ (Ψ the rotation with
period 2) has E_{H⁻}(x, 0) = (P(x), 0). H keeps polar angles and moves
radii along the segment between r and P(-r).

Disc: a unimodal circle map is moved to the half plane through the Cayley
transform, realized there, and pulled back; an angular reparametrization
puts the maximum at 1/2 first.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from exitmap.config import Tolerances, config
from exitmap.core.flow_core import (
    ConjugatedFlow,
    Flow,
    FlowKind,
    Homeomorphism2D,
    MoebiusMap,
    RotationFlow,
    moebius_conjugate,
    probe_grid,
)
from exitmap.core.geometry import Region, make_disc, make_halfplane
from exitmap.modules.first_maps import first_out
from exitmap.modules.planar_analysis import sample_F_E

logger = logging.getLogger(__name__)

ScalarMap = Callable[[np.ndarray], np.ndarray]

_PROBES = (0.0, 0.25, 0.5, 1.0, 2.0, 3.0)

# ---------------------------------------------------------------------------
# Map specifications
# ---------------------------------------------------------------------------

@dataclass
class RealizableMapSpec:
    """A map P: R -> R to be realized as a first-out map on H⁻.

    ``negative_inverse`` is the inverse of P restricted to (-∞, 0]; it is
    solved numerically when not supplied.
    """

    label: str
    P: ScalarMap  # noqa: N815
    negative_inverse: ScalarMap | None = None
    evidence: list[dict[str, Any]] = field(default_factory=list)

    # builtins

    @classmethod
    def neg(cls) -> RealizableMapSpec:
        return cls("neg", np.abs, lambda y: -np.asarray(y, dtype=float))

    @classmethod
    def square(cls) -> RealizableMapSpec:
        return cls("square", lambda x: np.where(np.asarray(x) < 0, np.square(x), x),
                   lambda y: -np.sqrt(np.asarray(y, dtype=float)))

    @classmethod
    def scaled_neg(cls, mu: float) -> RealizableMapSpec:
        if not mu > 0:
            raise HypothesisViolation(f"scaled_neg needs mu > 0, got {mu}", [])
        return cls(f"scaled_neg({mu:g})",
                   lambda x: np.where(np.asarray(x) < 0, -mu * np.asarray(x), x),
                   lambda y: -np.asarray(y, dtype=float) / mu)

    @classmethod
    def tabulated(cls, xs: Any, ys: Any) -> RealizableMapSpec:
        """Negative branch from a table (xs ascending to 0), linearly extrapolated."""
        branch = tabulated_branch(xs, ys)

        def P(x: np.ndarray) -> np.ndarray:  # noqa: N802
            x = np.asarray(x, dtype=float)
            return np.where(x < 0, branch(np.minimum(x, 0.0)), x)

        return cls(f"tabulated({len(np.atleast_1d(xs))})", P)

    @classmethod
    def from_callable(cls, fn: ScalarMap, label: str = "custom") -> RealizableMapSpec:
        return cls(label, lambda x: np.asarray(fn(np.asarray(x, dtype=float)), dtype=float))

    # hypotheses

    def validate(self, probes: tuple[float, ...] = _PROBES) -> RealizableMapSpec:
        """Probe P(0) = 0, identity on [0, ∞) and strict decrease onto [0, max] on (-∞, 0]."""
        eps = 1e-9
        xs = np.asarray(probes, dtype=float)
        evidence: list[dict[str, Any]] = []
        p0 = float(self.P(np.array([0.0]))[0])
        evidence.append({"probe": "P(0)=0", "x": 0.0, "value": p0, "ok": abs(p0) <= eps})
        for x, v in zip(xs, self.P(xs)):
            evidence.append({"probe": "identity", "x": float(x), "value": float(v),
                             "ok": bool(abs(v - x) <= eps * max(1.0, abs(x)))})
        neg = -xs[::-1]
        values = self.P(neg)
        steps = np.diff(values)
        for x, step in zip(neg[1:], steps):
            evidence.append({"probe": "decreasing", "x": float(x), "value": float(step),
                             "ok": bool(step < 0)})
        reach = float(self.P(np.array([-xs.max()]))[0])
        evidence.append({"probe": "covers", "x": float(-xs.max()), "value": reach,
                         "ok": bool(reach > 0)})
        self.evidence = evidence
        failed = [e for e in evidence if not e["ok"]]
        if failed:
            raise HypothesisViolation(
                f"{self.label} violates the realization hypotheses at "
                + ", ".join(f"{e['probe']}@{e['x']:g}" for e in failed),
                failed,
            )
        return self

    def inverse_negative(self, y: Any, cfg: Tolerances | None = None) -> np.ndarray:
        """x ≤ 0 with P(x) = y for y ≥ 0."""
        if self.negative_inverse is not None:
            return np.asarray(self.negative_inverse(y), dtype=float)
        tol = cfg or config.tolerances
        ys = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.array([solve_negative_branch(self.P, float(v), tol) for v in ys])
        return out.reshape(np.shape(y))


def tabulated_branch(xs: Any, ys: Any) -> ScalarMap:
    """Piecewise-linear interpolation of a table, extrapolated linearly on both ends."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or xs.shape != ys.shape or np.any(np.diff(xs) <= 0):
        raise HypothesisViolation("table needs at least two points with ascending xs", [])
    left = (ys[1] - ys[0]) / (xs[1] - xs[0])
    right = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])

    def branch(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inner = np.interp(x, xs, ys)
        return np.where(x < xs[0], ys[0] + left * (x - xs[0]),
                        np.where(x > xs[-1], ys[-1] + right * (x - xs[-1]), inner))

    return branch


def solve_negative_branch(P: ScalarMap, y: float, tol: Tolerances) -> float:  # noqa: N803
    if y == 0.0:
        return 0.0
    bound = max(1.0, abs(y))
    for _ in range(tol.bracket_doublings):
        if float(P(np.array([-bound]))[0]) >= y:
            break
        bound *= 2.0
    else:
        raise BracketError(f"no x <= 0 with P(x) = {y:g} below -{bound:g}")

    def f(x: float) -> float:
        return float(P(np.array([x]))[0]) - y

    lo, hi = f(-bound), f(0.0)
    if lo == 0.0:
        return -bound
    if hi == 0.0:
        return 0.0
    if lo * hi > 0:
        raise BracketError(f"P(x) - {y:g} keeps its sign on [-{bound:g}, 0] "
                           f"({lo:.3g} and {hi:.3g})")
    try:
        return float(brentq(f, -bound, 0.0, rtol=tol.root_rtol,
                            xtol=1e-300 + abs(y) * 1e-15))
    except ValueError as exc:
        raise BracketError(f"root of P(x) = {y:g} not found: {exc}") from exc


@dataclass
class CircleMapSpec:
    """A unimodal circle map P: [0, 1) -> [0, 1), identity on [0, α]."""

    label: str
    P: ScalarMap  # noqa: N815
    alpha: float

    @classmethod
    def tent(cls, alpha: float) -> CircleMapSpec:
        if not 0 < alpha < 1:
            raise HypothesisViolation(f"tent needs alpha in (0, 1), got {alpha}", [])

        def P(s: np.ndarray) -> np.ndarray:  # noqa: N802
            s = np.mod(np.asarray(s, dtype=float), 1.0)
            return np.where(s <= alpha, s, alpha * (1.0 - s) / (1.0 - alpha))

        return cls(f"tent({alpha:g})", P, float(alpha))

    @classmethod
    def from_callable(cls, fn: ScalarMap, alpha: float, label: str = "custom") -> CircleMapSpec:
        return cls(label, lambda s: np.asarray(fn(np.mod(np.asarray(s, dtype=float), 1.0))),
                   float(alpha))

    def validate(self, n: int = 256) -> CircleMapSpec:
        eps = 1e-9
        s = np.arange(n) / n
        v = self.P(s)
        problems = []
        if not 0 < self.alpha < 1:
            problems.append({"probe": "alpha", "x": self.alpha, "ok": False})
        if np.any((v < -eps) | (v >= 1.0)):
            problems.append({"probe": "range", "x": float(s[np.argmax((v < -eps) | (v >= 1))]),
                             "ok": False})
        ident = s <= self.alpha
        if np.any(np.abs(v[ident] - s[ident]) > eps):
            problems.append({"probe": "identity", "x": float(s[ident][np.argmax(
                np.abs(v[ident] - s[ident]))]), "ok": False})
        tail = v[~ident]
        if tail.size > 1 and np.any(np.diff(tail) >= 0):
            problems.append({"probe": "decreasing", "x": float(s[~ident][np.argmax(
                np.diff(tail) >= 0)]), "ok": False})
        if float(self.P(np.array([1.0 - 1e-9]))[0]) > 1e-6:
            problems.append({"probe": "limit at 1", "x": 1.0, "ok": False})
        if problems:
            raise HypothesisViolation(
                f"{self.label} is not a unimodal circle map: "
                + ", ".join(p["probe"] for p in problems), problems)
        return self


# ---------------------------------------------------------------------------
# Half-plane realization
# ---------------------------------------------------------------------------

def radial_profile(spec: RealizableMapSpec, t: float, xs: Any) -> np.ndarray:
    """R⁻(t, x) = t P(x) - (1 - t) x for x < 0."""
    xs = np.asarray(xs, dtype=float)
    return t * spec.P(xs) - (1.0 - t) * xs


def radial_homeomorphism(
    spec: RealizableMapSpec, cfg: Tolerances | None = None
) -> Homeomorphism2D:
    """H(r, θ) = ρ(r, θ)(cos θ, sin θ) with ρ = w P(-r) + (1 - w) r, w = 1 - |θ|/π."""
    tol = cfg or config.tolerances

    def forward(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        r = np.hypot(p[..., 0], p[..., 1])
        theta = np.arctan2(p[..., 1], p[..., 0])
        w = 1.0 - np.abs(theta) / np.pi
        rho = w * spec.P(-r) + (1.0 - w) * r
        return np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=-1)

    def radius(rho: float, w: float) -> float:
        if rho == 0.0:
            return 0.0

        def g(r: float) -> float:
            return w * float(spec.P(np.array([-r]))[0]) + (1.0 - w) * r - rho

        hi = max(rho, 1e-300)
        for _ in range(tol.bracket_doublings):
            if g(hi) >= 0:
                break
            hi *= 2.0
        else:
            raise BracketError(f"radial equation has no root below {hi:g} (rho={rho:g})")
        return float(brentq(g, 0.0, hi, rtol=tol.root_rtol, xtol=rho * 1e-15))

    def inverse(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        flat = p.reshape(-1, 2)
        out = np.full_like(flat, np.nan)
        for k, (x, y) in enumerate(flat):
            if not (np.isfinite(x) and np.isfinite(y)):
                continue
            theta = np.arctan2(y, x)
            r = radius(float(np.hypot(x, y)), 1.0 - abs(theta) / np.pi)
            out[k] = (r * np.cos(theta), r * np.sin(theta))
        return out.reshape(p.shape)

    return Homeomorphism2D(forward, inverse, f"H[{spec.label}]")


class RealizedFlow(ConjugatedFlow):
    """Φ = H ∘ Ψ ∘ H⁻¹ with first-out map (P, 0) on the lower half plane."""

    kind = FlowKind.REALIZATION

    def __init__(self, spec: RealizableMapSpec, h: Homeomorphism2D) -> None:
        super().__init__(RotationFlow(np.pi), h, f"realization({spec.label})")
        self.spec = spec
        self.rotation = self.inner
        self._curves: dict[tuple[float, int], np.ndarray] = {}

    def closed_curve(self, r0: float, n: int = 256) -> np.ndarray:
        """γ_{r₀}: the image under H of the circle of radius r0."""
        key = (float(r0), int(n))
        if key not in self._curves:
            theta = np.linspace(-np.pi, np.pi, n)
            circle = r0 * np.column_stack([np.cos(theta), np.sin(theta)])
            self._curves[key] = self.h.forward(circle)
        return self._curves[key].copy()


def closed_curve(rf: RealizedFlow, r0: float, n: int = 256) -> np.ndarray:
    return rf.closed_curve(r0, n)


def build_halfplane_realization(
    spec: RealizableMapSpec, cfg: Tolerances | None = None
) -> RealizedFlow:
    tol = cfg or config.tolerances
    spec.validate()
    h = radial_homeomorphism(spec, tol)
    residual = h.check(probe_grid(9, 3.0), tol.homeomorphism)
    logger.info("Realized %s on the lower half plane (H residual %.2e)", spec.label, residual)
    return RealizedFlow(spec, h)


@dataclass
class RealizationReport:
    """Round-trip comparison of E_{H⁻}(x, 0) against (P(x), 0)."""

    label: str
    samples: list[float]
    errors: list[float]
    exit_times: list[float | None]

    @property
    def max_error(self) -> float:
        return max(self.errors) if self.errors else 0.0

    @property
    def max_time_error(self) -> float:
        """Largest |T - 1| over samples x < 0."""
        gaps = [abs(t - 1.0) for x, t in zip(self.samples, self.exit_times)
                if x < 0 and t is not None]
        return max(gaps) if gaps else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "max_error": self.max_error,
                "max_time_error": self.max_time_error,
                "samples": [{"x": x, "error": e, "T": t}
                            for x, e, t in zip(self.samples, self.errors, self.exit_times)]}


def verify_realization(
    rf: RealizedFlow,
    samples: Any,
    horizon: float | None = None,
    cfg: Tolerances | None = None,
) -> RealizationReport:
    lower = make_halfplane("lower")
    xs = [float(x) for x in np.atleast_1d(np.asarray(samples, dtype=float))]
    errors: list[float] = []
    times: list[float | None] = []
    for x in xs:
        outcome = first_out(rf, lower, (x, 0.0), horizon, cfg)
        expected = np.array([float(rf.spec.P(np.array([x]))[0]), 0.0])
        if not outcome.defined:
            errors.append(float("inf"))
            times.append(None)
            continue
        errors.append(float(np.max(np.abs(outcome.point - expected))))
        times.append(outcome.time)
    report = RealizationReport(rf.spec.label, xs, errors, times)
    logger.info("Verified %s: max error %.3e, max |T-1| %.3e", rf.spec.label,
                report.max_error, report.max_time_error)
    return report


# ---------------------------------------------------------------------------
# Disc realization
# ---------------------------------------------------------------------------

def piecewise_linear_h(alpha: float) -> tuple[ScalarMap, ScalarMap]:
    """h with h(0) = 0, h(α) = 1/2, h(1) = 1, and its inverse."""

    def h(s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.where(s <= alpha, s / (2 * alpha), 0.5 + (s - alpha) / (2 * (1 - alpha)))

    def h_inv(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.where(u <= 0.5, 2 * alpha * u, alpha + (u - 0.5) * 2 * (1 - alpha))

    return h, h_inv


def angular_reparametrization(h: ScalarMap, h_inv: ScalarMap) -> Homeomorphism2D:
    """r e^{iθ} -> r e^{2πi h(θ/2π)}."""

    def lift(fn: ScalarMap) -> Callable[[np.ndarray], np.ndarray]:
        def apply(p: np.ndarray) -> np.ndarray:
            p = np.asarray(p, dtype=float)
            r = np.hypot(p[..., 0], p[..., 1])
            s = np.mod(np.arctan2(p[..., 1], p[..., 0]) / (2 * np.pi), 1.0)
            angle = 2 * np.pi * fn(s)
            return np.stack([r * np.cos(angle), r * np.sin(angle)], axis=-1)

        return apply

    return Homeomorphism2D(lift(h), lift(h_inv), "angular h")


def line_map_from_circle(circle: ScalarMap) -> RealizableMapSpec:
    """Q = M ∘ P̂ ∘ M⁻¹ on the line for M the Cayley transform (cot(πt) on the circle)."""

    def Q(x: np.ndarray) -> np.ndarray:  # noqa: N802
        x = np.asarray(x, dtype=float)
        t = 0.5 - np.arctan(x) / np.pi
        with np.errstate(divide="ignore"):
            image = 1.0 / np.tan(np.pi * circle(t))
        return np.where(x < 0, image, x)

    return RealizableMapSpec("cayley image", Q)


@dataclass
class DiscRealization:
    """A flow whose first-out map on the unit disc is a prescribed circle map."""

    flow: Flow
    region: Region
    circle: CircleMapSpec
    halfplane: RealizedFlow
    h: Homeomorphism2D

    def to_dict(self) -> dict[str, Any]:
        return {"circle_map": self.circle.label, "alpha": self.circle.alpha,
                "flow": self.flow.to_dict(), "region": self.region.to_dict()}


def build_disc_realization(
    circle: CircleMapSpec, cfg: Tolerances | None = None
) -> DiscRealization:
    """Realize ``circle`` as F_E on the unit circle.

    The circle map is read as the identity on [0, α] followed by a strict
    decrease to 0 at 1, with its maximum at α.
    """
    tol = cfg or config.tolerances
    circle.validate()
    h, h_inv = piecewise_linear_h(circle.alpha)

    def centred(t: np.ndarray) -> np.ndarray:
        return h(circle.P(h_inv(t)))

    q_spec = line_map_from_circle(centred)
    q_spec.label = f"cayley({circle.label})"
    halfplane = build_halfplane_realization(q_spec, tol)
    cayley = MoebiusMap.cayley()
    disc_flow = moebius_conjugate(halfplane, cayley.inverse(), cfg=tol)
    angular = angular_reparametrization(h, h_inv)
    flow = ConjugatedFlow(disc_flow, angular.inverted(), f"disc realization({circle.label})")
    flow.kind = FlowKind.REALIZATION
    logger.info("Realized circle map %s on the unit disc (alpha=%g)", circle.label,
                circle.alpha)
    return DiscRealization(flow, make_disc(), circle, halfplane, angular)


def verify_disc_realization(
    dr: DiscRealization, n: int = 64, horizon: float | None = None,
    cfg: Tolerances | None = None,
) -> float:
    """Max circular distance between sampled F_E and the circle map."""
    sample = sample_F_E(dr.flow, dr.region, n, horizon, cfg)
    expected = dr.circle.P(sample.s)
    gap = np.abs(sample.values - expected) % 1.0
    gap = np.minimum(gap, 1.0 - gap)
    worst = float(np.max(np.where(np.isnan(gap), np.inf, gap)))
    logger.info("Disc realization %s: max parameter error %.3e", dr.circle.label, worst)
    return worst


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class RealizationError(Exception):
    """Base realization error."""


class HypothesisViolation(RealizationError):  # noqa: N818
    """The prescribed map fails the realization hypotheses on probes."""

    def __init__(self, message: str, failed: list[dict[str, Any]]) -> None:
        super().__init__(message)
        self.failed = failed


class BracketError(RealizationError):
    """Root bracket growth failed."""
