"""
Hybrid.

Impacting systems on the closed upper half plane: a local flow on H⁺, a
reset map P on the boundary line and a sliding flow on the sliding set
R_s = {(x, 0) | P(x) = x and E_{H⁺}(x, 0) = (x, 0)}.

Trajectories alternate flow segments, ended by the first-out event
detector on H⁺, with jumps (x, 0) -> (P(x), 0). Continuation stops at the
horizon, after ``max_events`` jumps, when Zeno behavior is detected, or
when the orbit leaves the closed half plane without a reset.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from exitmap.config import Tolerances, config
from exitmap.core.flow_core import (
    ClosedFormFlow,
    ConjugatedFlow,
    Flow,
    FlowError,
    Homeomorphism2D,
    as_point,
    builtin_flow,
)
from exitmap.core.geometry import Location, make_band, make_halfplane
from exitmap.modules.first_maps import (
    CheckResult,
    PreconditionError,
    Status,
    Verdict,
    first_in,
    first_out,
)
from exitmap.modules.realization import BracketError, solve_negative_branch, tabulated_branch

logger = logging.getLogger(__name__)

ScalarMap = Callable[[np.ndarray], np.ndarray]

UPPER = make_halfplane("upper")
LOWER = make_halfplane("lower")

# ---------------------------------------------------------------------------
# Reset maps and systems
# ---------------------------------------------------------------------------

@dataclass
class ResetMap:
    """Partial map P on the boundary line, defined on the closed interval ``domain``."""

    label: str
    fn: ScalarMap
    domain: tuple[float, float] = (-np.inf, np.inf)

    def defined(self, x: float, tol: float = 0.0) -> bool:
        lo, hi = self.domain
        return bool(lo - tol <= x <= hi + tol)

    @property
    def total(self) -> bool:
        return self.domain == (-np.inf, np.inf)

    def __call__(self, x: Any) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def at(self, x: float) -> float:
        if not self.defined(x, config.tolerances.boundary):
            raise ResetUndefinedError(np.array([x, 0.0]))
        return float(self(np.array([x]))[0])

    @classmethod
    def restitution(cls, r: float) -> ResetMap:
        """Velocity reversal v -> -r v at impact, defined for v <= 0."""
        if not 0 <= r <= 1:
            raise HybridError(f"restitution coefficient must lie in [0, 1], got {r}")
        return cls(f"restitution({r:g})", lambda x: -r * x, (-np.inf, 0.0))

    @classmethod
    def oscillator(cls, mu: float) -> ResetMap:
        """P(x) = max(-μx, x)."""
        if not mu > 0:
            raise HybridError(f"oscillator needs mu > 0, got {mu}")
        return cls(f"oscillator({mu:g})", lambda x: np.maximum(-mu * x, x))

    @classmethod
    def tabulated(cls, xs: Any, ys: Any, domain: tuple[float, float] | None = None) -> ResetMap:
        """Linear interpolation of a table; extrapolated on the left, identity past the right."""
        xs = np.asarray(xs, dtype=float)
        branch = tabulated_branch(xs, ys)
        right = float(xs[-1])

        def fn(x: np.ndarray) -> np.ndarray:
            return np.where(x > right, x, branch(np.minimum(x, right)))

        return cls(f"tabulated({xs.size})", fn, domain or (-np.inf, np.inf))

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "domain": [float(v) for v in self.domain]}


def stationary_flow() -> ClosedFormFlow:
    """Φ_s(t, p) = p."""
    return ClosedFormFlow(lambda ts, x: np.tile(x, (ts.size, 1)), "stationary",
                          lambda p: np.zeros_like(np.asarray(p, dtype=float)))


@dataclass
class ImpactingSystem:
    """(P, Φ, Φ_s) on the closed upper half plane."""

    reset: ResetMap
    flow: Flow
    sliding_flow: Flow = field(default_factory=stationary_flow)
    label: str = "impacting system"
    sample_table: tuple[np.ndarray, np.ndarray] | None = None

    def exit_fixed(self, x: float, horizon: float | None = None,
                   cfg: Tolerances | None = None) -> bool:
        """E_{H⁺}(x, 0) = (x, 0)."""
        outcome = first_out(self.flow, UPPER, (x, 0.0), horizon, cfg)
        return outcome.is_fixed(cfg)

    def in_sliding_set(self, x: float, horizon: float | None = None,
                       cfg: Tolerances | None = None) -> bool:
        tol = cfg or config.tolerances
        if not self.reset.defined(x, tol.boundary):
            return False
        if abs(float(self.reset(np.array([x]))[0]) - x) > tol.fixed_point:
            return False
        return self.exit_fixed(x, horizon, tol)

    def check_closed(self, xs: Any, horizon: float | None = None,
                     cfg: Tolerances | None = None) -> CheckResult:
        """Im E_{H⁺} ⊂ dom P × {0} on sampled boundary points."""
        tol = cfg or config.tolerances
        violations = []
        for x in np.asarray(xs, dtype=float):
            outcome = first_out(self.flow, UPPER, (x, 0.0), horizon, tol)
            if outcome.defined and not self.reset.defined(outcome.point[0], tol.boundary):
                violations.append(f"E(({x:g}, 0)) = {outcome.point[0]:.6g} outside dom P")
        verdict = Verdict.FAIL if violations else Verdict.PASS
        return CheckResult("image-in-domain", verdict, violations)

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "reset": self.reset.to_dict(),
                "flow": self.flow.to_dict(), "sliding_flow": self.sliding_flow.to_dict()}


def sliding_set(system: ImpactingSystem, xs: Any, horizon: float | None = None,
                cfg: Tolerances | None = None) -> list[float]:
    """Sampled R_s."""
    return [float(x) for x in np.asarray(xs, dtype=float)
            if system.in_sliding_set(float(x), horizon, cfg)]


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

class Policy(str, Enum):
    PREFER_JUMP = "prefer-jump"
    PREFER_FLOW = "prefer-flow"
    PREFER_SLIDE = "prefer-slide"


class Termination(str, Enum):
    HORIZON = "horizon"
    ZENO = "zeno-detected"
    LEFT_DOMAIN = "left-domain"
    MAX_EVENTS = "max-events"


class ZenoStatus(str, Enum):
    ZENO = "zeno"
    NOT_ZENO = "not-zeno"
    INCONCLUSIVE = "inconclusive"


@dataclass
class HybridSegment:
    index: int
    t_start: float
    t_end: float
    mode: str
    times: np.ndarray
    path: np.ndarray


@dataclass
class JumpRecord:
    index: int
    time: float
    pre: np.ndarray
    post: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.index, "t": self.time, "pre_x": float(self.pre[0]),
                "pre_y": float(self.pre[1]), "post_x": float(self.post[0]),
                "post_y": float(self.post[1])}


@dataclass
class ZenoVerdict:
    status: ZenoStatus
    events: int
    ratios: list[float] = field(default_factory=list)
    accumulation_time: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status.value, "events": self.events,
                "ratios": self.ratios, "accumulation_time": self.accumulation_time}


@dataclass
class HybridTrajectory:
    """Segments and jumps over a hybrid time domain with natural-number indices."""

    start: np.ndarray
    policy: Policy
    segments: list[HybridSegment] = field(default_factory=list)
    jumps: list[JumpRecord] = field(default_factory=list)
    termination: Termination = Termination.HORIZON
    end_time: float = 0.0
    zeno: ZenoVerdict | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def jump_times(self) -> list[float]:
        return [j.time for j in self.jumps]

    @property
    def event_times(self) -> list[float]:
        """t(0) = 0 followed by the jump times."""
        return [0.0, *self.jump_times]

    def to_rows(self) -> list[dict[str, Any]]:
        rows = []
        for seg in self.segments:
            for t, (x, y) in zip(seg.times, seg.path):
                rows.append({"n": seg.index, "t": float(t), "x": float(x), "y": float(y),
                             "mode": seg.mode})
        return rows

    def to_dict(self) -> dict[str, Any]:
        return {
            "start": self.start.tolist(),
            "policy": self.policy.value,
            "termination": self.termination.value,
            "end_time": self.end_time,
            "jumps": [j.to_dict() for j in self.jumps],
            "segments": [{"n": s.index, "t_start": s.t_start, "t_end": s.t_end, "mode": s.mode}
                         for s in self.segments],
            "zeno": None if self.zeno is None else self.zeno.to_dict(),
            "notes": self.notes,
        }


def _segment(flow: Flow, n: int, p: np.ndarray, t0: float, duration: float,
             mode: str) -> HybridSegment:
    k = int(min(400, max(2, duration / 0.01)))
    local = np.linspace(0.0, duration, k)
    path = flow.orbit(p, duration)(local)
    return HybridSegment(n, t0, t0 + duration, mode, t0 + local, path)


def _choose(system: ImpactingSystem, x: float, policy: Policy, just_jumped: bool,
            horizon: float, tol: Tolerances) -> str:
    can_jump = not just_jumped and system.reset.defined(x, tol.boundary)
    sliding = system.in_sliding_set(x, horizon, tol)
    if policy is Policy.PREFER_JUMP:
        if can_jump and abs(system.reset.at(x) - x) > tol.fixed_point:
            return "jump"
        return "slide" if sliding else "flow"
    if policy is Policy.PREFER_FLOW:
        if not system.exit_fixed(x, horizon, tol):
            return "flow"
        return "slide" if sliding else ("jump" if can_jump else "flow")
    if sliding:
        return "slide"
    return "jump" if can_jump else "flow"


def simulate(
    system: ImpactingSystem,
    x0: Any,
    horizon: float | None = None,
    max_events: int = 100,
    cfg: Tolerances | None = None,
    *,
    policy: Policy = Policy.PREFER_SLIDE,
) -> HybridTrajectory:
    """Forward hybrid trajectory from ``x0`` in the closed upper half plane."""
    tol = cfg or config.tolerances
    t_max = tol.horizon if horizon is None else float(horizon)
    p = as_point(x0)
    if UPPER.locate(p, tol.boundary) is Location.OUTSIDE:
        raise PreconditionError(f"{p.tolist()} is below the impact line")
    traj = HybridTrajectory(p.copy(), policy)
    t, n, just_jumped = 0.0, 0, False
    while True:
        if t >= t_max:
            traj.termination = Termination.HORIZON
            break
        if UPPER.locate(p, tol.boundary) is Location.BOUNDARY:
            x = float(p[0])
            p = np.array([x, 0.0])
            mode = _choose(system, x, policy, just_jumped, t_max - t, tol)
            if mode == "slide":
                _slide(system, traj, n, p, t, t_max)
                t = t_max
                traj.termination = Termination.HORIZON
                break
            if mode == "jump":
                post = np.array([system.reset.at(x), 0.0])
                traj.jumps.append(JumpRecord(n, t, p.copy(), post))
                n += 1
                p, just_jumped = post, True
                if len(traj.jumps) >= tol.zeno_min_events:
                    verdict = detect_zeno(traj, tol, horizon=t_max)
                    if verdict.status is ZenoStatus.ZENO:
                        traj.zeno = verdict
                        traj.termination = Termination.ZENO
                        break
                if len(traj.jumps) >= max_events:
                    traj.termination = Termination.MAX_EVENTS
                    break
                continue
        outcome = first_out(system.flow, UPPER, p, t_max - t, tol)
        if outcome.status is Status.UNRESOLVED:
            traj.notes.append(f"unresolved departure from {p.tolist()} at t={t:.6g}")
            traj.termination = Termination.LEFT_DOMAIN
            break
        if not outcome.defined:
            if outcome.horizon > 0:
                traj.segments.append(_segment(system.flow, n, p, t, outcome.horizon, "flow"))
            t += outcome.horizon
            if outcome.note:
                traj.notes.append(outcome.note)
                traj.termination = Termination.LEFT_DOMAIN
            else:
                traj.termination = Termination.HORIZON
            break
        if outcome.time == 0.0 or outcome.is_fixed(tol):
            # leaves the closed half plane at once with no reset to apply
            traj.notes.append(f"orbit of {p.tolist()} leaves H+ immediately at t={t:.6g}")
            traj.termination = Termination.LEFT_DOMAIN
            break
        traj.segments.append(_segment(system.flow, n, p, t, outcome.time, "flow"))
        t += outcome.time
        landing = float(outcome.point[0])
        if not system.reset.defined(landing, tol.boundary) and \
                not system.in_sliding_set(landing, t_max - t, tol):
            raise ResetUndefinedError(np.array([landing, 0.0]))
        p, just_jumped = np.array([landing, 0.0]), False
    traj.end_time = min(t, t_max)
    if traj.zeno is None:
        traj.zeno = detect_zeno(traj, tol, horizon=t_max)
    logger.info("Hybrid trajectory from %s: %s after %d jumps at t=%.6g",
                traj.start.tolist(), traj.termination.value, len(traj.jumps), traj.end_time)
    return traj


def _slide(system: ImpactingSystem, traj: HybridTrajectory, n: int, p: np.ndarray,
           t: float, t_max: float) -> None:
    traj.segments.append(_segment(system.sliding_flow, n, p, t, t_max - t, "sliding"))


def detect_zeno(
    traj: HybridTrajectory, cfg: Tolerances | None = None, *, horizon: float | None = None,
) -> ZenoVerdict:
    """Geometric decrease of inter-jump times over the last window of events.

    An accumulation estimated past ``horizon`` is not Zeno within the horizon;
    the verdict is not-zeno and keeps the estimate.
    """
    tol = cfg or config.tolerances
    times = np.asarray(traj.jump_times, dtype=float)
    if times.size < tol.zeno_min_events:
        return ZenoVerdict(ZenoStatus.INCONCLUSIVE, int(times.size))
    gaps = np.diff(times)
    if np.any(gaps <= 0):
        return ZenoVerdict(ZenoStatus.INCONCLUSIVE, int(times.size))
    ratios = gaps[1:] / gaps[:-1]
    window = ratios[-tol.zeno_window:]
    if window.size < tol.zeno_window or np.any(window >= 1.0 - tol.zeno_epsilon):
        return ZenoVerdict(ZenoStatus.NOT_ZENO, int(times.size), window.tolist())
    rho = float(np.exp(np.mean(np.log(window))))
    accumulation = float(times[-1] + gaps[-1] * rho / (1.0 - rho))
    if horizon is not None and accumulation > horizon:
        return ZenoVerdict(ZenoStatus.NOT_ZENO, int(times.size), window.tolist(), accumulation)
    return ZenoVerdict(ZenoStatus.ZENO, int(times.size), window.tolist(), accumulation)


# ---------------------------------------------------------------------------
# Flows inducing impacting systems
# ---------------------------------------------------------------------------

def induced_system(
    flow_below: Flow,
    flow_above: Flow,
    cfg: Tolerances | None = None,
    *,
    xs: Any | None = None,
    horizon: float | None = None,
) -> ImpactingSystem:
    """The impacting system whose reset is the first-out map of ``flow_below`` on H⁻.

    Raises ``NotInducedError`` with a failure report when the sampled
    first-out map is unresolved somewhere, has no exits, or misses the
    landing points of ``flow_above``.
    """
    tol = cfg or config.tolerances
    grid = np.linspace(-3.0, 3.0, 61) if xs is None else np.asarray(xs, dtype=float)
    outcomes = [first_out(flow_below, LOWER, (x, 0.0), horizon, tol) for x in grid]
    unresolved = [float(x) for x, o in zip(grid, outcomes) if o.status is Status.UNRESOLVED]
    if unresolved:
        raise NotInducedError(
            "first-out map of the lower flow is unresolved at x = "
            + ", ".join(f"{x:.4g}" for x in unresolved),
            {"unresolved": unresolved, "samples": int(grid.size)},
        )
    defined = [(float(x), float(o.point[0])) for x, o in zip(grid, outcomes) if o.defined]
    if not defined:
        raise NotInducedError("no exits within horizon", {"samples": int(grid.size)})
    table_x = np.array([x for x, _ in defined])
    table_y = np.array([y for _, y in defined])
    reset = ResetMap(f"E[{flow_below.label}]", tabulated_branch(table_x, table_y),
                     (float(table_x.min()), float(table_x.max())))
    system = ImpactingSystem(reset, flow_above, label=f"induced({flow_below.label})",
                             sample_table=(table_x, table_y))
    closed = system.check_closed(grid, horizon, tol)
    if not closed.passed:
        raise NotInducedError("image of the upper first-out map leaves dom P",
                              {"violations": closed.violations})
    logger.info("Induced %s from %d samples", system.label, len(defined))
    return system


# ---------------------------------------------------------------------------
# Normal form
# ---------------------------------------------------------------------------

@dataclass
class NormalForm:
    system: ImpactingSystem
    H: Homeomorphism2D  # noqa: N815
    flip: int
    shift: float
    max_residual: float


def _identity_threshold(
    P: ResetMap, extent: float, tol: Tolerances  # noqa: N803
) -> tuple[int, float]:
    xs = np.linspace(-extent, extent, 401)
    moved = np.abs(P(xs) - xs) > tol.fixed_point
    if not moved.any():
        raise NormalFormError("reset map is the identity on the probe range")
    if moved.all():
        raise NormalFormError("reset map has no identity half-line on the probe range")
    moving = np.flatnonzero(moved)
    still = np.flatnonzero(~moved)
    if moving.max() < still.min():
        flip, a, b = 1, xs[moving.max()], xs[still.min()]
    elif still.max() < moving.min():
        flip, a, b = -1, xs[moving.min()], xs[still.max()]
    else:
        raise NormalFormError("reset map is not decreasing-then-identity")
    for _ in range(80):
        mid = 0.5 * (a + b)
        if abs(float(P(np.array([mid]))[0]) - mid) > 1e-13 * max(1.0, abs(mid)):
            a = mid
        else:
            b = mid
    return flip, float(b)


def normal_form_conjugate(
    system: ImpactingSystem, cfg: Tolerances | None = None, *, extent: float = 10.0,
) -> NormalForm:
    """Conjugate to a system whose reset is Q(x) = -x on x ≤ 0.

    The boundary coordinate is flipped and shifted so P decreases on
    (-∞, 0] and is the identity on [0, ∞); then h(x) = -P⁻¹(x) for x ≥ 0
    (negative branch) and h(x) = x otherwise, and H(x, y) = (h(σx - α), y).
    """
    tol = cfg or config.tolerances
    P = system.reset  # noqa: N806
    if not P.total:
        raise NormalFormError(f"reset {P.label} is not total")
    flip, alpha = _identity_threshold(P, extent, tol)

    def normalized(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        # exact identity on u >= 0; alpha carries the bisection error
        return np.where(u >= 0, u, flip * P(flip * (u + alpha)) - alpha)

    def h(u: np.ndarray) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = u.copy()
        for k in np.flatnonzero(u >= 0):
            out[k] = -solve_negative_branch(normalized, float(u[k]), tol)
        return out

    def h_inv(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.where(v >= 0, normalized(-np.abs(v)), v)

    def forward(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = p.copy()
        out[..., 0] = h(flip * p[..., 0].ravel() - alpha).reshape(p[..., 0].shape)
        return out

    def inverse(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = p.copy()
        out[..., 0] = flip * (h_inv(p[..., 0]) + alpha)
        return out

    try:
        H = Homeomorphism2D(forward, inverse, f"normal form[{P.label}]")  # noqa: N806
        H.check(np.column_stack([np.linspace(-3, 3, 31), np.linspace(0, 2, 31)]), 1e-6)
    except (BracketError, FlowError) as exc:
        raise NormalFormError(f"cannot build the normal-form homeomorphism: {exc}") from exc

    def q(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        pts = np.column_stack([v.ravel(), np.zeros(v.size)])
        pre = inverse(pts)[:, 0]
        image = np.column_stack([P(pre), np.zeros(v.size)])
        return forward(image)[:, 0].reshape(v.shape)

    conjugated = ImpactingSystem(
        ResetMap(f"Q[{P.label}]", q),
        ConjugatedFlow(system.flow, H),
        ConjugatedFlow(system.sliding_flow, H),
        label=f"normal form({system.label})",
    )
    xs = np.linspace(-3.0, 0.0, 64)
    residual = float(np.max(np.abs(q(xs) + xs)))
    logger.info("Normal form of %s: flip=%d shift=%.3g residual %.2e", system.label, flip,
                alpha, residual)
    return NormalForm(conjugated, H, flip, alpha, residual)


def check_conjugacy_invariance(
    sys_a: ImpactingSystem,
    sys_b: ImpactingSystem,
    H: Homeomorphism2D,  # noqa: N803
    cfg: Tolerances | None = None,
    *,
    xs: Any | None = None,
    times: tuple[float, ...] = (0.3, 0.7, 1.3),
    limit: float = 1e-6,
) -> CheckResult:
    """Residuals of H(P(x), 0) = (Q(H(x, 0)_x), 0), H∘Φ = Ψ∘H and H∘Φ_s = Ψ_s∘H."""
    tol = cfg or config.tolerances
    grid = np.linspace(-3.0, 3.0, 25) if xs is None else np.asarray(xs, dtype=float)
    on_line = np.column_stack([grid, np.zeros_like(grid)])

    reset_res = 0.0
    for x, hx in zip(grid, H(on_line)):
        if not sys_a.reset.defined(x):
            continue
        lhs = H(np.array([sys_a.reset.at(float(x)), 0.0]))[0]
        rhs = sys_b.reset.at(float(hx[0])) if sys_b.reset.defined(float(hx[0])) else np.inf
        reset_res = max(reset_res, abs(lhs - rhs))

    probes = np.column_stack([np.repeat(grid[::4], 3), np.tile([0.25, 1.0, 2.0], grid[::4].size)])
    flow_res = _flow_residual(sys_a.flow, sys_b.flow, H, probes, times)
    sliding_xs = sliding_set(sys_a, grid, cfg=tol)
    slide_pts = np.column_stack([sliding_xs, np.zeros(len(sliding_xs))])
    slide_res = _flow_residual(sys_a.sliding_flow, sys_b.sliding_flow, H, slide_pts, times)

    residuals = {"reset": reset_res, "flow": flow_res, "sliding": slide_res}
    violations = [f"{k} residual {v:.3e}" for k, v in residuals.items() if not v <= limit]
    verdict = Verdict.FAIL if violations else Verdict.PASS
    return CheckResult("conjugacy", verdict, violations, residuals)


def _flow_residual(flow_a: Flow, flow_b: Flow, H: Homeomorphism2D,  # noqa: N803
                   pts: np.ndarray, times: tuple[float, ...]) -> float:
    worst = 0.0
    ts = np.asarray(times, dtype=float)
    for p in pts:
        try:
            lhs = H(flow_a.orbit(p, ts.max())(ts))
            rhs = flow_b.orbit(H(p), ts.max())(ts)
        except FlowError:
            continue
        gap = np.abs(lhs - rhs)
        if np.all(np.isfinite(gap)):
            worst = max(worst, float(gap.max()))
    return worst


# ---------------------------------------------------------------------------
# Poincaré map and scenarios
# ---------------------------------------------------------------------------

@dataclass
class PoincareStep:
    x: float
    value: float | None
    flag: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"x": self.x, "value": self.value, "flag": self.flag}


def poincare_composition(
    system: ImpactingSystem, x: float, horizon: float | None = None,
    cfg: Tolerances | None = None,
) -> PoincareStep:
    """One bounce: x -> boundary coordinate of E_{H⁺}(P(x), 0)."""
    tol = cfg or config.tolerances
    if not system.reset.defined(x, tol.boundary):
        raise ResetUndefinedError(np.array([x, 0.0]))
    if system.in_sliding_set(x, horizon, tol):
        return PoincareStep(x, x, "sliding")
    y = system.reset.at(x)
    outcome = first_out(system.flow, UPPER, (y, 0.0), horizon, tol)
    if not outcome.defined:
        return PoincareStep(x, None, "undefined")
    z = float(outcome.point[0])
    flag = "equilibrium or periodic" if abs(z - x) <= tol.fixed_point else ""
    return PoincareStep(x, z, flag)


def orbits_between(
    system: ImpactingSystem, x: float, horizon: float | None = None, max_events: int = 20,
    cfg: Tolerances | None = None,
) -> CheckResult:
    """With P(x) = y and E(y) = z between x and y, later boundary hits stay between x and y."""
    tol = cfg or config.tolerances
    y = system.reset.at(x)
    step = first_out(system.flow, UPPER, (y, 0.0), horizon, tol)
    if not step.defined:
        return CheckResult("orbits-between", Verdict.NOT_APPLICABLE, ["E(P(x)) undefined"])
    z = float(step.point[0])
    lo, hi = sorted((x, y))
    if not lo < z < hi:
        return CheckResult("orbits-between", Verdict.NOT_APPLICABLE,
                           [f"z={z:.6g} is not strictly between {lo:.6g} and {hi:.6g}"])
    traj = simulate(system, (z, 0.0), horizon, max_events, tol)
    hits = [float(j.pre[0]) for j in traj.jumps] + [float(j.post[0]) for j in traj.jumps]
    eps = tol.fixed_point
    outside = [h for h in hits if not lo - eps <= h <= hi + eps]
    verdict = Verdict.FAIL if outside else Verdict.PASS
    return CheckResult("orbits-between", verdict,
                       [f"boundary hit {h:.6g} outside [{lo:.6g}, {hi:.6g}]" for h in outside],
                       {"x": x, "y": y, "z": z, "hits": len(hits)})


@dataclass
class ReturnTimeReport:
    epsilon: float
    exit_time: float | None
    return_time: float | None
    status: str

    @property
    def total(self) -> float | None:
        if self.exit_time is None or self.return_time is None:
            return None
        return self.exit_time + self.return_time

    def to_dict(self) -> dict[str, Any]:
        return {"epsilon": self.epsilon, "exit_time": self.exit_time,
                "return_time": self.return_time, "total": self.total, "status": self.status}


def first_in_time_scenario(
    epsilon: float,
    *,
    alpha: float = 1.0,
    beta: float = 1.0,
    gamma: float = 1.0,
    t_room: float = 20.0,
    t_hot: float = 80.0,
    horizon: float | None = None,
    cfg: Tolerances | None = None,
) -> ReturnTimeReport:
    """Time for the water temperature to leave and re-enter |T_w - T_r| ≤ ε.

    The state is (T_w, T_s), starting from room-temperature water and a hot
    solid (T_r, T_H).
    """
    if not epsilon > 0:
        raise HybridError(f"band half width must be positive, got {epsilon}")
    tol = cfg or config.tolerances
    flow = builtin_flow("cooling", alpha=alpha, beta=beta, gamma=gamma, t_room=t_room)
    band = make_band(axis=0, center=t_room, half_width=epsilon)
    start = np.array([t_room, t_hot])
    leave = first_out(flow, band, start, horizon, tol)
    if not leave.defined:
        logger.warning("Water temperature never leaves the band of half width %g", epsilon)
        return ReturnTimeReport(epsilon, None, None, "never-exits")
    back = first_in(flow, band, leave.point, horizon, tol)
    if not back.defined:
        return ReturnTimeReport(epsilon, leave.time, None, "never-returns")
    return ReturnTimeReport(epsilon, leave.time, back.time, "ok")


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class HybridError(Exception):
    """Base hybrid-system error."""


class ResetUndefinedError(HybridError):
    """The reset map is undefined at a reached boundary point."""

    def __init__(self, point: np.ndarray) -> None:
        super().__init__(f"reset undefined at boundary point {np.asarray(point).tolist()}")
        self.point = np.asarray(point)


class NotInducedError(HybridError):
    """The flows do not induce an impacting system."""

    def __init__(self, message: str, report: dict[str, Any]) -> None:
        super().__init__(message)
        self.report = report


class NormalFormError(HybridError):
    """The reset map violates the normal-form hypotheses."""
