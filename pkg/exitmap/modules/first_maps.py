"""
First Maps.

First-out and first-in maps of a flow on a regular open set, the
five-type classification of boundary points, and the invariance checks
that are phrased in terms of those types.

Exit detection:
1. On the boundary, a zero-time probe ladder decides whether the orbit
   leaves A immediately (T = 0).
2. Otherwise the orbit is marched on a grid that grows geometrically from
   the last inside probe up to ``march_max_step``.
3. The first sample that is not inside A is bracketed and bisected; a
   crossing that re-enters A right away is a graze and is discarded.
4. No crossing before the horizon means "undefined within horizon".
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from exitmap.config import Tolerances, config
from exitmap.core.flow_core import Flow, FlowError, OrbitSegment, as_point
from exitmap.core.geometry import BOUNDARY, INSIDE, OUTSIDE, Location, Region

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------

class Status(str, Enum):
    DEFINED = "defined"
    UNDEFINED = "undefined-within-horizon"
    UNRESOLVED = "unresolved"


class TypeLabel(str, Enum):
    A1 = "A-1"
    A2 = "A-2"
    A3 = "A-3"
    B = "B"
    C = "C"
    UNRESOLVED = "Unresolved"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"
    NOT_APPLICABLE = "not-applicable"


@dataclass
class ProbeLog:
    """What the detector looked at."""

    ladder: list[tuple[float, str]] = field(default_factory=list)
    brackets: list[tuple[float, float]] = field(default_factory=list)
    decision: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"ladder": self.ladder, "brackets": self.brackets, "decision": self.decision}


@dataclass
class ExitOutcome:
    """Result of a first-out query Tᵉ_A(x), E_A(x)."""

    status: Status
    start: np.ndarray
    horizon: float
    time: float | None = None
    point: np.ndarray | None = None
    param: float | None = None
    graze_count: int = 0
    probes: ProbeLog = field(default_factory=ProbeLog)
    note: str = ""
    kind: str = "first-out"

    @property
    def defined(self) -> bool:
        return self.status is Status.DEFINED

    def is_fixed(self, cfg: Tolerances | None = None) -> bool:
        """E(x) = x: immediate exit, or an exit point within tolerance of the start."""
        if not self.defined:
            return False
        tol = cfg or config.tolerances
        if self.time == 0.0:
            return True
        return bool(np.max(np.abs(self.point - self.start)) <= tol.fixed_point)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "status": self.status.value,
            "start": self.start.tolist(),
            "time": self.time,
            "point": None if self.point is None else self.point.tolist(),
            "param": self.param,
            "horizon": self.horizon,
            "graze_count": self.graze_count,
            "note": self.note,
        }


@dataclass
class ReturnOutcome(ExitOutcome):
    """Result of a first-in query Tʳ_B(x), R_B(x) on a closed set B."""

    kind: str = "first-in"


@dataclass
class BoundaryType:
    """Type label of a boundary point with the evidence behind it."""

    label: TypeLabel
    point: np.ndarray
    exit: ExitOutcome
    ret: ReturnOutcome
    horizon: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label.value,
            "point": self.point.tolist(),
            "horizon": self.horizon,
            "exit": self.exit.to_dict(),
            "return": self.ret.to_dict(),
            "notes": self.notes,
        }


@dataclass
class CheckResult:
    """Verdict of one property check."""

    name: str
    verdict: Verdict
    violations: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "verdict": self.verdict.value,
            "violations": self.violations,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# Event detection
# ---------------------------------------------------------------------------

def exit_time(
    flow: Flow,
    region: Region,
    x: Any,
    horizon: float | None = None,
    cfg: Tolerances | None = None,
    *,
    kind: str = "first-out",
) -> ExitOutcome:
    """Compute Tᵉ_A(x) = inf{t > 0 | Φ(t, x) ∉ A} and the exit point."""
    tol = cfg or config.tolerances
    t_max = tol.horizon if horizon is None else float(horizon)
    start = as_point(x)
    outcome_cls = ReturnOutcome if kind == "first-in" else ExitOutcome
    where = region.locate(start, tol.boundary)
    if where is Location.OUTSIDE:
        raise PreconditionError(f"{start.tolist()} is outside the closure of {region.name}")

    log = ProbeLog()
    segment = flow.orbit(start, t_max)
    t_inside = 0.0
    if where is Location.BOUNDARY:
        decision, t_inside = _zero_time_decision(segment, region, tol, log)
        log.decision = decision
        if decision == "exit":
            return outcome_cls(Status.DEFINED, start, t_max, time=0.0, point=start.copy(),
                               param=_param_of(region, start, tol), probes=log)
        if decision == "unresolved":
            logger.debug("%s at %s: probe ladder alternates", kind, start.tolist())
            return outcome_cls(Status.UNRESOLVED, start, t_max, probes=log,
                               note="zero-time probe ladder alternates membership")
    return _march(segment, region, start, t_inside, t_max, tol, log, outcome_cls)


def _zero_time_decision(
    segment: OrbitSegment, region: Region, tol: Tolerances, log: ProbeLog
) -> tuple[str, float]:
    """Decide from the probe ladder whether the orbit leaves A at once.

    Probes inside the boundary band carry no information. Among the rest,
    two or more membership flips along the ladder mean "unresolved";
    otherwise the smallest informative probe decides.
    """
    times = np.array(tol.ladder())
    codes = region.locate_many(segment(times), tol.boundary)
    log.ladder = [(float(t), Location.from_code(c).value) for t, c in zip(times, codes)]
    informative = [(t, c) for t, c in zip(times, codes) if c != BOUNDARY]
    if not informative:
        return "exit", 0.0
    flips = sum(1 for (_, a), (_, b) in zip(informative, informative[1:]) if a != b)
    if flips >= 2:
        return "unresolved", 0.0
    t_last, c_last = informative[-1]
    if c_last == OUTSIDE:
        return "exit", 0.0
    return "march", float(t_last)


def _march_grid(t0: float, t_max: float, tol: Tolerances) -> np.ndarray:
    times: list[float] = []
    t = t0
    step = t0 if t0 > 0 else tol.march_first_step
    while step < tol.march_max_step and t < t_max:
        t += step
        times.append(t)
        step *= 2.0
    uniform = np.arange(t + tol.march_max_step, t_max, tol.march_max_step)
    grid = np.concatenate([np.array(times), uniform, [t_max]])
    return grid[(grid > t0) & (grid <= t_max)]


def _march(
    segment: OrbitSegment,
    region: Region,
    start: np.ndarray,
    t0: float,
    t_max: float,
    tol: Tolerances,
    log: ProbeLog,
    outcome_cls: type[ExitOutcome],
) -> ExitOutcome:
    grid = _march_grid(t0, t_max, tol)
    grazes = 0
    t_prev = t0
    for lo in range(0, grid.size, tol.march_chunk):
        chunk = grid[lo:lo + tol.march_chunk]
        pts = segment(chunk)
        codes = region.locate_many(pts, tol.boundary)
        k = 0
        while k < chunk.size:
            if codes[k] == INSIDE:
                t_prev = float(chunk[k])
                k += 1
                continue
            t_hit = float(chunk[k])
            if np.isnan(pts[k]).any():
                return outcome_cls(
                    Status.UNDEFINED, start, t_prev, graze_count=grazes, probes=log,
                    note=f"flow domain ends before t={t_hit:.6g}",
                )
            crossing = _resolve_crossing(segment, region, t_prev, t_hit, codes[k], tol, log)
            grazes += crossing.grazes
            if crossing.time is not None:
                point = segment.at(crossing.time)
                return outcome_cls(
                    Status.DEFINED, start, t_max, time=crossing.time, point=point,
                    param=_param_of(region, point, tol), graze_count=grazes, probes=log,
                )
            # only grazes up to this band sample; it counts as inside
            t_prev = t_hit
            k += 1
    if grazes:
        logger.debug("Discarded %d grazes on the orbit of %s", grazes, start.tolist())
    return outcome_cls(Status.UNDEFINED, start, t_max, graze_count=grazes, probes=log)


@dataclass
class _Crossing:
    time: float | None
    grazes: int


def _resolve_crossing(
    segment: OrbitSegment,
    region: Region,
    t_in: float,
    t_out: float,
    code_out: int,
    tol: Tolerances,
    log: ProbeLog,
) -> _Crossing:
    """Bisect (t_in, t_out] for the first time not in A, skipping grazes."""
    grazes = 0
    a = t_in
    for _ in range(64):
        b = _bisect(segment, region, a, t_out, tol)
        log.brackets.append((a, t_out))
        reentry = _graze_reentry(segment, region, b, tol)
        if reentry is None:
            return _Crossing(b, grazes)
        grazes += 1
        if reentry >= t_out:
            break
        a = reentry
    if code_out == OUTSIDE:
        # the sample itself is outside; report it rather than loop on grazes
        return _Crossing(t_out, grazes)
    return _Crossing(None, grazes)


def _bisect(segment: OrbitSegment, region: Region, a: float, b: float, tol: Tolerances) -> float:
    for _ in range(200):
        if b - a <= tol.time * max(1.0, abs(b)):
            break
        m = 0.5 * (a + b)
        if region.locate_many(segment(m), tol.boundary)[0] == INSIDE:
            a = m
        else:
            b = m
    return b


def _graze_reentry(
    segment: OrbitSegment, region: Region, t: float, tol: Tolerances
) -> float | None:
    """Time shortly after ``t`` at which the orbit is back inside A, if it is a graze."""
    offsets = np.array(tol.graze_probes)
    codes = region.locate_many(segment(t + offsets), tol.boundary)
    for dt, code in zip(offsets, codes):
        if code == INSIDE:
            return float(t + dt)
        if code == OUTSIDE:
            return None
    return None


def _param_of(region: Region, point: np.ndarray, tol: Tolerances) -> float | None:
    if region.boundary is None:
        return None
    return region.boundary.param(point, tol)


# ---------------------------------------------------------------------------
# First-out / first-in maps and classification
# ---------------------------------------------------------------------------

def first_out(
    flow: Flow, region: Region, x: Any, horizon: float | None = None,
    cfg: Tolerances | None = None,
) -> ExitOutcome:
    """E_A(x) for the open set A = ``region``."""
    return exit_time(flow, region, x, horizon, cfg)


def first_in(
    flow: Flow, closed: Region, x: Any, horizon: float | None = None,
    cfg: Tolerances | None = None,
) -> ReturnOutcome:
    """R_B(x) for B the closure of ``closed``, as the first-out map of X ∖ B."""
    outcome = exit_time(flow, closed.complement(), x, horizon, cfg, kind="first-in")
    assert isinstance(outcome, ReturnOutcome)
    return outcome


def classify_boundary_point(
    flow: Flow, region: Region, x: Any, horizon: float | None = None,
    cfg: Tolerances | None = None,
) -> BoundaryType:
    """Label x ∈ ∂A as A-1, A-2, A-3, B, C or Unresolved."""
    tol = cfg or config.tolerances
    t_max = tol.horizon if horizon is None else float(horizon)
    start = as_point(x)
    e = first_out(flow, region, start, t_max, tol)
    r = first_in(flow, region, start, t_max, tol)
    label, notes = _label(e, r, tol)
    if label is TypeLabel.UNRESOLVED:
        logger.debug("Unresolved boundary point %s: %s", start.tolist(), "; ".join(notes))
    return BoundaryType(label, start, e, r, t_max, notes)


def _label(e: ExitOutcome, r: ReturnOutcome, tol: Tolerances) -> tuple[TypeLabel, list[str]]:
    if e.status is Status.UNRESOLVED or r.status is Status.UNRESOLVED:
        which = "E" if e.status is Status.UNRESOLVED else "R"
        return TypeLabel.UNRESOLVED, [f"{which} unresolved: {e.note or r.note}"]
    e_fixed, r_fixed = e.is_fixed(tol), r.is_fixed(tol)
    if not e.defined and not r.defined:
        return TypeLabel.UNRESOLVED, ["E and R both undefined: neither is fixed"]
    if not r.defined:
        if e_fixed:
            return TypeLabel.B, [f"R undefined up to t={r.horizon:g}"]
        return TypeLabel.UNRESOLVED, ["R undefined but E(x) != x"]
    if not e.defined:
        if r_fixed:
            return TypeLabel.C, [f"E undefined up to t={e.horizon:g}"]
        return TypeLabel.UNRESOLVED, ["E undefined but R(x) != x"]
    if e_fixed and r_fixed:
        return TypeLabel.A3, []
    if e_fixed:
        return TypeLabel.A1, []
    if r_fixed:
        return TypeLabel.A2, []
    return TypeLabel.UNRESOLVED, ["neither E(x) = x nor R(x) = x"]


def classify_many(
    flow: Flow,
    region: Region,
    points: Any,
    horizon: float | None = None,
    cfg: Tolerances | None = None,
    *,
    threads: int | None = None,
) -> list[BoundaryType]:
    """Classify many boundary points; results keep the input order."""
    pts = [as_point(p) for p in np.asarray(points, dtype=float)]
    workers = min(threads or config.threads, max(len(pts), 1))
    if workers <= 1:
        return [classify_boundary_point(flow, region, p, horizon, cfg) for p in pts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: classify_boundary_point(flow, region, p, horizon, cfg),
                             pts))


# ---------------------------------------------------------------------------
# Invariance and property checks
# ---------------------------------------------------------------------------

def _interior_samples(region: Region, boundary_points: np.ndarray, tol: Tolerances) -> np.ndarray:
    centroid = boundary_points.mean(axis=0)
    candidates = [centroid + f * (boundary_points - centroid) for f in (0.25, 0.5, 0.9)]
    candidates += [boundary_points + [0.0, dy] for dy in (-1.0, 1.0)]
    pts = np.concatenate(candidates)
    return pts[region.locate_many(pts, tol.boundary) == INSIDE]


def _orbit_witnesses(
    flow: Flow, region: Region, points: list[np.ndarray], tol: Tolerances, limit: int = 16
) -> np.ndarray:
    """Interior points on the orbits through boundary points of the wrong type."""
    if not points:
        return np.empty((0, 2))
    picks = np.unique(np.linspace(0, len(points) - 1, min(limit, len(points))).astype(int))
    found = []
    for k in picks:
        for t in (-0.25, -0.05, 0.05, 0.25):
            try:
                q = flow.evaluate(t, points[k])
            except FlowError:
                continue
            if region.locate(q, tol.boundary) is Location.INSIDE:
                found.append(q)
    return np.array(found, dtype=float).reshape(-1, 2)


def _orbits_stay_inside(
    flow: Flow, region: Region, pts: np.ndarray, t_end: float, tol: Tolerances
) -> tuple[bool, list[str]]:
    times = np.linspace(0.0, t_end, int(abs(t_end) / tol.march_max_step) + 2)[1:]
    escapes: list[str] = []
    for p in pts:
        codes = region.locate_many(flow.orbit(p, t_end)(times), tol.boundary)
        if np.any(codes != INSIDE):
            k = int(np.argmax(codes != INSIDE))
            escapes.append(f"orbit of {p.tolist()} leaves at t={times[k]:.4g}")
    return not escapes, escapes


def _check_invariance(
    name: str,
    target: TypeLabel,
    direction: float,
    flow: Flow,
    region: Region,
    boundary_points: Any,
    horizon: float | None,
    cfg: Tolerances | None,
    interior: Any | None,
) -> CheckResult:
    tol = cfg or config.tolerances
    t_max = tol.horizon if horizon is None else float(horizon)
    bpts = np.asarray(boundary_points, dtype=float)
    types = classify_many(flow, region, bpts, t_max, tol)
    labels = [bt.label for bt in types]
    details: dict[str, Any] = {"labels": sorted({lb.value for lb in labels}), "horizon": t_max}
    if TypeLabel.UNRESOLVED in labels:
        return CheckResult(name, Verdict.INCONCLUSIVE, ["unresolved boundary samples"], details)
    all_target = all(lb is target for lb in labels)
    inner = (_interior_samples(region, bpts, tol) if interior is None
             else np.asarray(interior, dtype=float).reshape(-1, 2))
    wrong_type = [bt.point for bt in types if bt.label is not target]
    witnesses = _orbit_witnesses(flow, region, wrong_type, tol)
    pts = np.concatenate([inner, witnesses])
    invariant, escapes = _orbits_stay_inside(flow, region, pts, direction * t_max, tol)
    details.update({f"all_{target.value}": all_target, "direct_invariant": invariant,
                    "interior_samples": int(len(inner)), "orbit_witnesses": int(len(witnesses))})
    if all_target == invariant:
        return CheckResult(name, Verdict.PASS, [], details)
    if invariant and all(lb in (target, TypeLabel.A3) for lb in labels):
        details["flag"] = f"invariant, not via type {target.value}"
        return CheckResult(name, Verdict.PASS, [], details)
    return CheckResult(name, Verdict.FAIL, escapes[:10] or ["type test and direct test disagree"],
                       details)


def check_backward_invariance(
    flow: Flow, region: Region, boundary_points: Any, horizon: float | None = None,
    cfg: Tolerances | None = None, *, interior: Any | None = None,
) -> CheckResult:
    """A is backward invariant iff every boundary point is type B."""
    return _check_invariance("backward-invariance", TypeLabel.B, -1.0, flow, region,
                             boundary_points, horizon, cfg, interior)


def check_forward_invariance(
    flow: Flow, region: Region, boundary_points: Any, horizon: float | None = None,
    cfg: Tolerances | None = None, *, interior: Any | None = None,
) -> CheckResult:
    """A is forward invariant iff every boundary point is type C."""
    return _check_invariance("forward-invariance", TypeLabel.C, 1.0, flow, region,
                             boundary_points, horizon, cfg, interior)


def check_two_to_one(
    pairs: list[tuple[float, float]],
    *,
    periodic: bool,
    cfg: Tolerances | None = None,
) -> CheckResult:
    """No value of E has three preimages; two preimages need a fixed one.

    ``pairs`` holds (s, F(s)) for defined samples, in parameter units.
    """
    tol = cfg or config.tolerances

    def dist(a: float, b: float) -> float:
        d = abs(a - b)
        return min(d % 1.0, 1.0 - d % 1.0) if periodic else d

    if len(pairs) < 2:
        return CheckResult("two-to-one", Verdict.PASS, [], {"groups": 0})
    ordered = sorted(pairs, key=lambda p: p[1])
    groups: list[list[tuple[float, float]]] = [[ordered[0]]]
    for pair in ordered[1:]:
        if dist(pair[1], groups[-1][-1][1]) <= tol.merge:
            groups[-1].append(pair)
        else:
            groups.append([pair])
    if periodic and len(groups) > 1 and dist(groups[0][0][1], groups[-1][-1][1]) <= tol.merge:
        groups[0] = groups.pop() + groups[0]
    violations = []
    for group in groups:
        if len(group) < 2:
            continue
        fixed = [s for s, v in group if dist(s, v) <= tol.fixed_point]
        preimages = ", ".join(f"{s:.6g}" for s, _ in group)
        if len(group) >= 3:
            violations.append(f"value {group[0][1]:.6g} has {len(group)} preimages: {preimages}")
        elif not fixed:
            violations.append(f"value {group[0][1]:.6g} has two non-fixed preimages: {preimages}")
    verdict = Verdict.FAIL if violations else Verdict.PASS
    return CheckResult("two-to-one", verdict, violations,
                       {"groups": sum(1 for g in groups if len(g) >= 2)})


def check_duality(
    flow: Flow, region: Region, points: Any, horizon: float | None = None,
    cfg: Tolerances | None = None,
) -> CheckResult:
    """E_A agrees with R on the closure of the complement, in status and value."""
    tol = cfg or config.tolerances
    violations = []
    for p in np.asarray(points, dtype=float):
        e = first_out(flow, region, p, horizon, tol)
        r = first_in(flow, region.complement(), p, horizon, tol)
        if e.status is not r.status:
            violations.append(f"{p.tolist()}: {e.status.value} vs {r.status.value}")
        elif e.defined and np.max(np.abs(e.point - r.point)) > tol.fixed_point:
            violations.append(f"{p.tolist()}: {e.point.tolist()} vs {r.point.tolist()}")
    verdict = Verdict.FAIL if violations else Verdict.PASS
    return CheckResult("duality", verdict, violations)


def check_coverage(types: list[BoundaryType], cfg: Tolerances | None = None) -> CheckResult:
    """Every classified point has E(x) = x or R(x) = x."""
    tol = cfg or config.tolerances
    violations = [
        f"{bt.point.tolist()} labelled {bt.label.value}"
        for bt in types
        if bt.label is not TypeLabel.UNRESOLVED
        and not (bt.exit.is_fixed(tol) or bt.ret.is_fixed(tol))
    ]
    verdict = Verdict.FAIL if violations else Verdict.PASS
    return CheckResult("coverage", verdict, violations)


def check_period_bound(types: list[BoundaryType], period: float) -> CheckResult:
    """Exit and return times of periodic boundary points never exceed the period."""
    violations = []
    for bt in types:
        for outcome in (bt.exit, bt.ret):
            if outcome.defined and outcome.time > period * (1 + 1e-9):
                violations.append(f"{bt.point.tolist()}: {outcome.kind} time {outcome.time:.6g}")
    verdict = Verdict.FAIL if violations else Verdict.PASS
    return CheckResult("period-bound", verdict, violations, {"period": period})


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class PreconditionError(ValueError):
    """Query point lies outside the closure of the region."""
