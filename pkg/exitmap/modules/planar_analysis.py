"""
Planar Analysis.

Parametric representations F_E / F_R of the first maps along a Jordan
curve (or the x-axis), type sequences, and the structural checks that
hold for every planar flow: the forbidden B-C junction, one-sided
monotonicity, interval trapping, the extremum bound and the unimodal
normal form, and the junction behavior between launching and diving runs.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from exitmap.config import Tolerances, config
from exitmap.core.flow_core import Flow, flow_fixes_point
from exitmap.core.geometry import BOUNDARY, INSIDE, Boundary, Region
from exitmap.modules.first_maps import (
    BoundaryType,
    CheckResult,
    ExitOutcome,
    Status,
    TypeLabel,
    Verdict,
    check_two_to_one,
    classify_many,
    first_in,
    first_out,
)

logger = logging.getLogger(__name__)

DEFAULT_LINE_SPAN = (-3.0, 3.0)

# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------

@dataclass
class ParametricMapSample:
    """Samples (sᵢ, status, F(sᵢ)) of a parametric first map.

    ``values`` is NaN where the map is undefined or unresolved.
    ``breaks`` holds indices i such that F is estimated discontinuous
    between samples i and i + 1 (a large jump, or a change of definedness).
    """

    s: np.ndarray
    values: np.ndarray
    status: list[Status]
    periodic: bool
    kind: str = "F_E"
    breaks: list[int] = field(default_factory=list)
    outcomes: list[ExitOutcome] = field(default_factory=list, repr=False)

    @classmethod
    def from_values(
        cls,
        s: Any,
        values: Any,
        *,
        periodic: bool,
        status: list[Status] | None = None,
        kind: str = "F_E",
        cfg: Tolerances | None = None,
    ) -> ParametricMapSample:
        tol = cfg or config.tolerances
        s = np.asarray(s, dtype=float)
        values = np.asarray(values, dtype=float)
        if s.shape != values.shape or s.ndim != 1:
            raise ValueError("s and values must be 1-D arrays of equal length")
        if np.any(np.diff(s) <= 0):
            raise ValueError("sample parameters must be strictly increasing")
        if status is None:
            status = [Status.UNDEFINED if np.isnan(v) else Status.DEFINED for v in values]
        sample = cls(s, values, list(status), periodic, kind)
        sample.breaks = sample._estimate_breaks(tol)
        return sample

    @property
    def n(self) -> int:
        return int(self.s.size)

    @property
    def spacing(self) -> float:
        return float(np.median(np.diff(self.s))) if self.n > 1 else 1.0

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def total(self) -> bool:
        return bool(self.defined.all())

    def _estimate_breaks(self, tol: Tolerances) -> list[int]:
        breaks = []
        limit = tol.jump_factor * self.spacing
        for i in range(self.n - 1):
            a, b = self.values[i], self.values[i + 1]
            if np.isnan(a) != np.isnan(b):
                breaks.append(i)
            elif not np.isnan(a) and abs(b - a) > limit:
                breaks.append(i)
        return breaks

    def continuous_at(self, i: int, collar: int) -> bool:
        """False when sample ``i`` lies within ``collar`` samples of a break."""
        return all(not (b - collar < i <= b + collar) for b in self.breaks)

    def is_fixed(self, i: int, tol: float) -> bool:
        return bool(abs(self.values[i] - self.s[i]) <= tol)

    def to_rows(self) -> list[dict[str, Any]]:
        rows = []
        for i in range(self.n):
            outcome = self.outcomes[i] if self.outcomes else None
            rows.append({
                "s": float(self.s[i]),
                "status": self.status[i].value,
                "T": None if outcome is None else outcome.time,
                "value": None if np.isnan(self.values[i]) else float(self.values[i]),
                "graze_count": 0 if outcome is None else outcome.graze_count,
            })
        return rows


@dataclass(frozen=True)
class TypeRun:
    first: int
    last: int
    s_lo: float
    s_hi: float
    label: TypeLabel

    @property
    def length(self) -> int:
        return self.last - self.first + 1

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label.value, "s_lo": self.s_lo, "s_hi": self.s_hi,
                "samples": self.length}


@dataclass
class TypeSequence:
    """Run-length encoded type labels along a boundary parametrization."""

    s: np.ndarray
    labels: list[TypeLabel]
    periodic: bool
    runs: list[TypeRun] = field(default_factory=list)
    types: list[BoundaryType] = field(default_factory=list, repr=False)

    @classmethod
    def from_labels(
        cls, s: Any, labels: list[TypeLabel], *, periodic: bool,
        types: list[BoundaryType] | None = None,
    ) -> TypeSequence:
        s = np.asarray(s, dtype=float)
        runs: list[TypeRun] = []
        start = 0
        for i in range(1, len(labels) + 1):
            if i == len(labels) or labels[i] is not labels[start]:
                runs.append(TypeRun(start, i - 1, float(s[start]), float(s[i - 1]),
                                    labels[start]))
                start = i
        return cls(s, list(labels), periodic, runs, list(types or []))

    @property
    def unresolved(self) -> list[TypeRun]:
        return [run for run in self.runs if run.label is TypeLabel.UNRESOLVED]

    def exit_map(self, cfg: Tolerances | None = None) -> ParametricMapSample:
        """F_E from the exit outcomes gathered during classification."""
        if not self.types:
            raise ValueError("type sequence carries no classification evidence")
        return _sample_from_outcomes(self.s, [bt.exit for bt in self.types], self.periodic,
                                     "F_E", cfg)

    def to_dict(self) -> dict[str, Any]:
        return {"periodic": self.periodic, "samples": int(self.s.size),
                "runs": [run.to_dict() for run in self.runs]}


@dataclass
class UnimodalForm:
    """Shifted representation F̃(t) = F(t + α) - α (mod 1)."""

    sample: ParametricMapSample
    alpha: float
    peak: float


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def boundary_parameters(
    boundary: Boundary, n: int, span: tuple[float, float] = DEFAULT_LINE_SPAN
) -> np.ndarray:
    """n parameters: k/n on [0, 1) for closed curves, an even grid over ``span`` on a line."""
    if boundary.periodic:
        return np.arange(n) / n
    return np.linspace(span[0], span[1], n)


def _require_boundary(region: Region) -> Boundary:
    if region.boundary is None:
        raise ValueError(f"Region {region.name} has no boundary parametrization")
    return region.boundary


def _sample_from_outcomes(
    s: np.ndarray, outcomes: list[ExitOutcome], periodic: bool, kind: str,
    cfg: Tolerances | None,
) -> ParametricMapSample:
    values = np.array([o.param if o.defined and o.param is not None else np.nan
                       for o in outcomes])
    sample = ParametricMapSample.from_values(s, values, periodic=periodic,
                                             status=[o.status for o in outcomes], kind=kind,
                                             cfg=cfg)
    sample.outcomes = list(outcomes)
    unresolved = sum(o.status is Status.UNRESOLVED for o in outcomes)
    if unresolved:
        logger.warning("%s: %d of %d samples unresolved", kind, unresolved, len(outcomes))
    return sample


def _sample_map(
    query: Any, flow: Flow, region: Region, n: int, horizon: float | None,
    cfg: Tolerances | None, span: tuple[float, float], kind: str, min_n: int,
) -> ParametricMapSample:
    if n < min_n:
        raise ValueError(f"{kind} needs at least {min_n} samples, got {n}")
    boundary = _require_boundary(region)
    s = boundary_parameters(boundary, n, span)
    pts = boundary.point(s)
    workers = min(config.threads, n)
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        outcomes = list(pool.map(lambda p: query(flow, region, p, horizon, cfg), pts))
    return _sample_from_outcomes(s, outcomes, boundary.periodic, kind, cfg)


def sample_F_E(
    flow: Flow, region: Region, n: int, horizon: float | None = None,
    cfg: Tolerances | None = None, *, span: tuple[float, float] = DEFAULT_LINE_SPAN,
) -> ParametricMapSample:
    """c(F_E(s)) = E_A(c(s)) at n boundary parameters."""
    return _sample_map(first_out, flow, region, n, horizon, cfg, span, "F_E", 8)


def sample_F_R(
    flow: Flow, region: Region, n: int, horizon: float | None = None,
    cfg: Tolerances | None = None, *, span: tuple[float, float] = DEFAULT_LINE_SPAN,
) -> ParametricMapSample:
    """c(F_R(s)) = R_Ā(c(s)) at n boundary parameters."""
    return _sample_map(first_in, flow, region, n, horizon, cfg, span, "F_R", 8)


def type_sequence(
    flow: Flow, region: Region, n: int, horizon: float | None = None,
    cfg: Tolerances | None = None, *, span: tuple[float, float] = DEFAULT_LINE_SPAN,
) -> TypeSequence:
    if n < 16:
        raise ValueError(f"type_sequence needs at least 16 samples, got {n}")
    boundary = _require_boundary(region)
    s = boundary_parameters(boundary, n, span)
    types = classify_many(flow, region, boundary.point(s), horizon, cfg)
    seq = TypeSequence.from_labels(s, [bt.label for bt in types], periodic=boundary.periodic,
                                   types=types)
    if seq.unresolved:
        logger.warning("Type sequence of %s has %d unresolved runs", flow.label,
                       len(seq.unresolved))
    return seq


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def _adjacent_runs(seq: TypeSequence) -> list[tuple[TypeRun, TypeRun]]:
    pairs = list(zip(seq.runs, seq.runs[1:]))
    if seq.periodic and len(seq.runs) > 1:
        pairs.append((seq.runs[-1], seq.runs[0]))
    return pairs


def check_forbidden_BC(seq: TypeSequence) -> CheckResult:  # noqa: N802
    """A B run never abuts a C run."""
    bc = {TypeLabel.B, TypeLabel.C}
    violations = [
        f"{a.label.value} run ending at s={a.s_hi:.6g} abuts {b.label.value} run at s={b.s_lo:.6g}"
        for a, b in _adjacent_runs(seq)
        if {a.label, b.label} == bc
    ]
    if violations:
        return CheckResult("forbidden-BC", Verdict.FAIL, violations)
    # an unresolved run squeezed between B and C hides the junction
    runs = seq.runs
    hidden = []
    for k, run in enumerate(runs):
        if run.label is not TypeLabel.UNRESOLVED:
            continue
        left = runs[k - 1] if k > 0 else (runs[-1] if seq.periodic else None)
        right = runs[k + 1] if k + 1 < len(runs) else (runs[0] if seq.periodic else None)
        if left and right and {left.label, right.label} == bc:
            hidden.append(f"unresolved junction at s={run.s_lo:.6g}")
    if hidden:
        return CheckResult("forbidden-BC", Verdict.INCONCLUSIVE, hidden)
    return CheckResult("forbidden-BC", Verdict.PASS)


def _eligible(F: ParametricMapSample, tol: Tolerances) -> list[int]:  # noqa: N803
    return [
        i for i in range(F.n)
        if F.defined[i] and F.continuous_at(i, tol.collar) and not F.is_fixed(i, tol.fixed_point)
    ]


def _continuous_between(F: ParametricMapSample, i: int, j: int) -> bool:  # noqa: N803
    lo, hi = sorted((i, j))
    return all(not (lo <= b < hi) for b in F.breaks)


def check_interval_trapping(
    F: ParametricMapSample, cfg: Tolerances | None = None  # noqa: N803
) -> CheckResult:
    """If F(s) = t ≠ s then F maps the open interval between s and t into it."""
    tol = cfg or config.tolerances
    idx = np.flatnonzero(F.defined)
    s, v = F.s[idx], F.values[idx]
    eps = tol.fixed_point
    violations = []
    for k in range(idx.size):
        lo, hi = sorted((s[k], v[k]))
        if hi - lo <= eps:
            continue
        inner = (s > lo + eps) & (s < hi - eps)
        outside = inner & ((v < lo - eps) | (v > hi + eps))
        for j in np.flatnonzero(outside)[:3]:
            violations.append(
                f"F({s[k]:.6g})={v[k]:.6g} but F({s[j]:.6g})={v[j]:.6g} leaves the interval"
            )
    verdict = Verdict.FAIL if violations else Verdict.PASS
    return CheckResult("interval-trapping", verdict, violations[:50],
                       {"violations": len(violations)})


def check_monotonicity(
    F: ParametricMapSample, cfg: Tolerances | None = None  # noqa: N803
) -> CheckResult:
    """At continuous non-fixed samples F decreases through s, locally.

    Neighbours within |F(s) - s| of s must satisfy F(t) > F(s) on the left
    and F(t) < F(s) on the right.
    """
    tol = cfg or config.tolerances
    eligible = _eligible(F, tol)
    if not eligible:
        return CheckResult("monotonicity", Verdict.PASS, [], {"vacuous": True})
    eps = tol.fixed_point
    violations = []
    for i in eligible:
        window = abs(F.values[i] - F.s[i])
        for step in (-1, 1):
            j = i + step
            while 0 <= j < F.n and F.defined[j] and abs(F.s[j] - F.s[i]) < window:
                if not _continuous_between(F, i, j):
                    break
                wrong = F.values[j] < F.values[i] - eps if step < 0 else \
                    F.values[j] > F.values[i] + eps
                if wrong:
                    violations.append(
                        f"s={F.s[i]:.6g}: F({F.s[j]:.6g})={F.values[j]:.6g} vs "
                        f"F(s)={F.values[i]:.6g}"
                    )
                    break
                j += step
    trapping = check_interval_trapping(F, tol)
    violations.extend(trapping.violations)
    verdict = Verdict.FAIL if violations else Verdict.PASS
    return CheckResult("monotonicity", verdict, violations[:50],
                       {"eligible": len(eligible), "trapping": trapping.verdict.value})


def check_monotone_identity(
    F: ParametricMapSample, cfg: Tolerances | None = None  # noqa: N803
) -> CheckResult:
    """On a run where F increases and is continuous, F is the identity."""
    tol = cfg or config.tolerances
    violations = []
    runs = 0
    i = 0
    while i < F.n - 1:
        j = i
        while (j + 1 < F.n and F.defined[j] and F.defined[j + 1]
               and _continuous_between(F, j, j + 1)
               and F.values[j + 1] > F.values[j] + tol.merge):
            j += 1
        if j - i >= 2:
            runs += 1
            for k in range(i + 1, j):
                if F.continuous_at(k, tol.collar) and not F.is_fixed(k, tol.fixed_point):
                    violations.append(f"increasing at s={F.s[k]:.6g} with F(s)={F.values[k]:.6g}")
        i = max(j, i + 1)
    verdict = Verdict.FAIL if violations else Verdict.PASS
    return CheckResult("monotone-identity", verdict, violations[:50], {"increasing_runs": runs})


def _plateaus(values: np.ndarray, merge: float) -> list[tuple[int, int]]:
    groups = [(0, 0)]
    for i in range(1, values.size):
        if abs(values[i] - values[groups[-1][1]]) <= merge:
            groups[-1] = (groups[-1][0], i)
        else:
            groups.append((i, i))
    return groups


def check_extremum_count(
    F: ParametricMapSample, cfg: Tolerances | None = None  # noqa: N803
) -> CheckResult:
    """At most one strict local maximum and one minimum; continuous ones are fixed."""
    tol = cfg or config.tolerances
    if not F.total:
        return CheckResult("extremum-count", Verdict.NOT_APPLICABLE,
                           ["F has undefined samples"])
    groups = _plateaus(F.values, tol.merge)
    level = np.array([F.values[a] for a, _ in groups])
    maxima, minima, violations = [], [], []
    fixed_tol = max(tol.fixed_point, 2 * F.spacing)
    for k in range(1, len(groups) - 1):
        lo, hi = groups[k]
        if level[k] > level[k - 1] and level[k] > level[k + 1]:
            maxima.append(k)
        elif level[k] < level[k - 1] and level[k] < level[k + 1]:
            minima.append(k)
        else:
            continue
        continuous = all(F.continuous_at(i, 1) for i in range(lo, hi + 1))
        fixed = any(F.is_fixed(i, fixed_tol) for i in range(lo, hi + 1))
        if continuous and not fixed:
            violations.append(f"continuous extremum at s={F.s[lo]:.6g} is not fixed")
    if len(maxima) > 1:
        violations.append(f"{len(maxima)} local maxima at s=" +
                          ", ".join(f"{F.s[groups[k][0]]:.4g}" for k in maxima))
    if len(minima) > 1:
        violations.append(f"{len(minima)} local minima at s=" +
                          ", ".join(f"{F.s[groups[k][0]]:.4g}" for k in minima))
    verdict = Verdict.FAIL if violations else Verdict.PASS
    return CheckResult("extremum-count", verdict, violations,
                       {"maxima": len(maxima), "minima": len(minima)})


def unimodal_normalize(
    F: ParametricMapSample, cfg: Tolerances | None = None  # noqa: N803
) -> UnimodalForm:
    """Shift the circle parameter by α = sup{s | F(s) > s} so F̃ is unimodal.

    α is 0 when F(s) > s nowhere. ``peak`` is β = inf{s | F(s) < s}, the
    maximum location of the shifted map. Raises ``ValueError`` when F is
    not total and continuous on a closed curve.
    """
    tol = cfg or config.tolerances
    if not (F.periodic and F.total) or F.breaks:
        raise ValueError("unimodal normal form needs a total, continuous map on a closed curve")
    above = F.values - F.s > tol.fixed_point
    below = F.s - F.values > tol.fixed_point
    alpha = 0.0
    if above.any() and np.flatnonzero(above)[-1] + 1 < F.n:
        alpha = float(F.s[np.flatnonzero(above)[-1] + 1])
    beta = float(F.s[max(np.flatnonzero(below)[0] - 1, 0)]) if below.any() else 1.0
    if alpha == 0.0:
        return UnimodalForm(F, 0.0, beta)
    k = int(np.searchsorted(F.s, alpha - 0.5 * F.spacing))
    order = np.r_[np.arange(k, F.n), np.arange(0, k)]
    shifted = np.mod(F.s[order] - alpha, 1.0)
    values = F.values[order] - alpha
    values = np.where(values < -0.5, values + 1.0, np.where(values >= 1.0, values - 1.0, values))
    normalized = ParametricMapSample.from_values(shifted, values, periodic=True,
                                                 kind=f"{F.kind} (shifted)", cfg=tol)
    logger.debug("Unimodal shift alpha=%.6g, peak=%.6g", alpha, beta - alpha)
    return UnimodalForm(normalized, alpha, beta - alpha)


def check_two_to_one_map(
    F: ParametricMapSample, cfg: Tolerances | None = None  # noqa: N803
) -> CheckResult:
    pairs = [(float(F.s[i]), float(F.values[i])) for i in np.flatnonzero(F.defined)]
    return check_two_to_one(pairs, periodic=F.periodic, cfg=cfg)


def check_domain_openness(
    F: ParametricMapSample,  # noqa: N803
    seq: TypeSequence,
    region: Region | None = None,
) -> CheckResult:
    """With im E of types A-1 and B on a transversal boundary, dom F_E is open.

    On samples: no defined sample is isolated between undefined ones.
    """
    name = "domain-openness"
    if region is not None and not region.transversal:
        return CheckResult(name, Verdict.NOT_APPLICABLE, ["boundary not annotated transversal"])
    image = F.values[F.defined]
    labels = [seq.labels[int(np.argmin(np.abs(seq.s - v)))] for v in image]
    if not image.size or any(lb not in (TypeLabel.A1, TypeLabel.B) for lb in labels):
        return CheckResult(name, Verdict.NOT_APPLICABLE, ["image of E is not of type A-1 or B"])
    d = F.defined
    isolated = [
        f"defined sample s={F.s[i]:.6g} between undefined neighbours"
        for i in range(1, F.n - 1)
        if d[i] and not d[i - 1] and not d[i + 1]
    ]
    verdict = Verdict.FAIL if isolated else Verdict.PASS
    return CheckResult(name, verdict, isolated)


# ---------------------------------------------------------------------------
# Junctions
# ---------------------------------------------------------------------------

def _junctions(seq: TypeSequence, min_run: int) -> list[tuple[TypeRun, TypeRun]]:
    kept = [run for run in seq.runs if run.length >= min_run]
    pairs = list(zip(kept, kept[1:]))
    if seq.periodic and len(kept) > 1:
        pairs.append((kept[-1], kept[0]))
    diving = (TypeLabel.A2, TypeLabel.C)
    return [
        (a, b) for a, b in pairs
        if (a.label is TypeLabel.A1 and b.label in diving)
        or (b.label is TypeLabel.A1 and a.label in diving)
    ]


def _between(seq: TypeSequence, a: TypeRun, b: TypeRun) -> np.ndarray:
    """Sample indices strictly between run ``a`` and the following run ``b``."""
    if a.last < b.first:
        return np.arange(a.last + 1, b.first)
    return np.r_[np.arange(a.last + 1, seq.s.size), np.arange(0, b.first)].astype(int)


def _refine_junction(
    flow: Flow, region: Region, launching: float, other: float, horizon: float | None,
    tol: Tolerances,
) -> float:
    """Bisect the boundary parameter between an A-1 sample and its neighbour run."""
    boundary = _require_boundary(region)
    lo, hi = launching, other
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        label = classify_many(flow, region, [boundary.point(mid)], horizon, tol, threads=1)[0]
        if label.label is TypeLabel.A1:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) < 1e-12:
            break
    return hi


def check_junction_behavior(
    flow: Flow,
    region: Region,
    seq: TypeSequence,
    cfg: Tolerances | None = None,
    horizon: float | None = None,
) -> CheckResult:
    """Both one-sided orbits of a launching/diving junction point enter A."""
    tol = cfg or config.tolerances
    name = "junction"
    junctions = _junctions(seq, tol.junction_min_run)
    if not junctions:
        return CheckResult(name, Verdict.NOT_APPLICABLE, ["no A-1 / A-2|C junctions"])
    if not region.transversal:
        return CheckResult(name, Verdict.NOT_APPLICABLE, ["boundary not annotated transversal"])
    boundary = _require_boundary(region)
    ladder = np.array(tol.ladder())
    notes: list[str] = []
    failures: list[str] = []
    inconclusive = False
    checked = 0
    for a, b in junctions:
        gap = _between(seq, a, b)
        resting = [float(s) for s, p in zip(seq.s[gap], boundary.point(seq.s[gap]))
                   if flow_fixes_point(flow, p, tol)]
        if resting:
            notes.append(f"equilibrium junction at s={resting[0]:.6g} skipped")
            continue
        if a.label is TypeLabel.A1:
            launching, other = a.s_hi, b.s_lo
        else:
            launching, other = b.s_lo, a.s_hi
        if seq.periodic and abs(launching - other) > 0.5:
            other += 1.0 if other < launching else -1.0
        q = _refine_junction(flow, region, launching, other, horizon, tol)
        point = boundary.point(q)
        if flow_fixes_point(flow, point, tol):
            notes.append(f"equilibrium junction at s={q:.6g} skipped")
            continue
        checked += 1
        segment_f = flow.orbit(point, float(ladder[0]))(ladder)
        segment_b = flow.orbit(point, -float(ladder[0]))(-ladder)
        codes = region.locate_many(np.vstack([segment_f, segment_b]), tol.boundary)
        informative = codes[codes != BOUNDARY]
        if informative.size == 0:
            inconclusive = True
            notes.append(f"junction at s={q:.6g}: all probes on the boundary band")
        elif np.any(informative != INSIDE):
            failures.append(f"junction at s={q:.6g}: a one-sided orbit leaves A")
    details = {"junctions": len(junctions), "checked": checked}
    if failures:
        return CheckResult(name, Verdict.FAIL, failures + notes, details)
    if inconclusive:
        return CheckResult(name, Verdict.INCONCLUSIVE, notes, details)
    if checked == 0:
        return CheckResult(name, Verdict.NOT_APPLICABLE, notes, details)
    return CheckResult(name, Verdict.PASS, notes, details)
