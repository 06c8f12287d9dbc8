"""
Exitmap Export.

Deterministic CSV / JSON tables and SVG plots for computed artifacts.
Floats are written with a fixed number of significant digits and SVG
output carries a fixed hash salt and no date, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Sequence
from enum import Enum
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from exitmap.modules.hybrid import HybridTrajectory  # noqa: E402
from exitmap.modules.planar_analysis import ParametricMapSample, TypeSequence  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_MAP_FIELDS = ("s", "status", "T", "exit_s", "type_label", "horizon", "graze_count")
TRAJECTORY_FIELDS = ("n", "t", "x", "y", "mode")
JUMP_FIELDS = ("n", "t", "pre_x", "pre_y", "post_x", "post_y")

_RC = {
    "svg.hashsalt": "exitmap",
    "svg.fonttype": "none",
    "figure.figsize": (6.0, 4.5),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "lines.linewidth": 1.2,
}


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return ""
        return format(v, ".12g")
    if isinstance(value, Enum):
        return value.value
    return value


def to_jsonable(value: Any) -> Any:
    """JSON-safe copy: NaN and infinities become null, numpy scalars plain floats."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Enum):
        return value.value
    return value


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

def exit_map_rows(
    sample: ParametricMapSample, seq: TypeSequence | None = None
) -> list[dict[str, Any]]:
    """One row per boundary parameter: s, status, T, exit_s, type_label, horizon, graze_count."""
    rows = []
    for i, row in enumerate(sample.to_rows()):
        outcome = sample.outcomes[i] if sample.outcomes else None
        rows.append({
            "s": row["s"],
            "status": row["status"],
            "T": row["T"],
            "exit_s": row["value"],
            "type_label": seq.labels[i].value if seq is not None else "",
            "horizon": None if outcome is None else outcome.horizon,
            "graze_count": row["graze_count"],
        })
    return rows


def trajectory_tables(
    traj: HybridTrajectory,
) -> tuple[list[dict[str, Any]], list[dict[str, Any]]]:
    """(n, t, x, y, mode) path rows and the jump table."""
    return traj.to_rows(), [j.to_dict() for j in traj.jumps]


def write_csv(path: Path, rows: Sequence[dict[str, Any]], fieldnames: Sequence[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in fieldnames})
    logger.debug("Wrote %d rows to %s", len(rows), path)
    return path


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def write_table(
    path: Path, rows: Sequence[dict[str, Any]], fieldnames: Sequence[str], fmt: str
) -> Path:
    """CSV or JSON (a list of row objects) depending on ``fmt``."""
    if fmt == "json":
        return write_json(path.with_suffix(".json"),
                          [{k: row.get(k) for k in fieldnames} for row in rows])
    return write_csv(path.with_suffix(".csv"), rows, fieldnames)


# ---------------------------------------------------------------------------
# Plots
# ---------------------------------------------------------------------------

def _save(fig: plt.Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug("Wrote plot %s", path)
    return path


def plot_parametric_maps(
    path: Path, samples: Sequence[ParametricMapSample], title: str = ""
) -> Path:
    """Scatter of F(s) against s with the diagonal, one series per map."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        lo = min(float(sm.s.min()) for sm in samples)
        hi = max(float(sm.s.max()) for sm in samples)
        ax.plot([lo, hi], [lo, hi], color="0.6", linestyle="--", linewidth=0.8)
        for sm, marker in zip(samples, ("o", "s", "^", "v")):
            d = sm.defined
            ax.plot(sm.s[d], sm.values[d], marker, markersize=2.5, linestyle="none",
                    label=sm.kind)
        ax.set_xlabel("s")
        ax.set_ylabel("F(s)")
        ax.set_title(title)
        ax.legend(loc="best")
        return _save(fig, path)


def plot_type_sequence(path: Path, seq: TypeSequence, title: str = "") -> Path:
    """Type labels as coloured bands over the boundary parameter."""
    order = ["A-1", "A-2", "A-3", "B", "C", "Unresolved"]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 1.8))
        for run in seq.runs:
            row = order.index(run.label.value)
            ax.plot([run.s_lo, run.s_hi], [row, row], linewidth=6, solid_capstyle="butt")
        ax.set_yticks(range(len(order)), order)
        ax.set_xlabel("s")
        ax.set_title(title)
        return _save(fig, path)


def plot_trajectory(path: Path, traj: HybridTrajectory, title: str = "") -> Path:
    """(x, y) path of a hybrid trajectory with jumps drawn as dotted chords."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for seg in traj.segments:
            style = "-" if seg.mode == "flow" else ":"
            ax.plot(seg.path[:, 0], seg.path[:, 1], style, color="C0")
        for jump in traj.jumps:
            ax.plot([jump.pre[0], jump.post[0]], [0.0, 0.0], ":", color="C3")
        ax.axhline(0.0, color="0.3", linewidth=0.8)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title(title)
        return _save(fig, path)


def plot_curves(path: Path, curves: Sequence[np.ndarray], title: str = "") -> Path:
    """Closed curves (n, 2) in the plane, equal aspect."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for curve in curves:
            finite = np.all(np.isfinite(curve), axis=1)
            ax.plot(curve[finite, 0], curve[finite, 1], "-")
        ax.axhline(0.0, color="0.3", linewidth=0.8)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_title(title)
        return _save(fig, path)
