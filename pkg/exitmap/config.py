"""
Exitmap Configuration.

Loads settings from environment variables with sensible defaults and keeps
every numerical tolerance of the toolkit in one immutable record.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

# Load .env from project root
_PROJECT_ROOT = Path(__file__).resolve().parent.parent
load_dotenv(_PROJECT_ROOT / ".env")


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name, "").strip()
    return float(raw) if raw else default


def _default_threads() -> int:
    raw = os.getenv("EXITMAP_THREADS", "").strip()
    if raw:
        return int(raw)
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Tolerances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tolerances:
    """Every tolerance and algorithm constant used by the numerical core."""

    # Integrator
    rtol: float = 1e-10
    atol: float = 1e-12
    blowup: float = 1e12

    # Membership and event detection
    boundary: float = 1e-9
    time: float = 1e-12
    ladder_start: float = 1e-2
    ladder_ratio: float = 0.25
    ladder_rungs: int = 13
    march_first_step: float = 1e-4
    march_max_step: float = 0.05
    march_chunk: int = 256
    graze_probes: tuple[float, ...] = (1e-7, 1e-6, 1e-5, 1e-4, 1e-3)
    horizon: float = field(default_factory=lambda: _env_float("EXITMAP_HORIZON", 100.0))

    # Boundary parametrization
    projection: float = 1e-6
    param: float = 1e-9
    coarse_samples: int = 1024

    # Sampled-map checks
    fixed_point: float = 1e-6
    merge: float = 1e-6
    jump_factor: float = 10.0
    collar: int = 3
    junction_min_run: int = 2

    # Realization
    root_rtol: float = 1e-10
    homeomorphism: float = 1e-8
    bracket_doublings: int = 200

    # Zeno detection
    zeno_min_events: int = 8
    zeno_window: int = 5
    zeno_epsilon: float = 0.05

    def ladder(self) -> list[float]:
        """Decreasing probe times used for zero-time decisions."""
        return [self.ladder_start * self.ladder_ratio**k for k in range(self.ladder_rungs)]

    def merged(self, overrides: dict[str, Any]) -> Tolerances:
        """Return a copy with ``overrides`` applied; unknown keys are rejected."""
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"Unknown tolerance keys: {', '.join(unknown)}")
        cleaned = dict(overrides)
        if "graze_probes" in cleaned:
            cleaned["graze_probes"] = tuple(float(v) for v in cleaned["graze_probes"])
        return replace(self, **cleaned)

    @classmethod
    def from_file(cls, path: str | Path, base: Tolerances | None = None) -> Tolerances:
        """Load a JSON object of overrides on top of ``base`` (defaults if omitted)."""
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"Cannot read tolerance file {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"Tolerance file {path} must hold a JSON object")
        return (base or cls()).merged(raw)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# ---------------------------------------------------------------------------
# Application config
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Config:
    """Immutable application configuration."""

    threads: int = field(default_factory=_default_threads)
    out_dir: Path = field(
        default_factory=lambda: Path(os.getenv("EXITMAP_OUT", "") or _PROJECT_ROOT / "out")
    )
    log_level: str = field(
        default_factory=lambda: os.getenv("EXITMAP_LOG_LEVEL", "WARNING").strip().upper()
    )
    tolerances: Tolerances = field(default_factory=Tolerances)

    def validate(self) -> list[str]:
        """Return a list of configuration problems."""
        issues: list[str] = []
        if self.threads < 1:
            issues.append("EXITMAP_THREADS must be a positive integer")
        if self.tolerances.horizon <= 0:
            issues.append("EXITMAP_HORIZON must be positive")
        if self.log_level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            issues.append(f"EXITMAP_LOG_LEVEL has unknown level {self.log_level!r}")
        tol = self.tolerances
        if not 0 < tol.ladder_ratio < 1:
            issues.append("ladder_ratio must lie in (0, 1)")
        if tol.march_first_step > tol.march_max_step:
            issues.append("march_first_step exceeds march_max_step")
        return issues


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class ConfigError(Exception):
    """Invalid configuration or tolerance overrides."""


# Singleton
config = Config()
