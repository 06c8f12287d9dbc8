"""
Geometry.

Regular open planar sets with tolerance-banded membership, their
complements and images, and boundary parametrizations: Jordan curves over
the circle parameter [0, 1) and the x-axis over a line parameter.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from exitmap.config import Tolerances, config
from exitmap.core.flow_core import Homeomorphism2D, MoebiusMap, as_point

logger = logging.getLogger(__name__)

Indicator = Callable[[np.ndarray], np.ndarray]
Membership = Callable[[np.ndarray], np.ndarray]

# Location codes returned by ``Region.locate_many``.
INSIDE, BOUNDARY, OUTSIDE = -1, 0, 1


class Location(str, Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    BOUNDARY = "boundary"

    @classmethod
    def from_code(cls, code: int) -> Location:
        return {INSIDE: cls.INSIDE, BOUNDARY: cls.BOUNDARY, OUTSIDE: cls.OUTSIDE}[int(code)]


# ---------------------------------------------------------------------------
# Boundaries
# ---------------------------------------------------------------------------

def unit_circle(s: Any) -> np.ndarray:
    """(cos 2πs, sin 2πs) with exact zeros at quarter turns."""
    angle = 2 * np.pi * np.asarray(s, dtype=float)
    pts = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    pts[np.abs(pts) < 1e-15] = 0.0
    return pts


@dataclass(frozen=True)
class JordanBoundary:
    """Jordan curve c: [0, 1) -> R^2, continued periodically."""

    curve: Callable[[np.ndarray], np.ndarray]
    orientation: str = "ccw"
    resolution: int = 1024
    periodic: bool = field(init=False, default=True)
    _coarse_s: np.ndarray = field(init=False, repr=False, compare=False)
    _coarse_p: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        s = np.arange(self.resolution) / self.resolution
        object.__setattr__(self, "_coarse_s", s)
        object.__setattr__(self, "_coarse_p", np.asarray(self.curve(s), dtype=float))

    def point(self, s: Any) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.asarray(self.curve(np.mod(s, 1.0)), dtype=float)

    def param(self, p: Any, cfg: Tolerances | None = None) -> float:
        """Parameter of the curve point nearest ``p``.

        Coarse nearest-sample search over ``resolution`` samples, then a
        bounded scalar minimization of the squared distance in the
        neighbouring sample cells.
        """
        tol = cfg or config.tolerances
        p = as_point(p)
        i = int(np.argmin(np.sum((self._coarse_p - p) ** 2, axis=1)))
        step = 1.0 / self.resolution
        s0 = self._coarse_s[i]

        def dist2(s: float) -> float:
            return float(np.sum((self.point(s) - p) ** 2))

        res = minimize_scalar(
            dist2, bounds=(s0 - step, s0 + step), method="bounded",
            options={"xatol": tol.param * 1e-3},
        )
        if np.sqrt(res.fun) > tol.projection:
            raise ProjectionError(
                f"Point {p.tolist()} lies {np.sqrt(res.fun):.3e} from the boundary curve"
            )
        s = float(np.mod(res.x, 1.0))
        if 1.0 - s < tol.param:
            s = 0.0
        return s

    def distance(self, a: float, b: float) -> float:
        """Distance between parameters on the circle [0, 1)."""
        d = abs(a - b) % 1.0
        return min(d, 1.0 - d)


@dataclass(frozen=True)
class LineBoundary:
    """The x-axis, parametrized by the x coordinate."""

    periodic: bool = field(init=False, default=False)

    def point(self, s: Any) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.stack([s, np.zeros_like(s)], axis=-1)

    def param(self, p: Any, cfg: Tolerances | None = None) -> float:
        tol = cfg or config.tolerances
        p = as_point(p)
        if abs(p[1]) > tol.projection:
            raise ProjectionError(f"Point {p.tolist()} lies {abs(p[1]):.3e} off the x-axis")
        return float(p[0])

    def distance(self, a: float, b: float) -> float:
        return abs(a - b)


@dataclass(frozen=True)
class MappedBoundary:
    """Boundary curve transported by a homeomorphism: s -> h(c(s))."""

    base: JordanBoundary | LineBoundary
    h: Homeomorphism2D

    @property
    def periodic(self) -> bool:
        return self.base.periodic

    def point(self, s: Any) -> np.ndarray:
        return self.h.forward(self.base.point(s))

    def param(self, p: Any, cfg: Tolerances | None = None) -> float:
        return self.base.param(self.h.inverse(as_point(p)), cfg)

    def distance(self, a: float, b: float) -> float:
        return self.base.distance(a, b)


Boundary = JordanBoundary | LineBoundary | MappedBoundary


def boundary_param_to_point(boundary: Boundary, s: float) -> np.ndarray:
    return boundary.point(s)


def point_to_boundary_param(
    boundary: Boundary, p: Any, cfg: Tolerances | None = None
) -> float:
    return boundary.param(p, cfg)


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """A regular open set with optional signed indicator and boundary curve.

    Exactly one of ``indicator`` (g < 0 inside) and ``membership`` is
    required; when both are given they must agree. Regularity is asserted
    by the constructor that built the region, never verified.
    """

    name: str
    indicator: Indicator | None = None
    membership: Membership | None = None
    boundary: Boundary | None = None
    asserted_regular: bool = True
    transversal: bool = False

    def __post_init__(self) -> None:
        if self.indicator is None and self.membership is None:
            raise GeometryError(f"Region {self.name!r} needs an indicator or a membership oracle")
        if not self.asserted_regular:
            logger.warning("Region %s is not asserted regular; types may be meaningless",
                           self.name)

    def contains(self, pts: Any) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.indicator is not None:
            return np.asarray(self.indicator(pts)) < 0
        return np.asarray(self.membership(pts), dtype=bool)

    def locate_many(self, pts: Any, tol: float | None = None) -> np.ndarray:
        """Location codes (INSIDE / BOUNDARY / OUTSIDE) for points ``(n, 2)``.

        NaN points (outside a flow's domain) are reported as OUTSIDE.
        """
        band = config.tolerances.boundary if tol is None else tol
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.indicator is not None:
            g = np.asarray(self.indicator(pts), dtype=float)
            codes = np.where(g < -band, INSIDE, np.where(g > band, OUTSIDE, BOUNDARY))
            return np.where(np.isnan(g), OUTSIDE, codes)
        return self._locate_by_oracle(pts, band)

    def _locate_by_oracle(self, pts: np.ndarray, band: float) -> np.ndarray:
        offsets = np.array([[dx, dy] for dx in (-band, 0.0, band) for dy in (-band, 0.0, band)])
        member = np.stack([self.membership(pts + off) for off in offsets], axis=1)
        codes = np.where(member.all(axis=1), INSIDE, np.where(member.any(axis=1), BOUNDARY,
                                                               OUTSIDE))
        return np.where(np.isnan(pts).any(axis=1), OUTSIDE, codes)

    def locate(self, p: Any, tol: float | None = None) -> Location:
        return Location.from_code(self.locate_many(as_point(p)[None, :], tol)[0])

    def complement(self) -> Region:
        """The open exterior X ∖ Ā, sharing the boundary curve."""
        indicator = None if self.indicator is None else (lambda p, g=self.indicator: -g(p))
        membership = None
        if self.indicator is None:
            membership = lambda p, m=self.membership: ~np.asarray(m(p), dtype=bool)  # noqa: E731
        return Region(f"complement({self.name})", indicator, membership, self.boundary,
                      self.asserted_regular, self.transversal)

    def transformed(self, h: Homeomorphism2D, name: str | None = None) -> Region:
        """The image h(A): indicator g ∘ h⁻¹ and boundary h ∘ c."""
        indicator = None
        membership = None
        if self.indicator is not None:
            indicator = lambda p, g=self.indicator: g(h.inverse(np.asarray(p)))  # noqa: E731
        else:
            membership = lambda p, m=self.membership: m(h.inverse(np.asarray(p)))  # noqa: E731
        boundary = None if self.boundary is None else MappedBoundary(self.boundary, h)
        return Region(name or f"{h.tag}({self.name})", indicator, membership, boundary,
                      self.asserted_regular, self.transversal)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "has_indicator": self.indicator is not None,
            "boundary": None if self.boundary is None else type(self.boundary).__name__,
            "asserted_regular": self.asserted_regular,
            "transversal": self.transversal,
        }


def make_disc(center: Any = (0.0, 0.0), radius: float = 1.0, *,
              transversal: bool = False) -> Region:
    """Open disc with indicator |p - center|² - r² and angle parametrization."""
    if not radius > 0:
        raise GeometryError(f"Disc radius must be positive, got {radius}")
    c = as_point(center)
    r = float(radius)

    def indicator(p: np.ndarray) -> np.ndarray:
        q = np.asarray(p, dtype=float) - c
        return q[..., 0] ** 2 + q[..., 1] ** 2 - r * r

    boundary = JordanBoundary(lambda s: c + r * unit_circle(s))
    return Region(f"disc({c[0]:g},{c[1]:g};{r:g})", indicator, boundary=boundary,
                  transversal=transversal)


def make_halfplane(sign: str = "lower", *, transversal: bool = False) -> Region:
    """H⁻ = {y < 0} (indicator y) or H⁺ = {y > 0} (indicator -y)."""
    if sign not in ("lower", "upper"):
        raise GeometryError(f"Half-plane sign must be 'lower' or 'upper', got {sign!r}")
    factor = 1.0 if sign == "lower" else -1.0

    def indicator(p: np.ndarray) -> np.ndarray:
        return factor * np.asarray(p, dtype=float)[..., 1]

    return Region(f"halfplane({sign})", indicator, boundary=LineBoundary(),
                  transversal=transversal)


def make_band(axis: int = 0, center: float = 0.0, half_width: float = 1.0) -> Region:
    """Open band |p[axis] - center| < half_width."""
    if not half_width > 0:
        raise GeometryError("Band half width must be positive")

    def indicator(p: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(p, dtype=float)[..., axis] - center) - half_width

    return Region(f"band(axis={axis},{center:g}±{half_width:g})", indicator)


def moebius_image(region: Region, moebius: MoebiusMap) -> Region:
    return region.transformed(moebius.as_homeomorphism(), f"moebius({region.name})")


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class GeometryError(Exception):
    """Base geometry error."""

class ProjectionError(GeometryError):
    """Point too far from the boundary curve to be assigned a parameter."""
