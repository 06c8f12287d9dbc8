"""
Flow Core.

Flows and local flows on the plane: closed-form flows, vector-field flows
integrated with an adaptive Runge-Kutta scheme, flows conjugated by a
homeomorphism and flows conjugated by a Möbius transformation of the
Riemann sphere.

Every flow can sample a whole orbit at once (``Flow.orbit``); event
detection in ``exitmap.modules.first_maps`` marches over these samples.
Samples at times outside a local flow's domain are NaN.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from exitmap.config import Tolerances, config

logger = logging.getLogger(__name__)

PointMap = Callable[[np.ndarray], np.ndarray]
"""Maps an array of points of shape ``(..., 2)`` to an array of the same shape."""

Formula = Callable[[np.ndarray, np.ndarray], np.ndarray]
"""Closed-form flow: ``(times of shape (n,), start of shape (2,)) -> (n, 2)``."""

# Relative size of |cz + d| below which a Möbius image is the point at infinity.
_POLE_EPS = 1e-13


def as_point(x: Any) -> np.ndarray:
    """Coerce ``x`` to a float point of shape (2,)."""
    arr = np.asarray(x, dtype=float)
    if arr.shape != (2,):
        raise ValueError(f"Expected a planar point, got shape {arr.shape}")
    return arr


def probe_grid(n: int = 10, extent: float = 2.0) -> np.ndarray:
    """Square grid of ``n * n`` probe points on [-extent, extent]^2."""
    axis = np.linspace(-extent, extent, n)
    xx, yy = np.meshgrid(axis, axis)
    return np.column_stack([xx.ravel(), yy.ravel()])


# ---------------------------------------------------------------------------
# Orbit samples
# ---------------------------------------------------------------------------

class FlowKind(str, Enum):
    CLOSED_FORM = "closed-form"
    VECTOR_FIELD = "vector-field"
    CONJUGATED = "conjugated"
    ROTATION = "rotation"
    REALIZATION = "realization-built"


@dataclass(frozen=True)
class OrbitSegment:
    """One orbit, sampled on demand at arbitrary times."""

    start: np.ndarray
    sampler: Callable[[np.ndarray], np.ndarray]

    def __call__(self, ts: Any) -> np.ndarray:
        times = np.atleast_1d(np.asarray(ts, dtype=float))
        return self.sampler(times)

    def at(self, t: float) -> np.ndarray:
        return self(np.array([t]))[0]


# ---------------------------------------------------------------------------
# Homeomorphisms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Homeomorphism2D:
    """A homeomorphism of the plane given by a pair of vectorized maps."""

    forward: PointMap
    inverse: PointMap
    tag: str = "homeomorphism"

    def __call__(self, p: Any) -> np.ndarray:
        return self.forward(np.asarray(p, dtype=float))

    def inverted(self) -> Homeomorphism2D:
        return Homeomorphism2D(self.inverse, self.forward, f"inverse({self.tag})")

    def compose(self, inner: Homeomorphism2D) -> Homeomorphism2D:
        """Return ``self ∘ inner``."""
        return Homeomorphism2D(
            forward=lambda p: self.forward(inner.forward(p)),
            inverse=lambda p: inner.inverse(self.inverse(p)),
            tag=f"{self.tag}∘{inner.tag}",
        )

    def inverse_residual(self, probes: np.ndarray) -> float:
        """Max of both round-trip errors over ``probes``."""
        pts = np.asarray(probes, dtype=float)
        there = np.abs(self.inverse(self.forward(pts)) - pts)
        back = np.abs(self.forward(self.inverse(pts)) - pts)
        return float(max(np.nanmax(there), np.nanmax(back)))

    def check(self, probes: np.ndarray | None = None, tol: float | None = None) -> float:
        """Verify inverse consistency on ``probes``; raise when it fails."""
        pts = probe_grid() if probes is None else probes
        limit = config.tolerances.homeomorphism if tol is None else tol
        residual = self.inverse_residual(pts)
        if not residual <= limit:
            raise HomeomorphismError(
                f"{self.tag}: inverse residual {residual:.3e} exceeds {limit:.1e}"
            )
        return residual


def identity_map() -> Homeomorphism2D:
    return Homeomorphism2D(lambda p: np.array(p, dtype=float), lambda p: np.array(p, dtype=float),
                           "identity")


def scaling(k: float) -> Homeomorphism2D:
    if k == 0:
        raise HomeomorphismError("Scaling factor must be nonzero")
    return Homeomorphism2D(lambda p: k * np.asarray(p), lambda p: np.asarray(p) / k,
                           f"scaling({k:g})")


def shear(h0: Callable[[np.ndarray], np.ndarray], label: str = "h0") -> Homeomorphism2D:
    """(x, y) -> (x, y + h0(x))."""

    def forward(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = p.copy()
        out[..., 1] = p[..., 1] + h0(p[..., 0])
        return out

    def inverse(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = p.copy()
        out[..., 1] = p[..., 1] - h0(p[..., 0])
        return out

    return Homeomorphism2D(forward, inverse, f"shear({label})")


def x_sin_inv_x(x: np.ndarray) -> np.ndarray:
    """x sin(1/x), continuously extended by 0 at x = 0."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x == 0.0, 1.0, x)
    return np.where(x == 0.0, 0.0, x * np.sin(1.0 / safe))


def comsin_shear() -> Homeomorphism2D:
    return shear(x_sin_inv_x, "x sin(1/x)")


# ---------------------------------------------------------------------------
# Flows
# ---------------------------------------------------------------------------

class Flow:
    """Base class: a (possibly local) flow on the plane."""

    kind: FlowKind = FlowKind.CLOSED_FORM
    is_local: bool = False

    def __init__(self, label: str, vector_field: PointMap | None = None) -> None:
        self.label = label
        self.field = vector_field

    def orbit(self, x: Any, t_end: float | None = None) -> OrbitSegment:
        """Sample the orbit of ``x``; ``t_end`` bounds the times that will be requested."""
        raise NotImplementedError

    def evaluate(self, t: float, x: Any) -> np.ndarray:
        """Return Φ(t, x); raise ``OutOfDomainError`` outside a local flow's domain."""
        start = as_point(x)
        if t == 0:
            return start.copy()
        value = self.orbit(start, t).at(t)
        if not np.all(np.isfinite(value)):
            raise OutOfDomainError(f"{self.label}: t={t:g} outside the domain of {start.tolist()}")
        return value

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "label": self.label, "local": self.is_local}

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.label!r}>"


class ClosedFormFlow(Flow):
    """Flow given by an explicit formula, optionally carrying its generating field."""

    def __init__(
        self,
        formula: Formula,
        label: str,
        vector_field: PointMap | None = None,
        *,
        kind: FlowKind = FlowKind.CLOSED_FORM,
    ) -> None:
        super().__init__(label, vector_field)
        self.formula = formula
        self.kind = kind

    def orbit(self, x: Any, t_end: float | None = None) -> OrbitSegment:
        start = as_point(x)
        return OrbitSegment(start, lambda ts: self.formula(ts, start))


class RotationFlow(ClosedFormFlow):
    """Rotation about the origin at constant angular speed (π by default, period 2)."""

    def __init__(self, angular_speed: float = np.pi) -> None:
        omega = float(angular_speed)

        def formula(ts: np.ndarray, x: np.ndarray) -> np.ndarray:
            c, s = np.cos(omega * ts), np.sin(omega * ts)
            return np.column_stack([c * x[0] - s * x[1], s * x[0] + c * x[1]])

        def vector_field(p: np.ndarray) -> np.ndarray:
            p = np.asarray(p, dtype=float)
            return np.stack([-omega * p[..., 1], omega * p[..., 0]], axis=-1)

        super().__init__(formula, f"rotation({omega:g})", vector_field, kind=FlowKind.ROTATION)
        self.angular_speed = omega

    @property
    def period(self) -> float:
        return 2 * np.pi / abs(self.angular_speed)


class AffineFlow(ClosedFormFlow):
    """Closed-form flow of x' = A x + b.

    The augmented generator [[A, b], [0, 0]] is diagonalized once; orbits are
    then a sum of exponentials evaluated for all requested times at once.
    Defective generators fall back to one matrix exponential per time.
    """

    def __init__(self, matrix: Any, offset: Any = (0.0, 0.0), label: str = "affine") -> None:
        a = np.asarray(matrix, dtype=float).reshape(2, 2)
        b = np.asarray(offset, dtype=float).reshape(2)
        generator = np.zeros((3, 3))
        generator[:2, :2] = a
        generator[:2, 2] = b
        eigvals, eigvecs = np.linalg.eig(generator)
        self.matrix, self.offset = a, b
        self._generator = generator
        self._diagonal = bool(np.linalg.cond(eigvecs) < 1e10)
        if self._diagonal:
            self._eigvals = eigvals
            self._eigvecs = eigvecs
            self._eigvecs_inv = np.linalg.inv(eigvecs)
        else:
            logger.debug("%s: defective generator, using matrix exponentials", label)

        def vector_field(p: np.ndarray) -> np.ndarray:
            return np.asarray(p, dtype=float) @ a.T + b

        super().__init__(self._formula, label, vector_field)

    def _formula(self, ts: np.ndarray, x: np.ndarray) -> np.ndarray:
        lifted = np.array([x[0], x[1], 1.0])
        if self._diagonal:
            coeffs = self._eigvecs_inv @ lifted
            modes = np.exp(np.outer(ts, self._eigvals)) * coeffs
            return np.real(modes @ self._eigvecs.T)[:, :2]
        return np.array([expm(self._generator * t) @ lifted for t in ts])[:, :2]


class VectorFieldFlow(Flow):
    """Local flow of a vector field, integrated with dense output.

    The orbit ends (NaN samples) when the state leaves the ball of radius
    ``cfg.blowup``; a solver failure raises ``IntegratorError``.
    """

    kind = FlowKind.VECTOR_FIELD
    is_local = True

    def __init__(
        self,
        vector_field: PointMap,
        label: str = "vector field",
        *,
        method: str = "DOP853",
        cfg: Tolerances | None = None,
    ) -> None:
        super().__init__(label, vector_field)
        self.method = method
        self.cfg = cfg or config.tolerances

    def orbit(self, x: Any, t_end: float | None = None) -> OrbitSegment:
        start = as_point(x)
        span = self.cfg.horizon if t_end is None else float(t_end)
        if span == 0:
            return OrbitSegment(start, lambda ts: np.tile(start, (ts.size, 1)))
        radius = self.cfg.blowup

        def escape(t: float, y: np.ndarray) -> float:
            return radius - float(np.max(np.abs(y)))

        escape.terminal = True

        sol = solve_ivp(
            lambda t, y: self.field(y),
            (0.0, span),
            start,
            method=self.method,
            rtol=self.cfg.rtol,
            atol=self.cfg.atol,
            dense_output=True,
            events=escape,
        )
        if sol.status == -1:
            raise IntegratorError(f"{self.label} from {start.tolist()}: {sol.message}")
        if sol.status == 1:
            logger.debug("%s: orbit of %s escapes at t=%.6g", self.label, start.tolist(), sol.t[-1])
        lo, hi = sorted((0.0, float(sol.t[-1])))
        dense = sol.sol

        def sampler(ts: np.ndarray) -> np.ndarray:
            out = np.full((ts.size, 2), np.nan)
            ok = (ts >= lo) & (ts <= hi)
            if ok.any():
                out[ok] = np.asarray(dense(ts[ok])).T.reshape(-1, 2)
            return out

        return OrbitSegment(start, sampler)


class ConjugatedFlow(Flow):
    """Ψ(t, ·) = h ∘ Φ(t, ·) ∘ h⁻¹."""

    kind = FlowKind.CONJUGATED

    def __init__(self, inner: Flow, h: Homeomorphism2D, label: str | None = None) -> None:
        super().__init__(label or f"{h.tag}·{inner.label}")
        self.inner = inner
        self.h = h
        self.is_local = inner.is_local

    def orbit(self, x: Any, t_end: float | None = None) -> OrbitSegment:
        start = as_point(x)
        inner = self.inner.orbit(self.h.inverse(start), t_end)
        return OrbitSegment(start, lambda ts: self.h.forward(inner(ts)))


def conjugate_flow(
    flow: Flow,
    h: Homeomorphism2D,
    *,
    probes: np.ndarray | None = None,
    cfg: Tolerances | None = None,
) -> ConjugatedFlow:
    """Return the unique flow Ψ with Ψ(t, h(x)) = h(Φ(t, x))."""
    tol = (cfg or config.tolerances).homeomorphism
    h.check(probes, tol)
    return ConjugatedFlow(flow, h)


# ---------------------------------------------------------------------------
# Möbius transformations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MoebiusMap:
    """z -> (az + b) / (cz + d) on the Riemann sphere."""

    matrix: np.ndarray
    det_nonzero: bool = field(init=False, default=True)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"Möbius matrix must be 2x2, got {m.shape}")
        if abs(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]) < 1e-14:
            raise ValueError("Möbius matrix is singular (ad - bc = 0)")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> MoebiusMap:
        return cls(np.eye(2))

    @classmethod
    def cayley(cls) -> MoebiusMap:
        """z -> i(z + 1)/(z - 1): -1 -> 0, 1 -> ∞, the unit disc onto the lower half plane."""
        return cls(np.array([[1j, 1j], [1, -1]]))

    @property
    def determinant(self) -> complex:
        m = self.matrix
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def pole(self) -> complex | None:
        """Finite point sent to ∞, or None when ∞ is fixed."""
        c, d = self.matrix[1]
        return None if c == 0 else complex(-d / c)

    @property
    def image_of_infinity(self) -> complex | None:
        a, c = self.matrix[0, 0], self.matrix[1, 0]
        return None if c == 0 else complex(a / c)

    def inverse(self) -> MoebiusMap:
        (a, b), (c, d) = self.matrix
        return MoebiusMap(np.array([[d, -b], [-c, a]]))

    def compose(self, inner: MoebiusMap) -> MoebiusMap:
        """Return ``self ∘ inner`` (matrix product)."""
        return MoebiusMap(self.matrix @ inner.matrix)

    def __call__(self, z: Any) -> np.ndarray:
        """Apply to complex values; the point at infinity is returned as complex inf."""
        (a, b), (c, d) = self.matrix
        z = np.asarray(z, dtype=complex)
        num = a * z + b
        den = c * z + d
        scale = np.abs(c) * np.abs(z) + np.abs(d)
        at_pole = np.abs(den) <= _POLE_EPS * np.where(scale > 0, scale, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(at_pole, complex(np.inf, np.inf), num / np.where(at_pole, 1.0, den))
        return out

    def apply_points(self, pts: Any) -> np.ndarray:
        """Apply to planar points ``(..., 2)``; images at infinity become NaN rows."""
        pts = np.asarray(pts, dtype=float)
        w = self(pts[..., 0] + 1j * pts[..., 1])
        out = np.stack([w.real, w.imag], axis=-1)
        out[~np.isfinite(w)] = np.nan
        return out

    def as_homeomorphism(self) -> Homeomorphism2D:
        """The map restricted to the plane minus its pole (images at ∞ are NaN)."""
        inv = self.inverse()
        return Homeomorphism2D(self.apply_points, inv.apply_points, "moebius")


class MoebiusConjugatedFlow(Flow):
    """Ψ(t, M(z)) = M(Φ(t, z)), with M(∞) an equilibrium of Ψ."""

    kind = FlowKind.CONJUGATED
    is_local = True

    def __init__(self, inner: Flow, moebius: MoebiusMap, label: str | None = None) -> None:
        super().__init__(label or f"moebius·{inner.label}")
        self.inner = inner
        self.moebius = moebius
        self._inverse = moebius.inverse()

    def orbit(self, x: Any, t_end: float | None = None) -> OrbitSegment:
        start = as_point(x)
        z = self._inverse.apply_points(start)
        if not np.all(np.isfinite(z)):
            # start = M(∞), which the extended flow keeps fixed
            return OrbitSegment(start, lambda ts: np.tile(start, (ts.size, 1)))
        inner = self.inner.orbit(z, t_end)
        return OrbitSegment(start, lambda ts: self.moebius.apply_points(inner(ts)))

    def evaluate(self, t: float, x: Any) -> np.ndarray:
        try:
            return super().evaluate(t, x)
        except OutOfDomainError as exc:
            raise MoebiusPoleError(f"orbit reaches the pole of the Möbius map: {exc}") from exc


def flow_fixes_point(flow: Flow, p: np.ndarray, cfg: Tolerances | None = None) -> bool:
    """True when ``p`` is not moved by ``flow`` at the probe-ladder times."""
    tol = (cfg or config.tolerances)
    times = np.array(tol.ladder() + [0.5, 1.0, 2.0])
    try:
        samples = flow.orbit(p, times.max())(times)
    except FlowError:
        return False
    moved = np.abs(samples - p)
    return bool(np.all(np.isfinite(samples)) and np.max(moved) <= tol.boundary)


def flow_is_global(flow: Flow, probes: np.ndarray | None = None, span: float = 10.0) -> bool:
    """True when every probe orbit stays finite for |t| <= span."""
    times = np.linspace(-span, span, 41)
    for p in probe_grid() if probes is None else probes:
        try:
            samples = flow.orbit(p, span)(times[times >= 0])
            back = flow.orbit(p, -span)(times[times <= 0])
        except FlowError:
            return False
        if not (np.all(np.isfinite(samples)) and np.all(np.isfinite(back))):
            return False
    return True


def moebius_conjugate(
    flow: Flow, moebius: MoebiusMap, *, cfg: Tolerances | None = None
) -> MoebiusConjugatedFlow:
    """Return Ψ with Ψ(t, M(z)) = M(Φ(t, z)) away from the pole of M."""
    pole = moebius.pole
    if pole is not None and not flow_fixes_point(flow, np.array([pole.real, pole.imag]), cfg):
        logger.warning(
            "Pole %s of the Möbius map is not an equilibrium of %s; the conjugated flow is local",
            pole, flow.label,
        )
    return MoebiusConjugatedFlow(flow, moebius)


# ---------------------------------------------------------------------------
# Flow axioms
# ---------------------------------------------------------------------------

@dataclass
class GroupLawReport:
    """Outcome of a group-law probe run."""

    max_residual: float
    checked: int
    skipped: int

    def to_dict(self) -> dict[str, Any]:
        return {"max_residual": self.max_residual, "checked": self.checked,
                "skipped": self.skipped}


def group_law_residual(
    flow: Flow, probes: Iterable[tuple[float, float, Any]]
) -> GroupLawReport:
    """Max of |Φ(s+t, x) - Φ(s, Φ(t, x))| over probes; out-of-domain probes are skipped."""
    worst, checked, skipped = 0.0, 0, 0
    for s, t, x in probes:
        try:
            direct = flow.evaluate(s + t, x)
            stepped = flow.evaluate(s, flow.evaluate(t, x))
        except OutOfDomainError:
            skipped += 1
            continue
        worst = max(worst, float(np.max(np.abs(direct - stepped))))
        checked += 1
    return GroupLawReport(worst, checked, skipped)


def random_probes(
    rng: np.random.Generator, n: int, *, time_scale: float = 2.0, extent: float = 2.0
) -> list[tuple[float, float, np.ndarray]]:
    """``n`` random (s, t, x) triples with |s|, |t| <= time_scale and x in a square."""
    s = rng.uniform(-time_scale, time_scale, n)
    t = rng.uniform(-time_scale, time_scale, n)
    xs = rng.uniform(-extent, extent, (n, 2))
    return [(float(a), float(b), p) for a, b, p in zip(s, t, xs)]


# ---------------------------------------------------------------------------
# Builtin vector fields and flows
# ---------------------------------------------------------------------------

def affine_focus_system(lam: float, mu: float, p: float) -> tuple[np.ndarray, np.ndarray]:
    """x' = -λx - μ(y - p), y' = μx - λ(y - p) as (A, b)."""
    a = np.array([[-lam, -mu], [mu, -lam]])
    return a, np.array([mu * p, lam * p])


def cooling_system(
    alpha: float, beta: float, gamma: float, t_room: float
) -> tuple[np.ndarray, np.ndarray]:
    """Wall/stone temperatures (T_w, T_s) as (A, b).

    T_s' = -α(T_s - T_w) and T_w' = γ(T_s - T_w) - β(T_w - T_r).
    """
    a = np.array([[-(gamma + beta), gamma], [alpha, -alpha]])
    return a, np.array([beta * t_room, 0.0])


def polynomial_field(terms: dict[str, list[tuple[float, int, int]]]) -> PointMap:
    """Field whose components are sums of ``coef * x**i * y**j`` terms.

    ``terms`` maps ``"x"`` and ``"y"`` to lists of ``(coef, i, j)``.
    """
    parts = [list(terms.get("x", [])), list(terms.get("y", []))]

    def vector_field(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        comps = []
        for part in parts:
            total = np.zeros_like(x)
            for coef, i, j in part:
                total = total + coef * x**i * y**j
            comps.append(total)
        return np.stack(comps, axis=-1)

    return vector_field


def _gravity(g: float = 1.0) -> ClosedFormFlow:
    # x is the velocity (boundary coordinate), y the height
    def formula(ts: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.column_stack([x[0] - g * ts, x[1] + x[0] * ts - 0.5 * g * ts**2])

    def vector_field(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.stack([np.full_like(p[..., 0], -g), p[..., 0]], axis=-1)

    return ClosedFormFlow(formula, f"gravity({g:g})", vector_field)


def _translation() -> ClosedFormFlow:
    def formula(ts: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.column_stack([x[0] + ts, np.full_like(ts, x[1])])

    def vector_field(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.stack([np.ones_like(p[..., 0]), np.zeros_like(p[..., 0])], axis=-1)

    return ClosedFormFlow(formula, "translation", vector_field)


def _fold() -> ClosedFormFlow:
    # orbits are parabolas tangent to the x-axis from below at x = 0
    def formula(ts: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.column_stack([x[0] + ts, x[1] - x[0] * ts - 0.5 * ts**2])

    def vector_field(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.stack([np.ones_like(p[..., 0]), -p[..., 0]], axis=-1)

    return ClosedFormFlow(formula, "fold", vector_field)


def _polynomial(terms: dict[str, list[tuple[float, int, int]]]) -> VectorFieldFlow:
    return VectorFieldFlow(polynomial_field(terms), "polynomial")


_BUILTIN_FLOWS: dict[str, Callable[..., Flow]] = {
    "linear": lambda a, b, c, d: AffineFlow([[a, b], [c, d]], label=f"linear({a},{b},{c},{d})"),
    "exmap": lambda: AffineFlow([[1.0, 0.0], [0.0, -1.0]], label="exmap"),
    "affine_focus": lambda lam=1.0, mu=1.0, p=0.0: AffineFlow(
        *affine_focus_system(lam, mu, p), label=f"affine_focus(λ={lam:g},μ={mu:g},p={p:g})"
    ),
    "rotation": lambda omega=np.pi: RotationFlow(omega),
    "source": lambda: AffineFlow(np.eye(2), label="source"),
    "sink": lambda: AffineFlow(-np.eye(2), label="sink"),
    "gravity": _gravity,
    "translation": _translation,
    "fold": _fold,
    "cooling": lambda alpha=1.0, beta=1.0, gamma=1.0, t_room=20.0: AffineFlow(
        *cooling_system(alpha, beta, gamma, t_room), label="cooling"
    ),
    "polynomial": _polynomial,
}

BUILTIN_FLOW_NAMES = tuple(sorted(_BUILTIN_FLOWS))


def builtin_flow(name: str, *, integrate: bool = False, **params: Any) -> Flow:
    """Build a registry flow; ``integrate=True`` returns its integrated twin."""
    try:
        factory = _BUILTIN_FLOWS[name]
    except KeyError as exc:
        raise FlowError(
            f"Unknown builtin flow {name!r}; choose from {', '.join(BUILTIN_FLOW_NAMES)}"
        ) from exc
    try:
        flow = factory(**params)
    except TypeError as exc:
        raise FlowError(f"Bad parameters for flow {name!r}: {exc}") from exc
    if integrate and flow.kind is not FlowKind.VECTOR_FIELD:
        if flow.field is None:
            raise FlowError(f"Flow {name!r} has no vector field to integrate")
        return VectorFieldFlow(flow.field, f"{flow.label} (integrated)")
    return flow


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class FlowError(Exception):
    """Base flow error."""

class OutOfDomainError(FlowError):
    """Time outside the domain of a local flow at the given point."""

class MoebiusPoleError(OutOfDomainError):
    """Orbit reaches the pole of a Möbius conjugacy."""

class IntegratorError(FlowError):
    """Integrator failure such as step-size underflow."""

class HomeomorphismError(FlowError):
    """Forward and inverse maps disagree beyond tolerance."""
