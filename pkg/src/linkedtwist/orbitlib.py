"""Level-set geometry and timing: section points, periods, rotation numbers, orbit samples."""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import integrate, models
from .errors import AngleUndefinedError, DomainExhaustedError, NoLevelError
from .integrate import DEFAULT_CONFIG, IntegratorConfig

__all__ = [
    "Ordering",
    "SectionLine",
    "EnergyLevel",
    "default_line",
    "joining_line",
    "energy_offset",
    "section_points",
    "period",
    "energy_level",
    "rotation_number",
    "rotation_numbers",
    "orbit_samples",
    "winding_number",
]


class Ordering(str, enum.Enum):
    BY_ABSCISSA = "byAbscissa"
    BY_ORDINATE_REVERSED = "byOrdinateReversed"
    BY_ABSCISSA_AT_FIXED_ORDINATE = "byAbscissaAtFixedOrdinate"


_ORDERING_OF = {
    models.Variant.NEG_MED: Ordering.BY_ABSCISSA,
    models.Variant.POS_MED: Ordering.BY_ORDINATE_REVERSED,
    models.Variant.BIO: Ordering.BY_ABSCISSA_AT_FIXED_ORDINATE,
}


@dataclass(frozen=True)
class SectionLine:
    """Oriented line through a center, with the ordering used to compare points on it.

    ``direction`` points the way the ordering increases, so the line parameter
    ``s`` in ``base + s * direction`` is itself an order key.  ``up_sign``
    selects which side counts as "up": +1 for the left of ``direction``, -1
    for its right (clockwise systems see the picture mirrored).
    """

    base: tuple
    direction: tuple
    ordering: Ordering
    up_sign: int = 1

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = float(np.hypot(*d))
        if not n > 0:
            raise ValueError("section line direction must be nonzero")
        object.__setattr__(self, "direction", tuple(float(v) for v in d / n))
        object.__setattr__(self, "base", tuple(float(v) for v in self.base))
        object.__setattr__(self, "ordering", Ordering(self.ordering))
        if self.up_sign not in (1, -1):
            raise ValueError("up_sign must be +1 or -1")

    @property
    def base_array(self) -> np.ndarray:
        return np.array(self.base)

    @property
    def dir_array(self) -> np.ndarray:
        return np.array(self.direction)

    @property
    def up_normal(self) -> np.ndarray:
        dx, dy = self.direction
        return self.up_sign * np.array([-dy, dx])

    def as_oriented(self) -> integrate.OrientedLine:
        return integrate.OrientedLine(self.base_array, self.dir_array)

    def param(self, x) -> np.ndarray:
        """Line parameter of (the projection of) ``x``."""
        return (np.asarray(x, dtype=float) - self.base_array) @ self.dir_array

    def height(self, x) -> np.ndarray:
        """Signed distance from the line, positive on the "up" side."""
        return (np.asarray(x, dtype=float) - self.base_array) @ self.up_normal

    def point(self, s) -> np.ndarray:
        return self.base_array + np.multiply.outer(np.asarray(s, dtype=float), self.dir_array)

    def order_key(self, x) -> np.ndarray:
        """Key realizing the strict ordering on the line, independent of ``base``."""
        x = np.asarray(x, dtype=float)
        if self.ordering is Ordering.BY_ORDINATE_REVERSED:
            return -x[..., 1]
        return x[..., 0]

    def frame(self) -> np.ndarray:
        """Rows are the frame axes; the second axis is ``up_normal``."""
        n = self.up_normal
        return np.array([[n[1], -n[0]], n])

    def angle(self, x, ref=None) -> np.ndarray:
        """Polar angle of ``x`` about ``ref`` (default ``base``) in the line frame."""
        ref = self.base_array if ref is None else np.asarray(ref, dtype=float)
        rel = (np.asarray(x, dtype=float) - ref) @ self.frame().T
        return np.arctan2(rel[..., 1], rel[..., 0])


def _up_sign(sys: models.SystemSpec) -> int:
    return models.rotation_direction(sys).sign


def default_line(sys: models.SystemSpec) -> SectionLine:
    """Section line through the center of ``sys`` alone.

    Horizontal for the abscissa orderings and vertical (ordinate decreasing)
    for the reversed-ordinate convention.
    """
    c = models.center_array(sys)
    ordering = _ORDERING_OF[sys.variant]
    d = (0.0, -1.0) if ordering is Ordering.BY_ORDINATE_REVERSED else (1.0, 0.0)
    return SectionLine(tuple(c), d, ordering, _up_sign(sys))


def joining_line(sys_a: models.SystemSpec, sys_b: models.SystemSpec) -> SectionLine:
    """The line through both centers, based at the center of ``sys_a``.

    Falls back to :func:`default_line` when the centers coincide.
    """
    ca = models.center_array(sys_a)
    cb = models.center_array(sys_b)
    gap = cb - ca
    if np.hypot(*gap) <= 1e-14:
        return default_line(sys_a)
    ordering = _ORDERING_OF[sys_a.variant]
    line = SectionLine(tuple(ca), tuple(gap), ordering, _up_sign(sys_a))
    probe = line.order_key(ca + line.dir_array) - line.order_key(ca)
    if probe < 0:
        line = SectionLine(tuple(ca), tuple(-gap), ordering, _up_sign(sys_a))
    elif probe == 0:
        raise ValueError("the line through the centers is degenerate for this ordering")
    return line


def energy_offset(sys: models.SystemSpec, x) -> np.ndarray:
    """H(x) - e0, evaluated with ``log1p`` so that it stays accurate near the center."""
    k = models.kernel(sys)
    u0, v0 = models.center_array(sys)
    x = np.asarray(x, dtype=float)
    du = x[..., 0] - u0
    dv = x[..., 1] - v0
    a_part = (-k.c * np.log1p(du / u0) + (k.c - k.d * k.U) * np.log1p(-du / (k.U - u0))) / k.rx
    b_part = (-k.a * np.log1p(dv / v0) + (k.a - k.b * k.V) * np.log1p(-dv / (k.V - v0))) / k.ry
    return k.hscale * (a_part + b_part)


def _gap(sys, e) -> float:
    e0 = models.min_energy(sys)
    gap = float(e) - e0
    if not gap > 0:
        raise NoLevelError(f"energy {float(e):.17g} is not above the minimum {e0:.17g}")
    return gap


def _ray_limit(sys, origin, direction) -> float:
    """Largest s keeping origin + s*direction at least the boundary guard inside."""
    U, V = sys.domain
    g = 2 * models.BOUNDARY_GUARD
    lim = math.inf
    for lo, hi, p, d in ((0.0, U, origin[0], direction[0]), (0.0, V, origin[1], direction[1])):
        if d > 0:
            lim = min(lim, (hi - g - p) / d)
        elif d < 0:
            lim = min(lim, (lo + g - p) / d)
    return lim


def _ray_root(sys, origin, direction, gap) -> float:
    def f(s):
        return float(energy_offset(sys, origin + s * direction)) - gap

    s_max = _ray_limit(sys, origin, direction)
    lo, s = 0.0, min(1e-3 * math.sqrt(gap), 0.5 * s_max)
    while f(s) < 0:
        if s >= s_max:
            raise DomainExhaustedError(
                f"level H - e0 = {gap:.6g} not reached before the domain boundary"
            )
        lo, s = s, min(2 * s, s_max)
    return brentq(f, lo, s, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def section_points(
    sys: models.SystemSpec, e: float, line: Optional[SectionLine] = None
) -> tuple[np.ndarray, np.ndarray]:
    """The two points where the level curve H = e meets ``line``, ordered (P-, P+).

    Raises
    ------
    NoLevelError
        If ``e`` does not exceed the minimum energy.
    DomainExhaustedError
        If the level is not reached before the domain boundary.
    """
    line = default_line(sys) if line is None else line
    gap = _gap(sys, e)
    c = models.center_array(sys)
    d = line.dir_array
    off = float(np.abs((c - line.base_array) @ np.array([-d[1], d[0]])))
    if off > 1e-9:
        raise ValueError(f"section line misses the center by {off:.3g}")
    s_plus = _ray_root(sys, c, d, gap)
    s_minus = _ray_root(sys, c, -d, gap)
    return c - s_minus * d, c + s_plus * d


def _crossing_sign(sys, line: SectionLine, x) -> int:
    d = line.dir_array
    f = models.vector_field(sys, x)
    return 1 if d[0] * f[1] - d[1] * f[0] > 0 else -1


@functools.lru_cache(maxsize=4096)
def _period_cached(sys, e, line, cfg):
    _, p_plus = section_points(sys, e, line)
    sign = _crossing_sign(sys, line, p_plus)
    t, _ = integrate.first_crossing(sys, p_plus, line.as_oriented(), cfg, direction=sign)
    return t


def period(
    sys: models.SystemSpec,
    e: float,
    line: Optional[SectionLine] = None,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> float:
    """Time for the orbit at energy ``e`` to complete one turn.

    Measured between two successive same-direction crossings of ``line``,
    starting on it at P+.
    """
    line = default_line(sys) if line is None else line
    _gap(sys, e)
    return _period_cached(sys, float(e), line, cfg)


@dataclass(frozen=True)
class EnergyLevel:
    sys: models.SystemSpec
    e: float
    tau: float
    section_pts: tuple

    def __post_init__(self):
        if not self.tau > models.linear_period(self.sys) * (1 - 1e-9):
            raise ValueError("period below the small-cycle limit")


def energy_level(
    sys: models.SystemSpec,
    e: float,
    line: Optional[SectionLine] = None,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> EnergyLevel:
    line = default_line(sys) if line is None else line
    pts = section_points(sys, e, line)
    return EnergyLevel(sys, float(e), period(sys, e, line, cfg), pts)


def rotation_numbers(
    sys: models.SystemSpec,
    X0,
    t: float,
    center_ref=None,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """Rotation numbers of a batch of starting points (see :func:`rotation_number`)."""
    X0 = np.asarray(X0, dtype=float).reshape(-1, 2)
    models._check_interior(sys, X0)
    ref = models.center_array(sys) if center_ref is None else np.asarray(center_ref, dtype=float)
    r0 = np.hypot(*(X0 - ref).T)
    if np.any(r0 < 1e-9):
        raise AngleUndefinedError("starting point coincides with the reference point")
    tracker = integrate.AngleTracker(ref, len(X0))
    k = models.kernel(sys)
    integrate.solve(lambda s, y: models._field(k, y), X0, 0.0, float(t), cfg, tracker, sys.domain)
    if np.any(tracker.closest < 1e-9):
        raise AngleUndefinedError("trajectory passes within 1e-9 of the reference point")
    return models.rotation_direction(sys).sign * tracker.total / (2 * math.pi)


def rotation_number(
    sys: models.SystemSpec,
    x0,
    t: float,
    center_ref=None,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> float:
    """Normalized angular displacement about ``center_ref`` after time ``t``.

    Signed so that turns in the natural direction of the orbits count
    positive.

    Raises
    ------
    AngleUndefinedError
        If the trajectory comes within 1e-9 of ``center_ref``.
    """
    return float(rotation_numbers(sys, x0, t, center_ref, cfg)[0])


def orbit_samples(sys: models.SystemSpec, e: float, n: int) -> np.ndarray:
    """Closed polyline of ``n`` points on the level curve H = e.

    The last point repeats the first; points follow the flow direction.
    Each sample lies on a ray from the center (lower level sets are star
    shaped), found by vectorized bisection.
    """
    if n < 8:
        raise ValueError("n must be at least 8")
    gap = _gap(sys, e)
    c = models.center_array(sys)
    sign = models.rotation_direction(sys).sign
    phi = sign * 2 * math.pi * np.arange(n - 1) / (n - 1)
    dirs = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    U, V = sys.domain
    g = 2 * models.BOUNDARY_GUARD
    with np.errstate(divide="ignore"):
        lim_x = np.where(dirs[:, 0] > 0, (U - g - c[0]) / dirs[:, 0],
                         np.where(dirs[:, 0] < 0, (g - c[0]) / dirs[:, 0], np.inf))
        lim_y = np.where(dirs[:, 1] > 0, (V - g - c[1]) / dirs[:, 1],
                         np.where(dirs[:, 1] < 0, (g - c[1]) / dirs[:, 1], np.inf))
    hi = np.minimum(lim_x, lim_y)
    if np.any(energy_offset(sys, c + hi[:, None] * dirs) < gap):
        raise DomainExhaustedError(f"level H - e0 = {gap:.6g} touches the domain boundary")
    lo = np.zeros(n - 1)
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        above = energy_offset(sys, c + mid[:, None] * dirs) >= gap
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * hi):
            break
    pts = c + (0.5 * (lo + hi))[:, None] * dirs
    return np.vstack([pts, pts[:1]])


def winding_number(poly: np.ndarray, ref) -> int:
    """Discrete winding number of a closed polyline about ``ref`` (+1 counterclockwise)."""
    rel = np.asarray(poly, dtype=float) - np.asarray(ref, dtype=float)
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    return int(round(np.sum(np.angle(np.exp(1j * np.diff(ang)))) / (2 * math.pi)))
