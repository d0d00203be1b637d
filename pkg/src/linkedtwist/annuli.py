"""Annuli of level curves, linkage certificates and their intersection rectangles.

Two geometries are supported.  With two distinct centers (the game models)
linked annuli cross in two rectangles, one on each side of the line through the
centers.  With one shared center (the ecological model, switching either the
growth rates or the carrying capacities) they cross in four rectangles, one per
quadrant about the center.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from shapely.geometry import Polygon

from . import models, orbitlib
from .errors import DegeneracyError, LinkModeError, NoLevelError, NotLinkedError
from .orbitlib import SectionLine

__all__ = [
    "LinkKind",
    "Annulus",
    "OrientedRectangle",
    "LinkCertificate",
    "link_check",
    "intersection_rectangles",
    "safe_energy",
    "TIE_SLACK",
]

#: slack on the line parameter for the non-strict comparisons of a chain
TIE_SLACK = 1e-9
#: points per level curve when seeding curve-curve crossings
CROSSING_SAMPLES = 2048
#: minimum distance between rectangle vertices
MIN_WIDTH = 1e-6
NEWTON_TOL = 1e-12


class LinkKind(str, enum.Enum):
    TWO_CENTERS = "TwoCenters"
    ONE_CENTER_FOUR = "OneCenterFour"


def safe_energy(sys: models.SystemSpec, x) -> np.ndarray:
    """H(x), with +inf for points outside the open domain of ``sys``."""
    x = np.asarray(x, dtype=float)
    U, V = sys.domain
    inside = (x[..., 0] > 0) & (x[..., 0] < U) & (x[..., 1] > 0) & (x[..., 1] < V)
    xs = np.where(inside[..., None], x, 0.5 * np.array([U, V]))
    return np.where(inside, models._energy(models.kernel(sys), xs), np.inf)


@dataclass(frozen=True)
class Annulus:
    """Closed region e1 <= H <= e2 of one system."""

    sys: models.SystemSpec
    e1: float
    e2: float

    def __post_init__(self):
        e0 = models.min_energy(self.sys)
        if not e0 < self.e1:
            raise NoLevelError(f"inner energy {self.e1} is not above the minimum {e0:.10g}")
        if not self.e1 < self.e2:
            raise ValueError(f"annulus energies must increase, got {self.e1} >= {self.e2}")

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        h = safe_energy(self.sys, x)
        return (h >= self.e1 - tol) & (h <= self.e2 + tol)


def _newton(sys_a, sys_b, target, seed, tol=NEWTON_TOL, max_iter=60):
    """Solve H_a(x) = target[:, 0], H_b(x) = target[:, 1] by damped Newton.

    Returns the solutions and a mask of converged members.
    """
    ka, kb = models.kernel(sys_a), models.kernel(sys_b)
    x = np.array(seed, dtype=float).reshape(-1, 2)
    target = np.asarray(target, dtype=float).reshape(-1, 2)

    def resid(pts, tgt):
        return np.stack([safe_energy(sys_a, pts), safe_energy(sys_b, pts)], axis=-1) - tgt

    r = resid(x, target)
    ok = np.zeros(len(x), dtype=bool)
    for _ in range(max_iter):
        ok = np.all(np.abs(r) <= tol * np.maximum(1.0, np.abs(target)), axis=-1)
        todo = np.flatnonzero(~ok & np.all(np.isfinite(r), axis=-1))
        if todo.size == 0:
            break
        xt = x[todo]
        J = np.stack([models._gradient(ka, xt), models._gradient(kb, xt)], axis=1)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        det = np.where(det == 0, np.finfo(float).tiny, det)
        rt = r[todo]
        dx = -np.stack(
            [J[:, 1, 1] * rt[:, 0] - J[:, 0, 1] * rt[:, 1], -J[:, 1, 0] * rt[:, 0] + J[:, 0, 0] * rt[:, 1]],
            axis=-1,
        ) / det[:, None]
        step = np.ones(todo.size)
        norm0 = np.max(np.abs(rt), axis=-1)
        for _ in range(30):
            trial = xt + step[:, None] * dx
            rn = resid(trial, target[todo])
            better = np.max(np.abs(rn), axis=-1) < norm0
            if np.all(better | (step < 1e-9)):
                break
            step = np.where(better, step, 0.5 * step)
        x[todo] = trial
        r[todo] = rn
        stalled = np.max(np.abs(dx), axis=-1) * step <= 4 * np.finfo(float).eps
        if np.all(stalled):
            break
    ok = np.all(np.abs(r) <= 1e-9 * np.maximum(1.0, np.abs(target)), axis=-1)
    return x, ok


@dataclass(frozen=True)
class OrientedRectangle:
    """One connected component of the intersection of two annuli.

    Curvilinear coordinates are the two energies (H_a, H_b).  ``orient`` names
    the system (``"a"`` or ``"b"``) whose inner and outer levels form the
    left and right sides.

    Attributes
    ----------
    name : str
        ``"A"``/``"B"`` for the two-center geometry, ``"R1"``..``"R4"`` otherwise.
    tag : str
        Half-plane (``"u"``/``"d"``) or quadrant (``"R1"``..``"R4"``) label.
    vertices : tuple
        ``vertices[i][j]`` is the crossing of H_a = ea[i] and H_b = eb[j].
    polygon : tuple
        Closed boundary polyline walking the four sides in turn.
    """

    name: str
    tag: str
    sys_a: models.SystemSpec
    sys_b: models.SystemSpec
    ea: tuple
    eb: tuple
    vertices: tuple
    line: SectionLine
    kind: LinkKind
    orient: str = "a"
    polygon: tuple = ()

    # -- orientation ---------------------------------------------------------

    @property
    def orient_sys(self) -> models.SystemSpec:
        return self.sys_a if self.orient == "a" else self.sys_b

    @property
    def other_sys(self) -> models.SystemSpec:
        return self.sys_b if self.orient == "a" else self.sys_a

    @property
    def side_levels(self) -> tuple:
        """(left, right) energies of the orienting system."""
        return self.ea if self.orient == "a" else self.eb

    @property
    def other_levels(self) -> tuple:
        return self.eb if self.orient == "a" else self.ea

    @property
    def label(self) -> str:
        return f"{self.name}@{self.orient}"

    def oriented(self, by) -> "OrientedRectangle":
        """Copy whose left/right sides lie on the levels of ``by``.

        ``by`` is ``"a"``, ``"b"`` or one of the two systems.
        """
        if isinstance(by, models.SystemSpec):
            if by == self.sys_a:
                by = "a"
            elif by == self.sys_b:
                by = "b"
            else:
                raise ValueError("system does not bound this rectangle")
        if by not in ("a", "b"):
            raise ValueError("orientation must be 'a' or 'b'")
        return dataclasses.replace(self, orient=by)

    # -- geometry ------------------------------------------------------------

    @property
    def vertex_array(self) -> np.ndarray:
        return np.array(self.vertices)

    def in_region(self, x) -> np.ndarray:
        return _tag_of(self.kind, self.line, x) == self.tag

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        """Both level sandwiches (widened by ``tol``) and the region tag."""
        x = np.asarray(x, dtype=float)
        ha = safe_energy(self.sys_a, x)
        hb = safe_energy(self.sys_b, x)
        ok = (ha >= self.ea[0] - tol) & (ha <= self.ea[1] + tol)
        ok &= (hb >= self.eb[0] - tol) & (hb <= self.eb[1] + tol)
        return ok & self.in_region(x)

    def energies(self, x) -> np.ndarray:
        """(H_orient, H_other) for points ``x``."""
        x = np.asarray(x, dtype=float)
        return np.stack([safe_energy(self.orient_sys, x), safe_energy(self.other_sys, x)], axis=-1)

    def point_at(self, s, t) -> np.ndarray:
        """Points with H_a = s and H_b = t inside this rectangle."""
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        target = np.stack([s.ravel(), t.ravel()], axis=-1)
        u = (target[:, 0] - self.ea[0]) / (self.ea[1] - self.ea[0])
        v = (target[:, 1] - self.eb[0]) / (self.eb[1] - self.eb[0])
        V = self.vertex_array
        seed = (
            ((1 - u) * (1 - v))[:, None] * V[0, 0]
            + ((1 - u) * v)[:, None] * V[0, 1]
            + (u * (1 - v))[:, None] * V[1, 0]
            + (u * v)[:, None] * V[1, 1]
        )
        x, ok = _newton(self.sys_a, self.sys_b, target, seed)
        ok &= self.in_region(x)
        if not np.all(ok):
            x = self._continue(target, x, ok)
        return x.reshape(s.shape + (2,))

    def _continue(self, target, x, ok):
        # walk from the nearest vertex in energy coordinates
        V = self.vertex_array
        corners = np.array([[(self.ea[i], self.eb[j]) for j in (0, 1)] for i in (0, 1)]).reshape(4, 2)
        for k in np.flatnonzero(~ok):
            c = int(np.argmin(np.sum((corners - target[k]) ** 2, axis=-1)))
            pt = V.reshape(4, 2)[c]
            for w in np.linspace(0, 1, 65)[1:]:
                pt, good = _newton(self.sys_a, self.sys_b, (corners[c] + w * (target[k] - corners[c]))[None], pt[None])
                pt = pt[0]
                if not good[0]:
                    raise DegeneracyError(f"chart of rectangle {self.name} failed at {tuple(target[k])}")
            x[k] = pt
        return x

    def chart(self, u, v) -> np.ndarray:
        """Point at fractions (u, v) across the (left-right, other) directions."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        lo, hi = self.side_levels
        olo, ohi = self.other_levels
        p = lo + u * (hi - lo)
        q = olo + v * (ohi - olo)
        return self.point_at(p, q) if self.orient == "a" else self.point_at(q, p)

    def sides(self, n: int = 64) -> list:
        """The four boundary arcs as (system label, energy, points) in walking order."""
        w = np.linspace(0.0, 1.0, n)
        a0, a1 = self.ea
        b0, b1 = self.eb
        return [
            ("b", b0, self.point_at(a0 + w * (a1 - a0), np.full(n, b0))),
            ("a", a1, self.point_at(np.full(n, a1), b0 + w * (b1 - b0))),
            ("b", b1, self.point_at(a1 - w * (a1 - a0), np.full(n, b1))),
            ("a", a0, self.point_at(np.full(n, a0), b1 - w * (b1 - b0))),
        ]

    @property
    def polygon_array(self) -> np.ndarray:
        return np.array(self.polygon)

    def shape(self) -> Polygon:
        return Polygon(self.polygon_array)


def _tag_of(kind: LinkKind, line: SectionLine, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if kind is LinkKind.TWO_CENTERS:
        return np.where(line.height(x) > 0, "u", "d")
    rel = (x - line.base_array) @ line.frame().T
    east = rel[..., 0] > 0
    north = rel[..., 1] > 0
    return np.where(north, np.where(east, "R1", "R2"), np.where(east, "R4", "R3"))


@dataclass(frozen=True)
class LinkCertificate:
    """Evidence that two annuli are linked.

    ``chain`` lists the comparisons (left name, relation, right name) in
    order; ``keys`` maps each section point name to its line parameter.
    ``ties`` lists non-strict comparisons satisfied only within the slack.
    ``reversed`` is set when the line parameter runs against the ordering
    (the annuli were supplied with their roles swapped).
    """

    kind: LinkKind
    first: Annulus
    second: Annulus
    line: SectionLine
    points: dict
    keys: dict
    chain: tuple
    ties: tuple
    reversed: bool
    swapped: bool
    rectangles: tuple

    @property
    def names(self) -> list:
        return [r.name for r in self.rectangles]

    def rectangle(self, name: str) -> OrientedRectangle:
        for r in self.rectangles:
            if r.name == name:
                return r
        raise KeyError(f"no rectangle {name!r}; have {', '.join(self.names)}")

    @property
    def tangent(self) -> bool:
        return bool(self.ties)

    def describe(self) -> str:
        rel = {"<": "◁", "<=": "⊴"}
        head = self.chain[0][0]
        parts = [head] + [f"{rel[r]} {b}" for _, r, b in self.chain]
        lines = [
            f"kind: {self.kind.value}",
            f"chain: {' '.join(parts)}" + ("  (read right to left)" if self.reversed else ""),
        ]
        for name in [self.chain[0][0]] + [b for _, _, b in self.chain]:
            p = self.points[name]
            lines.append(f"  {name:8s} ({p[0]:.12f}, {p[1]:.12f})  s={self.keys[name]:+.12e}")
        if self.ties:
            lines.append("tangent comparisons: " + ", ".join(f"{a} {r} {b}" for a, r, b in self.ties))
        lines.append("rectangles: " + ", ".join(f"{r.name}[{r.tag}]" for r in self.rectangles))
        return "\n".join(lines)


# -- chain checks ------------------------------------------------------------


def _check_chain(chain, keys, sign):
    ties = []
    for a, rel, b in chain:
        diff = sign * (keys[b] - keys[a])
        if rel == "<" and not diff > 0:
            return None, f"{a} ◁ {b} fails (gap {diff:.3e})"
        if rel == "<=":
            if diff < -TIE_SLACK:
                return None, f"{a} ⊴ {b} fails (gap {diff:.3e})"
            if diff <= TIE_SLACK:
                ties.append((a, rel, b))
        if rel == "<" and diff <= TIE_SLACK:
            ties.append((a, rel, b))
    return tuple(ties), None


def _switch_roles(sa: models.SystemSpec, sb: models.SystemSpec) -> bool:
    """True when ``sb`` must play system (1).  Raises for unsupported switches."""
    pa, pb = sa.params, sb.params
    shared = ("alpha", "beta", "gamma", "delta")
    if any(getattr(pa, f) != getattr(pb, f) for f in shared):
        raise LinkModeError("one-center linkage needs identical alpha, beta, gamma, delta")
    r_diff = (pa.r_x, pa.r_y) != (pb.r_x, pb.r_y)
    k_diff = (pa.K_x, pa.K_y) != (pb.K_x, pb.K_y)
    if r_diff and k_diff:
        raise LinkModeError("switching both growth rates and carrying capacities is not supported")
    if not (r_diff or k_diff):
        raise LinkModeError("the two systems coincide")
    fx, fy = ("r_x", "r_y") if r_diff else ("K_x", "K_y")
    ax, ay, bx, by = getattr(pa, fx), getattr(pa, fy), getattr(pb, fx), getattr(pb, fy)
    if ax > bx and ay < by:
        return False
    if ax < bx and ay > by:
        return True
    raise LinkModeError(
        f"unsupported switch: need {fx} and {fy} to move in opposite directions"
    )


# -- rectangles --------------------------------------------------------------


def _curve_crossings(sys_a, ea, sys_b, eb, n=CROSSING_SAMPLES):
    poly = orbitlib.orbit_samples(sys_a, ea, n)
    g = safe_energy(sys_b, poly) - eb
    g = np.where(np.isfinite(g), g, 1.0)
    idx = np.flatnonzero(np.sign(g[:-1]) != np.sign(g[1:]))
    if idx.size == 0:
        return np.empty((0, 2))
    ga, gb = g[idx], g[idx + 1]
    w = np.where(ga != gb, ga / (ga - gb), 0.5)
    w = np.clip(w, 0.0, 1.0)
    seed = poly[idx] + w[:, None] * (poly[idx + 1] - poly[idx])
    target = np.tile([ea, eb], (len(seed), 1))
    pts, ok = _newton(sys_a, sys_b, target, seed)
    pts = pts[ok]
    uniq = []
    for p in pts:
        if all(np.hypot(*(p - q)) > 1e-9 for q in uniq):
            uniq.append(p)
    return np.array(uniq).reshape(-1, 2)


def _build_rectangles(kind, line, ann_a: Annulus, ann_b: Annulus):
    tags = ("d", "u") if kind is LinkKind.TWO_CENTERS else ("R1", "R2", "R3", "R4")
    names = {"d": "A", "u": "B"} if kind is LinkKind.TWO_CENTERS else {t: t for t in tags}
    verts = {t: [[None, None], [None, None]] for t in tags}
    ea, eb = (ann_a.e1, ann_a.e2), (ann_b.e1, ann_b.e2)
    for i, e in enumerate(ea):
        for j, h in enumerate(eb):
            pts = _curve_crossings(ann_a.sys, e, ann_b.sys, h)
            labels = _tag_of(kind, line, pts) if len(pts) else np.array([])
            for t in tags:
                here = pts[labels == t]
                if len(here) != 1:
                    raise NotLinkedError(
                        f"level curves H_a={e} and H_b={h} cross {len(here)} times in region {t}",
                        witness=f"crossings({e}, {h}, {t}) = {len(here)}",
                    )
                verts[t][i][j] = tuple(float(v) for v in here[0])
    rects = []
    for t in tags:
        V = np.array(verts[t])
        flat = V.reshape(4, 2)
        dist = min(np.hypot(*(flat[p] - flat[q])) for p in range(4) for q in range(p + 1, 4))
        if dist < MIN_WIDTH:
            raise DegeneracyError(
                f"rectangle {names[t]} has width {dist:.3e} < {MIN_WIDTH:g}; "
                f"levels e=({ea[0]}, {ea[1]}), h=({eb[0]}, {eb[1]}) are nearly tangent"
            )
        rect = OrientedRectangle(
            names[t], t, ann_a.sys, ann_b.sys, ea, eb,
            tuple(tuple(tuple(v) for v in row) for row in V), line, kind,
        )
        boundary = np.vstack([pts[:-1] for _, _, pts in rect.sides()])
        boundary = np.vstack([boundary, boundary[:1]])
        rects.append(dataclasses.replace(rect, polygon=tuple(map(tuple, boundary))))
    shapes = [r.shape() for r in rects]
    for p in range(len(rects)):
        if not shapes[p].is_valid:
            raise DegeneracyError(f"rectangle {rects[p].name} boundary self-intersects")
        for q in range(p + 1, len(rects)):
            if shapes[p].intersects(shapes[q]):
                raise DegeneracyError(f"rectangles {rects[p].name} and {rects[q].name} overlap")
    return tuple(rects)


def link_check(ann_a: Annulus, ann_b: Annulus) -> LinkCertificate:
    """Certify that two annuli are linked and build their intersection rectangles.

    Raises
    ------
    LinkModeError
        If the pair does not fit either geometry (for example identical
        centers for the game models).
    NotLinkedError
        If the ordering chain fails or the level curves do not cross as
        required; ``witness`` names the failing comparison.
    DegeneracyError
        If a rectangle is numerically degenerate.
    """
    sa, sb = ann_a.sys, ann_b.sys
    if sa.variant is not sb.variant:
        raise LinkModeError(f"cannot link a {sa.variant.value} annulus with a {sb.variant.value} one")
    ca, cb = models.center_array(sa), models.center_array(sb)
    gap = float(np.hypot(*(cb - ca)))
    swapped = False
    if sa.variant is models.Variant.BIO:
        kind = LinkKind.ONE_CENTER_FOUR
        if gap > 1e-12:
            raise LinkModeError("one-center linkage needs a shared center")
        if _switch_roles(sa, sb):
            ann_a, ann_b, sa, sb = ann_b, ann_a, sb, sa
            swapped = True
        line = orbitlib.default_line(sa)
        rev = False
        pts = {}
        for tag, ann in (("(1)", ann_a), ("(2)", ann_b)):
            for i, e in ((1, ann.e1), (2, ann.e2)):
                lo, hi = orbitlib.section_points(ann.sys, e, line)
                pts[f"S{tag}{i}-"], pts[f"S{tag}{i}+"] = lo, hi
        chain = (
            ("S(1)2-", "<", "S(1)1-"), ("S(1)1-", "<=", "S(2)2-"), ("S(2)2-", "<", "S(2)1-"),
            ("S(2)1-", "<", "S(2)1+"), ("S(2)1+", "<", "S(2)2+"), ("S(2)2+", "<=", "S(1)1+"),
            ("S(1)1+", "<", "S(1)2+"),
        )
    else:
        kind = LinkKind.TWO_CENTERS
        if gap <= 1e-12:
            raise LinkModeError("two-center linkage needs distinct centers")
        ordering = orbitlib.default_line(sa).ordering
        up = models.rotation_direction(sa).sign
        line = SectionLine(tuple(ca), tuple(cb - ca), ordering, up)
        rev = bool(line.order_key(cb) < line.order_key(ca))
        pts = {}
        for tag, ann in (("S", ann_a), ("V", ann_b)):
            for i, e in ((1, ann.e1), (2, ann.e2)):
                lo, hi = orbitlib.section_points(ann.sys, e, line)
                pts[f"{tag}{i}-"], pts[f"{tag}{i}+"] = lo, hi
        chain = (
            ("S2-", "<", "S1-"), ("S1-", "<=", "V2-"), ("V2-", "<", "V1-"), ("V1-", "<=", "S1+"),
            ("S1+", "<", "S2+"), ("S2+", "<=", "V1+"), ("V1+", "<", "V2+"),
        )
    keys = {k: float(line.param(p)) for k, p in pts.items()}
    ties, failure = _check_chain(chain, keys, 1.0)
    if failure is not None:
        raise NotLinkedError(f"annuli are not linked: {failure}", witness=failure)
    rects = _build_rectangles(kind, line, ann_a, ann_b)
    return LinkCertificate(
        kind, ann_a, ann_b, line,
        {k: tuple(float(v) for v in p) for k, p in pts.items()}, keys, chain, ties, rev, swapped, rects,
    )


def intersection_rectangles(cert: LinkCertificate) -> list:
    """The oriented rectangles of a certificate: 2 or 4, pairwise disjoint.

    Rectangles come oriented by the first system's levels.
    """
    want = 2 if cert.kind is LinkKind.TWO_CENTERS else 4
    if len(cert.rectangles) != want:
        raise DegeneracyError(f"expected {want} rectangles, certificate holds {len(cert.rectangles)}")
    return list(cert.rectangles)
