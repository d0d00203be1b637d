"""Switching schedules, Poincare maps, thresholds and stretching certificates.

The switched system follows ``sys1`` for a time ``T1`` and then ``sys2`` for
``T2``, repeated with period ``T = T1 + T2``.  During each phase the level
curves of the active system are invariant, so a path crossing a rectangle
from its inner to its outer level is wound into a spiral: inner points turn
faster than outer ones.  Stretching is certified by measuring the angular
span of the image path and locating its complete crossings of the target
rectangle.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import integrate, models, orbitlib
from .annuli import LinkCertificate, LinkKind, OrientedRectangle, safe_energy
from .errors import (
    DepthExceededError,
    DomainError,
    IntegrationError,
    MonotonicityError,
    PreconditionError,
    ResolutionError,
    ScheduleError,
)
from .integrate import DEFAULT_CONFIG, IntegratorConfig

__all__ = [
    "SwitchSchedule",
    "ThresholdReport",
    "StretchCertificate",
    "Perturbation",
    "ItineraryResult",
    "THEOREM_CONSTANTS",
    "SHADOW_CONFIG",
    "thresholds",
    "schedule_thresholds",
    "poincare",
    "iterate",
    "required_pairs",
    "verify_stretch",
    "verify_all",
    "perturb_and_recheck",
    "itinerary_demo",
]

#: (phase 1, phase 2) constants of the threshold formula
THEOREM_CONSTANTS = {
    models.Variant.NEG_MED: (11, 9),
    models.Variant.POS_MED: (11, 9),
    models.Variant.BIO: (9, 7),
}
#: (span in units of pi, minimum crossings) demanded of phases 1 and 2
PHASE_CRITERIA = {1: ("C_F", 5, 2), 2: ("C_G", 3, 1)}
SIDE_TOL = 1e-8
MIN_PATH = 256
#: tolerances for itinerary shadowing: nested intervals get far narrower than
#: the default integration error once several phases have stretched them
SHADOW_CONFIG = IntegratorConfig(rel_tol=1e-13, abs_tol=1e-15)


# -- schedules ---------------------------------------------------------------


def _close(a, b) -> bool:
    if isinstance(a, (int, Fraction)) and isinstance(b, (int, Fraction)):
        return a == b
    return abs(float(a) - float(b)) <= 1e-12 * max(1.0, abs(float(a)), abs(float(b)))


@dataclass(frozen=True)
class SwitchSchedule:
    """Piecewise-constant T-periodic alternation between two systems.

    Zero durations are accepted (the phase map is then the identity) as long
    as the total period is positive.
    """

    sys1: models.SystemSpec
    sys2: models.SystemSpec
    T1: float
    T2: float

    def __post_init__(self):
        s1, s2 = self.sys1, self.sys2
        if s1.variant is not s2.variant:
            raise ScheduleError("both phases must use the same model variant")
        if not (self.T1 >= 0 and self.T2 >= 0 and self.T1 + self.T2 > 0):
            raise ScheduleError("durations must be non-negative with a positive total")
        p1, p2 = s1.params, s2.params
        if p1 == p2:
            raise ScheduleError("the two phases are identical")
        v = s1.variant
        if v is models.Variant.NEG_MED:
            if not _close(p1.zeta, p2.zeta):
                raise ScheduleError("seasonal q_ND leaves zeta unchanged; phases disagree on zeta")
            if not _close(p1.kappa - p1.theta, p2.kappa - p2.theta):
                raise ScheduleError("seasonal q_ND leaves kappa - theta unchanged; phases disagree")
        elif v is models.Variant.POS_MED:
            for f in ("lam", "mu", "nu"):
                if not _close(getattr(p1, f), getattr(p2, f)):
                    raise ScheduleError(f"seasonal p leaves {f} unchanged; phases disagree on {f}")
        else:
            for f in ("alpha", "beta", "gamma", "delta"):
                if not _close(getattr(p1, f), getattr(p2, f)):
                    raise ScheduleError(f"phases disagree on {f}")
            r_diff = (p1.r_x, p1.r_y) != (p2.r_x, p2.r_y)
            k_diff = (p1.K_x, p1.K_y) != (p2.K_x, p2.K_y)
            if r_diff and k_diff:
                raise ScheduleError("switch either growth rates or carrying capacities, not both")

    @property
    def T(self) -> float:
        return float(self.T1) + float(self.T2)

    @property
    def variant(self) -> models.Variant:
        return self.sys1.variant

    def system(self, phase: int) -> models.SystemSpec:
        return self.sys1 if phase == 1 else self.sys2

    def duration(self, phase: int) -> float:
        return float(self.T1 if phase == 1 else self.T2)

    def start(self, phase: int) -> float:
        return 0.0 if phase == 1 else float(self.T1)

    def switched(self) -> tuple:
        """Names of the canonical coefficients that differ between the phases."""
        c1 = models.coefficients(self.sys1.params)
        c2 = models.coefficients(self.sys2.params)
        return tuple(k for k in c1 if c1[k] != c2[k])

    def with_durations(self, T1: float, T2: float) -> "SwitchSchedule":
        return SwitchSchedule(self.sys1, self.sys2, T1, T2)


# -- thresholds --------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdReport:
    c1: int
    c2: int
    T1_min: float
    T2_min: float
    taus: tuple

    def satisfied_by(self, T1: float, T2: float) -> bool:
        return T1 > self.T1_min and T2 > self.T2_min


def _t_min(c, ta, tb):
    if not tb > ta:
        raise MonotonicityError(f"periods must increase across the annulus, got {ta} >= {tb}")
    return c * ta * tb / (2 * (tb - ta))


def thresholds(tau1a, tau1b, tau2a, tau2b, variant) -> ThresholdReport:
    """Minimal phase durations c * ta * tb / (2 (tb - ta)) for both phases."""
    variant = models.Variant(variant)
    c1, c2 = THEOREM_CONSTANTS[variant]
    return ThresholdReport(
        c1, c2, _t_min(c1, tau1a, tau1b), _t_min(c2, tau2a, tau2b), (tau1a, tau1b, tau2a, tau2b)
    )


def schedule_thresholds(
    sched: SwitchSchedule, cert: LinkCertificate, cfg: IntegratorConfig = DEFAULT_CONFIG
) -> ThresholdReport:
    """Thresholds from periods computed on the certificate's annuli."""
    taus = []
    for phase in (1, 2):
        ann = _annulus_of(cert, sched.system(phase))
        taus += [orbitlib.period(ann.sys, ann.e1, cfg=cfg), orbitlib.period(ann.sys, ann.e2, cfg=cfg)]
    return thresholds(*taus, sched.variant)


def _annulus_of(cert: LinkCertificate, sys):
    for ann in (cert.first, cert.second):
        if ann.sys == sys:
            return ann
    raise ScheduleError("schedule and certificate refer to different systems")


# -- time-dependent coefficients ---------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """Periodic perturbation of the switched coefficients with small L1 size.

    ``shape`` is ``"square"`` (piecewise-constant jitter) or ``"bump"``
    (a smooth sine).  The amplitude is chosen so that each coefficient moves
    by ``eps / 2`` in L1 norm over one period: strictly inside the budget.
    """

    eps: float
    shape: str = "square"
    cycles: int = 16

    def __post_init__(self):
        if self.shape not in ("square", "bump"):
            raise ValueError("shape must be 'square' or 'bump'")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        if self.cycles < 1:
            raise ValueError("cycles must be positive")

    def amplitude(self, T: float) -> float:
        if self.shape == "square":
            return self.eps / (2 * T)
        return self.eps * math.pi / (4 * T)

    def l1_distance(self, T: float) -> float:
        a = self.amplitude(T)
        return a * T if self.shape == "square" else a * 2 * T / math.pi

    def describe(self) -> str:
        return f"{self.shape} eps={self.eps:.6g} cycles={self.cycles}"


class _Dynamics:
    """Right-hand sides of the switched system, possibly perturbed."""

    def __init__(self, sched: SwitchSchedule, pert: Optional[Perturbation] = None):
        self.sched = sched
        self.pert = pert if pert is not None and pert.eps > 0 else None
        self.variant = sched.variant
        self.coef = {1: models.coefficients(sched.sys1.params), 2: models.coefficients(sched.sys2.params)}
        self.names = sched.switched()
        if self.pert is not None:
            self.amp = self.pert.amplitude(sched.T)
            for phase in (1, 2):
                for s in (-1.0, 1.0):
                    self._params(phase, s)  # raises RegimeError at the extremes

    def _shifted(self, phase, s):
        c = dict(self.coef[phase])
        for n in self.names:
            c[n] = c[n] + s * self.amp
        return c

    def _params(self, phase, s):
        cls = type(self.sched.system(phase).params)
        return cls(**self._shifted(phase, s))

    def _kernel_fixed(self, phase, s):
        if self.pert is None or s == 0:
            return models.kernel(self.sched.system(phase))
        return models.kernel_values(self.variant, **self._shifted(phase, s))

    def pieces(self, phase: int, t0: float, t1: float):
        """Yield (ta, tb, rhs, domain) covering [t0, t1] in global time."""
        if self.pert is None:
            k = self._kernel_fixed(phase, 0)
            yield t0, t1, (lambda t, y: models._field(k, y)), (k.U, k.V)
            return
        T = self.sched.T
        w = 2 * math.pi * self.pert.cycles / T
        if self.pert.shape == "square":
            half = T / (2 * self.pert.cycles)
            j = math.floor(t0 / half + 1e-12)
            ta = t0
            while ta < t1:
                tb = min(t1, (j + 1) * half)
                if tb - ta > 1e-12 * max(1.0, T):
                    s = 1.0 if j % 2 == 0 else -1.0
                    k = self._kernel_fixed(phase, s)
                    yield ta, tb, (lambda t, y, k=k: models._field(k, y)), (k.U, k.V)
                ta = tb
                j += 1
            return
        base = self.coef[phase]
        names = self.names
        amp = self.amp
        variant = self.variant
        lo = models.kernel_values(variant, **self._shifted(phase, -1.0))
        hi = models.kernel_values(variant, **self._shifted(phase, 1.0))
        domain = (min(lo.U, hi.U), min(lo.V, hi.V))

        def rhs(t, y):
            c = dict(base)
            bump = amp * np.sin(w * t)
            for n in names:
                c[n] = base[n] + bump
            return models._field(models.kernel_values(variant, **c), y)

        yield t0, t1, rhs, domain


def _run_phases(dyn: _Dynamics, X, phases, cfg, track_ref=None):
    """Propagate ``X`` through consecutive phases.

    Returns the final states, the states at the start of the last phase and,
    if ``track_ref`` is given, the lifted angle swept during the last phase.
    """
    X = np.array(X, dtype=float).reshape(-1, 2)
    sched = dyn.sched
    t = 0.0
    start_last = X
    tracker = None
    for j, phase in enumerate(phases):
        if j == 0:
            t = sched.start(phase)
        last = j == len(phases) - 1
        if last:
            start_last = X.copy()
            if track_ref is not None:
                tracker = integrate.AngleTracker(track_ref, len(X))
        U, V = sched.system(phase).domain
        inside = (X[:, 0] > 0) & (X[:, 0] < U) & (X[:, 1] > 0) & (X[:, 1] < V)
        if not np.all(inside):
            raise DomainError(f"phase {phase} starts outside its domain (0,{U})x(0,{V})")
        t_end = t + sched.duration(phase)
        if dyn.pert is None:
            # autonomous phase: reduce the duration modulo each orbit's period
            X, sw = integrate.advance(
                sched.system(phase), X, sched.duration(phase), cfg, track_ref if last else None
            )
            if last and track_ref is not None:
                tracker.total += sw
        else:
            for ta, tb, rhs, domain in dyn.pieces(phase, t, t_end):
                _, X = integrate.solve(rhs, X, ta, tb, cfg, tracker if last else None, domain)
        t = t_end % sched.T if sched.T > 0 else t_end
        if math.isclose(t, sched.T):
            t = 0.0
    swept = tracker.total.copy() if tracker is not None else None
    return X, start_last, swept


def _phase_sequence(first: int, n: int):
    return [1 + (first - 1 + j) % 2 for j in range(n)]


def poincare(
    sched: SwitchSchedule, x0, cfg: IntegratorConfig = DEFAULT_CONFIG, pert: Optional[Perturbation] = None
) -> np.ndarray:
    """Image of ``x0`` after one full switching period."""
    x0 = np.asarray(x0, dtype=float)
    models._check_interior(sched.sys1, x0)
    y, _, _ = _run_phases(_Dynamics(sched, pert), x0, [1, 2], cfg)
    return y.reshape(x0.shape)


def iterate(sched: SwitchSchedule, x0, n: int, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Orbit x0, Psi(x0), ..., Psi^n(x0) of the Poincare map; shape (n + 1, 2)."""
    out = [np.asarray(x0, dtype=float)]
    for _ in range(n):
        out.append(poincare(sched, out[-1], cfg))
    return np.array(out)


# -- path images -------------------------------------------------------------


class _PathMap:
    """lambda -> image of gamma(lambda) after a fixed run of phases.

    gamma crosses ``source`` at mid height of its curvilinear chart, from the
    left side (lambda = 0) to the right side (lambda = 1).  The lifted polar
    angle of the image about the center of the last phase's system is
    tracked through that phase; its branch at the phase start is fixed by
    ``ref_rect``, the rectangle holding the phase-start points.
    """

    def __init__(self, dyn, source, phases, cfg, ref_rect):
        self.dyn = dyn
        self.source = source
        self.phases = phases
        self.cfg = cfg
        last_sys = dyn.sched.system(phases[-1])
        self.center = models.center_array(last_sys)
        self.sign = models.rotation_direction(last_sys).sign
        self.frame = source.line.frame()
        mid = ref_rect.chart(0.5, 0.5)
        self.theta_ref = self._angle(mid[None])[0]
        self.calls = 0
        self.points = 0

    def _angle(self, pts):
        rel = (pts - self.center) @ self.frame.T
        return np.arctan2(rel[:, 1], rel[:, 0])

    def start(self, lam):
        return self.source.chart(np.asarray(lam, dtype=float), np.full(np.shape(lam), 0.5))

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        X0 = self.start(lam)
        self.calls += 1
        self.points += len(lam)
        Y, S, swept = _run_phases(self.dyn, X0, self.phases, self.cfg, track_ref=self.center)
        th0 = self._angle(S)
        th0 = self.theta_ref + np.angle(np.exp(1j * (th0 - self.theta_ref)))
        return Y, th0 + swept


@dataclass
class _Samples:
    lam: np.ndarray
    Y: np.ndarray
    theta: np.ndarray

    def insert(self, lam, Y, theta):
        lam = np.concatenate([self.lam, lam])
        order = np.argsort(lam, kind="stable")
        self.lam = lam[order]
        self.Y = np.concatenate([self.Y, Y])[order]
        self.theta = np.concatenate([self.theta, theta])[order]


def _sample_path(pmap, lo, hi, n, target, max_samples, max_dtheta=math.pi / 8):
    """Adaptive samples of the image path resolving angle and level oscillations."""
    lam = np.linspace(lo, hi, n)
    Y, th = pmap(lam)
    smp = _Samples(lam, Y, th)
    o_lo, o_hi = target.side_levels
    gscale = (o_hi - o_lo) / 4
    for _ in range(60):
        g = safe_energy(target.orient_sys, smp.Y)
        fin = np.isfinite(g)
        dth = np.abs(np.diff(smp.theta))
        dg = np.where(fin[:-1] & fin[1:], np.abs(np.diff(np.where(fin, g, 0.0))), 0.0)
        mixed = fin[:-1] != fin[1:]
        dl = np.diff(smp.lam)
        split = ((dth > max_dtheta) | (dg > gscale) | mixed) & (dl > 1e-15 * max(1.0, abs(hi)))
        if not np.any(split):
            return smp
        if len(smp.lam) + np.count_nonzero(split) > max_samples:
            raise ResolutionError(
                f"image path needs more than {max_samples} samples; raise n_path or shorten the phase"
            )
        mids = 0.5 * (smp.lam[:-1][split] + smp.lam[1:][split])
        Yn, thn = pmap(mids)
        smp.insert(mids, Yn, thn)
    raise ResolutionError("adaptive sampling of the image path did not settle")


def _classify(target, y):
    """Why a point is outside ``target``: 'l'/'r' past the left/right level, else 'x'."""
    g = safe_energy(target.orient_sys, y)
    lo, hi = target.side_levels
    return np.where(g < lo, "l", np.where(g > hi, "r", "x"))


_PROBES = np.array([-0.1, -1e-2, -1e-3, -1e-4, 0.0, 1e-4, 1e-3, 1e-2, 0.1])


def _refine_ends(pmap, target, brackets, rounds=40, accept_unresolved=False):
    """Shrink (inside, outside) brackets toward the exit point of a run.

    Returns, per bracket, the final inside parameter, its image and the side
    ('l', 'r' or 'x') through which the image leaves the target.  With
    ``accept_unresolved`` an exit bracketed to floating-point resolution in
    the parameter counts even if the image jumps by more than the side
    tolerance across it.
    """
    lo_lvl, hi_lvl = target.side_levels
    b_in = np.array([b[0] for b in brackets], dtype=float)
    b_out = np.array([b[1] for b in brackets], dtype=float)
    y_in = np.array([b[2] for b in brackets], dtype=float).reshape(-1, 2)
    y_out = np.array([b[3] for b in brackets], dtype=float).reshape(-1, 2)
    active = np.ones(len(b_in), dtype=bool)
    for _ in range(rounds):
        side = _classify(target, y_out)
        g_in = safe_energy(target.orient_sys, y_in)
        level = np.where(side == "l", lo_lvl, hi_lvl)
        close = (side != "x") & (np.abs(g_in - level) <= SIDE_TOL)
        tiny = np.abs(b_out - b_in) <= 1e-15 * np.maximum(1.0, np.abs(b_in))
        active = ~(close | tiny)
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        # cluster probes around the secant estimate of the level crossing
        g_out = safe_energy(target.orient_sys, y_out[idx])
        gi = g_in[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            p = (level[idx] - gi) / (g_out - gi)
        p = np.where((side[idx] == "x") | ~np.isfinite(p), 0.5, np.clip(p, 0.02, 0.98))
        w = np.clip(p[:, None] + _PROBES[None, :], 1e-6, 1 - 1e-6)
        lam = (b_in[idx, None] + w * (b_out[idx] - b_in[idx])[:, None]).ravel()
        m = w.shape[1]
        Y, _ = pmap(lam)
        Y = Y.reshape(idx.size, m, 2)
        inside = target.contains(Y.reshape(-1, 2)).reshape(idx.size, m)
        for r, k in enumerate(idx):
            # first outside point walking from the inside end
            outs = np.flatnonzero(~inside[r])
            if outs.size == 0:
                b_in[k], y_in[k] = lam.reshape(idx.size, m)[r, -1], Y[r, -1]
                continue
            j = outs[0]
            b_out[k], y_out[k] = lam.reshape(idx.size, m)[r, j], Y[r, j]
            if j > 0:
                b_in[k], y_in[k] = lam.reshape(idx.size, m)[r, j - 1], Y[r, j - 1]
    side = _classify(target, y_out)
    g_in = safe_energy(target.orient_sys, y_in)
    level = np.where(side == "l", lo_lvl, hi_lvl)
    ok = (side != "x") & (np.abs(g_in - level) <= SIDE_TOL)
    if accept_unresolved:
        tiny = np.abs(b_out - b_in) <= 1e-15 * np.maximum(1.0, np.abs(b_in))
        ok |= (side != "x") & tiny
    side = np.where(ok, side, "x")
    return b_in, y_in, side


def _crossings(pmap, smp: _Samples, target: OrientedRectangle, accept_unresolved=False):
    """Maximal parameter intervals whose image crosses ``target`` side to side."""
    inside = target.contains(smp.Y)
    n = len(inside)
    runs = []
    k = 0
    while k < n:
        if inside[k]:
            j = k
            while j + 1 < n and inside[j + 1]:
                j += 1
            runs.append((k, j))
            k = j + 1
        else:
            k += 1
    brackets, owners = [], []
    for r, (a, b) in enumerate(runs):
        if a > 0:
            brackets.append((smp.lam[a], smp.lam[a - 1], smp.Y[a], smp.Y[a - 1]))
            owners.append((r, 0))
        if b < n - 1:
            brackets.append((smp.lam[b], smp.lam[b + 1], smp.Y[b], smp.Y[b + 1]))
            owners.append((r, 1))
    ends = {}
    if brackets:
        b_in, _, side = _refine_ends(pmap, target, brackets, accept_unresolved=accept_unresolved)
        for (r, e), lam_e, s in zip(owners, b_in, side):
            ends[(r, e)] = (float(lam_e), str(s))
    out = []
    for r, (a, b) in enumerate(runs):
        left = ends.get((r, 0))
        right = ends.get((r, 1))
        if left is None or right is None:
            continue  # touches the path end: not a complete crossing
        if {left[1], right[1]} == {"l", "r"}:
            out.append((left[0], right[0]))
    return out


@dataclass(frozen=True)
class StretchCertificate:
    """Outcome of a stretching test for one phase between two rectangles.

    ``span`` is the signed angular difference (radians) between the images
    of the two path ends; ``crossings`` are the parameter intervals whose
    images cross the target from one side to the other.  Span and crossing
    criteria are reported separately; ``passed`` requires both.
    """

    condition: str
    phase: int
    source: str
    target: str
    duration: float
    span: float
    span_required: float
    crossings: tuple
    min_crossings: int
    n_samples: int
    trace: tuple = dataclasses.field(repr=False)
    perturbation: Optional[str] = None

    @property
    def n_crossings(self) -> int:
        return len(self.crossings)

    @property
    def span_ok(self) -> bool:
        return self.span > self.span_required

    @property
    def crossings_ok(self) -> bool:
        return self.n_crossings >= self.min_crossings

    @property
    def passed(self) -> bool:
        return self.span_ok and self.crossings_ok

    @property
    def witnesses(self) -> tuple:
        """Two disjoint crossing intervals (H0, H1) when available."""
        return tuple(self.crossings[:2])

    def summary(self) -> str:
        flag = "pass" if self.passed else "FAIL"
        return (
            f"{self.condition} phase {self.phase} {self.source} -> {self.target}: "
            f"span {self.span / math.pi:.3f} pi (need > {self.span_required / math.pi:.0f} pi), "
            f"crossings {self.n_crossings} (need >= {self.min_crossings}) [{flag}]"
        )


def _orient_for(rect: OrientedRectangle, sys) -> OrientedRectangle:
    if sys == rect.sys_a:
        return rect.oriented("a")
    if sys == rect.sys_b:
        return rect.oriented("b")
    raise ScheduleError("rectangle is not bounded by the schedule's systems")


def _phase_of(sched: SwitchSchedule, rect: OrientedRectangle) -> int:
    if rect.orient_sys == sched.sys1:
        return 1
    if rect.orient_sys == sched.sys2:
        return 2
    raise ScheduleError("source rectangle is not oriented by either phase system")


def _stretch_from(sched, source, targets, n_path, cfg, pert=None, max_samples=1 << 16):
    if n_path < MIN_PATH:
        raise ValueError(f"n_path must be at least {MIN_PATH}")
    phase = _phase_of(sched, source)
    other = sched.system(3 - phase)
    targets = [_orient_for(t, other) for t in targets]
    cond, span_pi, need = PHASE_CRITERIA[phase]
    dyn = _Dynamics(sched, pert)
    pmap = _PathMap(dyn, source, [phase], cfg, source)
    smp = _sample_path(pmap, 0.0, 1.0, n_path, targets[0], max_samples)
    span = pmap.sign * float(smp.theta[0] - smp.theta[-1])
    certs = []
    for tgt in targets:
        found = _crossings(pmap, smp, tgt)
        inside = tgt.contains(smp.Y)
        trace = tuple(zip(map(float, smp.lam), map(float, smp.theta), map(bool, inside)))
        certs.append(
            StretchCertificate(
                cond, phase, source.label, tgt.label, sched.duration(phase), span,
                span_pi * math.pi, tuple(found), need, len(smp.lam), trace,
                None if dyn.pert is None else dyn.pert.describe(),
            )
        )
    return certs


def verify_stretch(
    sched: SwitchSchedule,
    cert: LinkCertificate,
    rect_from: OrientedRectangle,
    rect_to: OrientedRectangle,
    n_path: int = MIN_PATH,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> StretchCertificate:
    """Test that the phase map of ``rect_from``'s system stretches it across ``rect_to``.

    The phase is the one whose system orients ``rect_from``; the target is
    re-oriented by the other system.  Phase 1 is held to the stronger
    criterion (span above 5 pi, two crossings), phase 2 to the weaker one
    (span above 3 pi, one crossing).

    Raises
    ------
    ResolutionError
        If the image path cannot be resolved within the sample budget.
    """
    _check_cert(sched, cert)
    return _stretch_from(sched, rect_from, [rect_to], n_path, cfg)[0]


def _check_cert(sched, cert):
    systems = {cert.first.sys, cert.second.sys}
    if systems != {sched.sys1, sched.sys2}:
        raise ScheduleError("certificate annuli do not belong to the schedule's systems")


def required_pairs(sched: SwitchSchedule, cert: LinkCertificate) -> list:
    """(phase, source name, target name) for every test the chaos statements use.

    Every ordered pair of distinct rectangles is tested in both phases; with
    two rectangles this is the pair of conditions for each of the two chaotic
    sets (the second one with the rectangles re-oriented).
    """
    names = cert.names
    return [(ph, a, b) for ph in (1, 2) for a in names for b in names if a != b]


def verify_all(
    sched: SwitchSchedule,
    cert: LinkCertificate,
    n_path: int = MIN_PATH,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    pert: Optional[Perturbation] = None,
    workers: int = 1,
) -> list:
    """Certificates for every required pair (see :func:`required_pairs`).

    Sources are processed by up to ``workers`` threads; the result does not
    depend on the number of workers.
    """
    _check_cert(sched, cert)
    pairs = required_pairs(sched, cert)
    jobs = []
    for phase in (1, 2):
        for src in cert.names:
            tgts = [cert.rectangle(b) for ph, a, b in pairs if ph == phase and a == src]
            jobs.append((_orient_for(cert.rectangle(src), sched.system(phase)), tgts))

    def run(job):
        return _stretch_from(sched, job[0], job[1], n_path, cfg, pert)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    return [c for r in results for c in r]


def perturb_and_recheck(
    sched: SwitchSchedule,
    cert: LinkCertificate,
    rect_from: OrientedRectangle,
    rect_to: OrientedRectangle,
    eps: float,
    shape: str = "square",
    n_path: int = MIN_PATH,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> StretchCertificate:
    """Re-run :func:`verify_stretch` with the switched coefficients perturbed.

    Each switched coefficient gets a periodic perturbation of L1 size
    ``eps / 2`` over one period.  ``eps = 0`` returns exactly the unperturbed
    certificate.

    Raises
    ------
    RegimeError
        If the perturbed coefficients leave the center regime.
    """
    pert = Perturbation(eps, shape)
    if eps == 0:
        return verify_stretch(sched, cert, rect_from, rect_to, n_path, cfg)
    _check_cert(sched, cert)
    return _stretch_from(sched, rect_from, [rect_to], n_path, cfg, pert)[0]


# -- itineraries -------------------------------------------------------------


@dataclass(frozen=True)
class ItineraryResult:
    """A starting point realizing a symbol sequence, with its verified iterates."""

    symbols: tuple
    x0: tuple
    iterates: tuple
    via: tuple
    interval: tuple
    verified: bool


def itinerary_demo(
    sched: SwitchSchedule,
    cert: LinkCertificate,
    symbols: Sequence[str],
    n_path: int = MIN_PATH,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    shadow_cfg: IntegratorConfig = SHADOW_CONFIG,
) -> ItineraryResult:
    """Find x0 whose Poincare iterates visit the rectangles named by ``symbols``.

    A path across the first rectangle is cut down step by step to nested
    sub-paths whose images cross the next rectangle in the sequence; the
    final point is then re-verified by direct integration of both phases
    (no period reduction) with both level sandwiches widened by 1e-8.

    ``cfg`` drives the stretching preconditions; the nested refinement and
    the final check use the tighter ``shadow_cfg``.

    Raises
    ------
    PreconditionError
        If some consecutive pair is not linked by a passing stretching test.
    DepthExceededError
        If the nested intervals shrink below 1e-14 or lose their crossings.
    """
    symbols = tuple(symbols)
    if not 1 <= len(symbols) <= 6:
        raise ValueError("itinerary depth must be between 1 and 6")
    _check_cert(sched, cert)
    rects = {n: cert.rectangle(n) for n in cert.names}
    for s in symbols:
        if s not in rects:
            raise ValueError(f"unknown rectangle {s!r}")
    r1 = {n: _orient_for(r, sched.sys1) for n, r in rects.items()}
    r2 = {n: _orient_for(r, sched.sys2) for n, r in rects.items()}

    cache = {}

    def passing(phase, a, b):
        key = (phase, a)
        if key not in cache:
            src = (r1 if phase == 1 else r2)[a]
            certs = _stretch_from(sched, src, [rects[n] for n in cert.names], n_path, cfg)
            cache[key] = {c.target.split("@")[0]: c.passed for c in certs}
        return cache[key][b]

    via = []
    for x, y in zip(symbols, symbols[1:]):
        for z in cert.names:
            if passing(1, x, z) and passing(2, z, y):
                via.append(z)
                break
        else:
            raise PreconditionError(f"no rectangle Z with {x}@1 -> Z@2 and Z@2 -> {y}@1 passing")

    dyn = _Dynamics(sched)
    cfg = shadow_cfg
    source = r1[symbols[0]]
    lo, hi = 0.0, 1.0
    n_phases = 0
    steps = []
    for k, z in enumerate(via):
        steps += [(z, r2[z], r1[symbols[k]]), (symbols[k + 1], r1[symbols[k + 1]], r2[z])]
    for name, target, ref in steps:
        n_phases += 1
        phases = _phase_sequence(1, n_phases)
        pmap = _PathMap(dyn, source, phases, cfg, ref)
        smp = _sample_path(pmap, lo, hi, 64, target, 1 << 16)
        found = _crossings(pmap, smp, target, accept_unresolved=True)
        if not found:
            raise DepthExceededError(f"no crossing of {name} after {n_phases} phases")
        widths = [b - a for a, b in found]
        a, b = found[int(np.argmax(widths))]
        if b - a < 1e-14:
            raise DepthExceededError(f"nested interval width {b - a:.2e} below 1e-14")
        lo, hi = a, b
    lam = 0.5 * (lo + hi)
    x0 = source.chart(np.array([lam]), np.array([0.5]))[0]
    orbit = [x0]
    for _ in range(len(symbols) - 1):
        y = orbit[-1]
        for phase in (1, 2):
            y = integrate.flow_points(sched.system(phase), y, sched.duration(phase), cfg)
        orbit.append(y)
    ok = all(bool(rects[s].contains(p, tol=SIDE_TOL)) for s, p in zip(symbols, orbit))
    return ItineraryResult(
        symbols, tuple(map(float, x0)), tuple(tuple(map(float, p)) for p in orbit),
        tuple(via), (lo, hi), ok,
    )
