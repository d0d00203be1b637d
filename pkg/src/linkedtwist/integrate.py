"""Adaptive Dormand-Prince 5(4) integration with dense output and line crossings.

The solver advances a *batch* of planar states at once, but every member keeps
its own step size and error history.  A member's trajectory is therefore the
same whether it is integrated alone or together with thousands of others,
which matters when tiny differences get amplified by chaotic maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import models
from .errors import CrossingTimeout, IntegrationError

__all__ = [
    "IntegratorConfig",
    "DEFAULT_CONFIG",
    "Trajectory",
    "StepBatch",
    "OrientedLine",
    "solve",
    "flow",
    "flow_points",
    "first_crossing",
    "AngleTracker",
    "dense_eval",
    "advance",
]


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step limits.

    ``dense_resolution`` is the number of interpolated samples per unit time
    added to recorded trajectories (0 records accepted steps only).
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    dense_resolution: float = 0.0

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not (0 < v <= 1e-2):
                raise ValueError(f"{name}={v} outside (0, 1e-2]")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.dense_resolution < 0:
            raise ValueError("dense_resolution must be >= 0")

    def with_rel_tol(self, rel_tol: float) -> "IntegratorConfig":
        return IntegratorConfig(rel_tol, min(self.abs_tol, rel_tol), self.max_step, self.dense_resolution)


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    energy_drift: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


class OrientedLine(NamedTuple):
    """A line through ``base`` along unit vector ``direction``."""

    base: np.ndarray
    direction: np.ndarray

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        # positive on the left of the direction
        d = self.direction
        rel = np.asarray(x) - self.base
        return d[0] * rel[..., 1] - d[1] * rel[..., 0]


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension of order 4 (Shampine); rows are stages, columns theta^1..theta^4
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFE = 0.9
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0


class StepBatch(NamedTuple):
    """Accepted steps handed to an observer (arrays over the stepping members)."""

    idx: np.ndarray
    t_old: np.ndarray
    y_old: np.ndarray
    t_new: np.ndarray
    y_new: np.ndarray
    h: np.ndarray
    K: np.ndarray  # (7, m, 2) stage derivatives


def dense_eval(step: StepBatch, theta) -> np.ndarray:
    """Interpolated states at fractions ``theta`` (scalar or (m,)) of each step."""
    theta = np.broadcast_to(np.asarray(theta, dtype=float), step.h.shape)
    powers = np.stack([theta, theta**2, theta**3, theta**4], axis=0)  # (4, m)
    coef = _P @ powers  # (7, m)
    incr = np.einsum("sm,smk->mk", coef, step.K)
    return step.y_old + step.h[:, None] * incr


def _rms(x):
    return np.sqrt(np.mean(x * x, axis=-1))


def _initial_step(rhs, t, y, f, cfg):
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y)
    d0 = _rms(y / scale)
    d1 = _rms(f / scale)
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    y1 = y + h0[:, None] * f
    f1 = rhs(t + h0, y1)
    d2 = _rms((f1 - f) / scale) / h0
    m = np.maximum(d1, d2)
    h1 = np.where(m <= 1e-15, np.maximum(1e-6, h0 * 1e-3), (0.01 / np.maximum(m, 1e-300)) ** 0.2)
    return np.minimum(np.minimum(100 * h0, h1), cfg.max_step)


def _inside(y, domain):
    if domain is None:
        return np.all(np.isfinite(y), axis=-1)
    U, V = domain
    return (y[:, 0] > 0) & (y[:, 0] < U) & (y[:, 1] > 0) & (y[:, 1] < V)


Observer = Callable[[StepBatch], Optional[np.ndarray]]


def solve(
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray],
    y0,
    t0: float,
    t1,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    observer: Optional[Observer] = None,
    domain: Optional[tuple[float, float]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``y' = rhs(t, y)`` for a batch of states from ``t0`` to ``t1``.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y)`` with ``t`` of shape (m,) and ``y`` of shape (m, 2).
    y0 : array_like, shape (n, 2) or (2,)
    t1 : float or array_like, shape (n,)
        Final time, shared or per member.
    observer : callable, optional
        Called with a :class:`StepBatch` after every accepted step.  It may
        return a boolean mask (over the batch members in the call) of members
        to stop at their new time.
    domain : (U, V), optional
        Steps that leave the open rectangle (0, U) x (0, V) are rejected.

    Returns
    -------
    t, y : ndarray
        Final time (n,) and state (n, 2) of every member.
    """
    y = np.array(y0, dtype=float).reshape(-1, 2)
    n = len(y)
    t = np.full(n, float(t0))
    t_end = np.broadcast_to(np.asarray(t1, dtype=float), (n,)).copy()
    if np.any(t_end < t0):
        raise ValueError("backward integration is not supported")
    active = t_end > t0
    if not np.any(active):
        return t, y
    f = np.zeros_like(y)
    h = np.zeros(n)
    first = np.flatnonzero(active)
    f[first] = rhs(t[first], y[first])
    h[first] = _initial_step(rhs, t[first], y[first], f[first], cfg)
    err_old = np.full(n, 1e-4)
    rejected = np.zeros(n, dtype=bool)
    K = np.empty((7, n, 2))
    eps16 = 16 * np.finfo(float).eps
    stages = [[(j, a) for j, a in enumerate(row) if a != 0.0] for row in _A]
    b_w = [(j, b) for j, b in enumerate(_B) if b != 0.0]
    e_w = [(j, e) for j, e in enumerate(_E) if e != 0.0]

    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ti, yi, te = t[idx], y[idx], t_end[idx]
        hi = np.minimum(h[idx], cfg.max_step)
        last = ti + hi >= te
        hi = np.where(last, te - ti, hi)
        tiny = hi <= eps16 * np.maximum(np.abs(ti), 1.0)
        if np.any(tiny):
            j = idx[np.argmax(tiny)]
            raise IntegrationError(
                f"step size underflow at t={t[j]:.17g}", last_time=float(t[j]), last_state=y[j].copy()
            )
        Ki = K[:, : idx.size]
        Ki[0] = f[idx]
        hcol = hi[:, None]
        for s in range(1, 6):
            acc = stages[s][0][1] * Ki[stages[s][0][0]]
            for j, a in stages[s][1:]:
                acc += a * Ki[j]
            Ki[s] = rhs(ti + _C[s] * hi, yi + hcol * acc)
        acc = b_w[0][1] * Ki[b_w[0][0]]
        for j, b in b_w[1:]:
            acc += b * Ki[j]
        y_new = yi + hcol * acc
        t_new = np.where(last, te, ti + hi)
        Ki[6] = rhs(t_new, y_new)
        acc = e_w[0][1] * Ki[e_w[0][0]]
        for j, e in e_w[1:]:
            acc += e * Ki[j]
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(yi), np.abs(y_new))
        q = hcol * acc / scale
        err = np.sqrt(0.5 * (q[:, 0] ** 2 + q[:, 1] ** 2))
        ok = _inside(y_new, domain) & np.isfinite(Ki[6, :, 0]) & np.isfinite(Ki[6, :, 1])
        err = np.where(ok, err, np.inf)
        accept = err <= 1.0

        with np.errstate(invalid="ignore"):
            fac11 = np.where(ok, err**_EXPO, np.inf)
        fac = np.clip(fac11 / err_old[idx] ** _BETA / _SAFE, 1 / _FAC_MAX, 1 / _FAC_MIN)
        h_acc = hi / fac
        h_acc = np.where(rejected[idx], np.minimum(h_acc, hi), h_acc)
        h_rej = hi / np.minimum(1 / _FAC_MIN, np.maximum(fac11, 1e-300) / _SAFE)
        h[idx] = np.where(accept, np.where(last, h[idx], h_acc), h_rej)
        rejected[idx] = ~accept
        err_old[idx] = np.where(accept, np.maximum(err, 1e-4), err_old[idx])

        a = np.flatnonzero(accept)
        if a.size:
            ia = idx[a]
            stop = None
            if observer is not None:
                step = StepBatch(ia, ti[a], yi[a], t_new[a], y_new[a], hi[a], Ki[:, a])
                stop = observer(step)
            t[ia] = t_new[a]
            y[ia] = y_new[a]
            f[ia] = Ki[6][a]
            done = last[a]
            if stop is not None:
                done = done | np.asarray(stop, dtype=bool)
            active[ia[done]] = False
    return t, y


def _autonomous(sys: models.SystemSpec):
    k = models.kernel(sys)
    return lambda t, y: models._field(k, y)


def _check_start(sys, x0):
    x0 = np.asarray(x0, dtype=float)
    models._check_interior(sys, x0)
    return x0


def flow(
    sys: models.SystemSpec, x0, t: float, cfg: IntegratorConfig = DEFAULT_CONFIG
) -> Trajectory:
    """Trajectory of ``sys`` from ``x0`` over ``[0, t]``.

    Records every accepted step, plus ``cfg.dense_resolution`` interpolated
    samples per unit time.

    Raises
    ------
    IntegrationError
        On step-size underflow (carries the last good state).
    """
    x0 = _check_start(sys, x0)
    if t < 0:
        raise ValueError("t must be non-negative")
    times = [0.0]
    states = [x0.copy()]

    def record(step: StepBatch):
        if cfg.dense_resolution > 0:
            m = int(math.ceil(step.h[0] * cfg.dense_resolution))
            for th in np.arange(1, m) / m:
                times.append(float(step.t_old[0] + th * step.h[0]))
                states.append(dense_eval(step, th)[0])
        times.append(float(step.t_new[0]))
        states.append(step.y_new[0].copy())

    solve(_autonomous(sys), x0, 0.0, float(t), cfg, record, sys.domain)
    times = np.array(times)
    states = np.array(states)
    k = models.kernel(sys)
    energies = models._energy(k, states)
    drift = float(np.max(np.abs(energies - energies[0])))
    return Trajectory(times, states, drift)


def flow_points(
    sys: models.SystemSpec, X0, t: float, cfg: IntegratorConfig = DEFAULT_CONFIG
) -> np.ndarray:
    """Final states of a batch of initial points after time ``t``."""
    X0 = np.asarray(X0, dtype=float)
    shape = X0.shape
    _, y = solve(_autonomous(sys), X0.reshape(-1, 2), 0.0, float(t), cfg, None, sys.domain)
    return y.reshape(shape)


def first_crossing(
    sys: models.SystemSpec,
    x0,
    line,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    direction: Optional[int] = None,
    time_cap: Optional[float] = None,
) -> tuple[float, np.ndarray]:
    """First time the orbit of ``x0`` crosses ``line``.

    ``direction=+1`` asks for crossings from the right of the line to its left
    (relative to ``line.direction``), ``-1`` the opposite, ``None`` either.
    Starting exactly on the line does not count as a crossing.

    Raises
    ------
    ValueError
        If ``x0`` is the equilibrium.
    CrossingTimeout
        If nothing is found within ``time_cap`` (default: ten linear periods).
    """
    x0 = _check_start(sys, x0)
    c = models.center_array(sys)
    if np.linalg.norm(x0 - c) <= 1e-12:
        raise ValueError("first_crossing needs a starting point away from the center")
    if time_cap is None:
        time_cap = 10.0 * models.linear_period(sys)
    line = OrientedLine(np.asarray(line.base, float), np.asarray(line.direction, float))
    g0 = float(line.signed_distance(x0))
    on_line = abs(g0) <= 1e-12
    found: list = []

    def crossed(ga, gb):
        if direction is None:
            return (ga < 0 <= gb) or (ga > 0 >= gb)
        return direction * ga < 0 <= direction * gb

    def watch(step: StepBatch):
        ga = float(line.signed_distance(step.y_old[0]))
        gb = float(line.signed_distance(step.y_new[0]))
        if on_line and step.t_old[0] == 0.0:
            return None
        if not crossed(ga, gb):
            return None
        lo, hi = 0.0, 1.0
        while (hi - lo) * step.h[0] > 1e-12:
            mid = 0.5 * (lo + hi)
            gm = float(line.signed_distance(dense_eval(step, mid)[0]))
            if crossed(ga, gm):
                hi = mid
            else:
                lo = mid
        tc = float(step.t_old[0] + hi * step.h[0])
        found.append((tc, dense_eval(step, hi)[0]))
        return np.array([True])

    t_end, y_end = solve(_autonomous(sys), x0, 0.0, float(time_cap), cfg, watch, sys.domain)
    if not found:
        raise CrossingTimeout(
            f"no crossing within t={time_cap:.6g}", last_time=float(t_end[0]), last_state=y_end[0]
        )
    return found[0]


class AngleTracker:
    """Observer accumulating the lifted polar angle of every member about ``ref``.

    Within one step the angle is sampled on the dense output densely enough that
    consecutive samples differ by less than ``max_dtheta``.
    """

    def __init__(self, ref, n: int, max_dtheta: float = math.pi / 4, min_radius: float = 1e-9):
        self.ref = np.asarray(ref, dtype=float)
        self.total = np.zeros(n)
        self.max_dtheta = max_dtheta
        self.min_radius = min_radius
        self.closest = np.full(n, np.inf)

    def _angle(self, y):
        rel = y - self.ref
        return np.arctan2(rel[:, 1], rel[:, 0]), np.hypot(rel[:, 0], rel[:, 1])

    def __call__(self, step: StepBatch):
        a0, _ = self._angle(step.y_old)
        a1, r1 = self._angle(step.y_new)
        d = np.angle(np.exp(1j * (a1 - a0)))
        worst = float(np.max(np.abs(d))) if d.size else 0.0
        if worst > self.max_dtheta:
            m = int(math.ceil(4 * worst / self.max_dtheta))
            prev = a0
            d = np.zeros_like(a0)
            for th in np.arange(1, m + 1) / m:
                cur, r = self._angle(dense_eval(step, th) if th < 1 else step.y_new)
                d += np.angle(np.exp(1j * (cur - prev)))
                prev = cur
                np.minimum.at(self.closest, step.idx, r)
        self.total[step.idx] += d
        np.minimum.at(self.closest, step.idx, r1)
        return None


def _return_times(sys: models.SystemSpec, X: np.ndarray, cap: float, cfg: IntegratorConfig):
    """First return time of every member to the ray from the center through it.

    Members without a return before ``cap`` get ``nan``.
    """
    c = models.center_array(sys)
    k = models.kernel(sys)
    rel = X - c
    nrm = np.stack([-rel[:, 1], rel[:, 0]], axis=1)
    s = np.sign(np.einsum("ij,ij->i", nrm, models._field(k, X)))
    s[s == 0] = 1.0
    tau = np.full(len(X), np.nan)

    def g(i, y):
        return s[i] * np.einsum("ij,ij->i", nrm[i], y - c)

    def watch(step: StepBatch):
        i = step.idx
        hit = (g(i, step.y_old) < 0) & (g(i, step.y_new) >= 0)
        # the far half of the radial line is crossed the other way, so this
        # sign change can only happen on the ray through the start point
        if not np.any(hit):
            return hit
        sub = StepBatch(*(a[hit] for a in step[:6]), step.K[:, hit])
        j = i[hit]
        lo = np.zeros(len(j))
        hi = np.ones(len(j))
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            up = g(j, dense_eval(sub, mid)) >= 0
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        tau[j] = sub.t_old + hi * sub.h
        return hit

    solve(_autonomous(sys), X, 0.0, cap, cfg, watch, sys.domain)
    return tau


def advance(
    sys: models.SystemSpec,
    X0,
    t: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    track_ref=None,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Flow a batch of points for time ``t``, using the periodicity of orbits.

    Each point's return time is measured once; the flow is then only
    integrated over the remainder of ``t`` modulo that period, which avoids
    accumulating error over many revolutions.

    Parameters
    ----------
    track_ref : array_like, optional
        If given (it must be the center of ``sys``), also return the lifted
        angle swept about it.

    Returns
    -------
    Y : ndarray, shape (n, 2)
    swept : ndarray or None
    """
    X0 = np.array(X0, dtype=float).reshape(-1, 2)
    rhs = _autonomous(sys)
    if len(X0) == 0 or t <= 0:
        return X0.copy(), (np.zeros(len(X0)) if track_ref is not None else None)
    cap = min(float(t), 10.0 * models.linear_period(sys))
    tau = _return_times(sys, X0, cap, cfg)
    turns = np.where(np.isnan(tau), 0.0, np.floor(t / np.where(np.isnan(tau), 1.0, tau)))
    rem = np.where(np.isnan(tau), t, t - turns * np.where(np.isnan(tau), 0.0, tau))
    rem = np.clip(rem, 0.0, None)
    tracker = AngleTracker(track_ref, len(X0)) if track_ref is not None else None
    _, Y = solve(rhs, X0, 0.0, rem, cfg, tracker, sys.domain)
    if tracker is None:
        return Y, None
    sign = models.rotation_direction(sys).sign
    return Y, tracker.total + sign * 2 * math.pi * turns
