"""Planar Hamiltonian models: two game-theoretic variants and one ecological one.

All three share the separable structure

    x' = r_x x (1 - x/U) (a - b y)
    y' = r_y y (1 - y/V) (-c + d x)

with first integral H(x, y) = A(x) + B(y).  Each variant keeps its own
parameter names; :func:`kernel` maps them onto the common coefficients so that
energies, fields and gradients are evaluated by one set of numpy routines.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import NamedTuple, Union

import numpy as np

from .errors import DomainError, RegimeError

__all__ = [
    "Variant",
    "Direction",
    "RawGameParamsNeg",
    "RawGameParamsPos",
    "ParamsNeg",
    "ParamsPos",
    "ParamsBio",
    "SystemSpec",
    "Kernel",
    "derive_neg",
    "derive_pos",
    "kernel",
    "kernel_values",
    "coefficients",
    "center",
    "min_energy",
    "hamiltonian",
    "gradient",
    "vector_field",
    "jacobian",
    "rotation_direction",
    "linearized_frequency",
    "BOUNDARY_GUARD",
]

#: points closer than this to the domain boundary are rejected by :func:`hamiltonian`
BOUNDARY_GUARD = 1e-12


class Variant(str, enum.Enum):
    NEG_MED = "NegMed"
    POS_MED = "PosMed"
    BIO = "Bio"


class Direction(str, enum.Enum):
    CW = "CW"
    CCW = "CCW"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.CCW else -1


def _require(cond: bool, what: str) -> None:
    if not cond:
        raise RegimeError(f"regime violated: {what}")


# -- raw parameters ----------------------------------------------------------


@dataclass(frozen=True)
class RawGameParamsNeg:
    """Raw parameters of the negative defensive medicine game."""

    p_D: Real
    p_ND: Real
    q_D: Real
    q_ND: Real
    B_PH: Real
    E: Real
    C_L: Real

    def __post_init__(self):
        _require(0 < self.q_D < self.q_ND < 1, "0 < q_D < q_ND < 1")
        _require(0 <= self.p_ND <= self.p_D <= 1, "0 <= p_ND <= p_D <= 1")
        _require(self.E > 0, "E > 0")
        _require(self.C_L > 0, "C_L > 0")

    @property
    def P(self):
        return self.p_D * self.q_D - self.p_ND * self.q_ND


@dataclass(frozen=True)
class RawGameParamsPos:
    """Raw parameters of the positive defensive medicine game."""

    p: Real
    q_D: Real
    q_ND: Real
    R: Real
    K: Real
    C_D: Real
    C_ND: Real
    C_L: Real

    def __post_init__(self):
        _require(0 < self.p < 1, "0 < p < 1")
        _require(self.q_D < self.q_ND, "q_D < q_ND")
        _require(self.R > 0 and self.K > 0 and self.C_L > 0, "R, K, C_L > 0")
        _require(self.C_D > self.C_ND >= 0, "C_D > C_ND >= 0")

    @property
    def E_D(self):
        return self.q_D * self.R - (1 - self.q_D) * self.K

    @property
    def E_ND(self):
        return self.q_ND * self.R - (1 - self.q_ND) * self.K


# -- canonical parameters ----------------------------------------------------


@dataclass(frozen=True)
class ParamsNeg:
    """Coefficients of d' = d(1-d)(zeta - eta l), l' = l(1-l)(-theta + kappa d)."""

    zeta: Real
    eta: Real
    theta: Real
    kappa: Real

    def __post_init__(self):
        _require(0 < self.zeta, "0 < zeta")
        _require(self.zeta < self.eta, "zeta < eta")
        _require(0 < self.theta, "0 < theta")
        _require(self.theta < self.kappa, "theta < kappa")


@dataclass(frozen=True)
class ParamsPos:
    """Coefficients of d' = d(1-d)(p lam l - mu), l' = l(1-l) p (nu - lam d)."""

    p: Real
    lam: Real
    mu: Real
    nu: Real

    def __post_init__(self):
        _require(0 < self.mu, "0 < mu")
        _require(self.mu < self.p * self.lam, "mu < p*lam")
        _require(0 < self.nu, "0 < nu")
        _require(self.nu < self.lam, "nu < lam")


@dataclass(frozen=True)
class ParamsBio:
    """Predator-prey coefficients with logistic self-limitation."""

    alpha: Real
    beta: Real
    gamma: Real
    delta: Real
    r_x: Real
    r_y: Real
    K_x: Real = 1
    K_y: Real = 1

    def __post_init__(self):
        _require(0 < self.alpha < self.beta, "0 < alpha < beta")
        _require(0 < self.gamma < self.delta, "0 < gamma < delta")
        _require(self.r_x > 0 and self.r_y > 0, "r_x, r_y > 0")
        _require(self.K_x > 0 and self.K_y > 0, "K_x, K_y > 0")
        _require(self.gamma / self.delta < self.K_x, "gamma/delta < K_x")
        _require(self.alpha / self.beta < self.K_y, "alpha/beta < K_y")


Params = Union[ParamsNeg, ParamsPos, ParamsBio]
_VARIANT_OF = {ParamsNeg: Variant.NEG_MED, ParamsPos: Variant.POS_MED, ParamsBio: Variant.BIO}


@dataclass(frozen=True)
class SystemSpec:
    """One concrete planar system: variant, canonical parameters and domain."""

    params: Params
    variant: Variant = field(init=False)

    def __post_init__(self):
        try:
            variant = _VARIANT_OF[type(self.params)]
        except KeyError:
            raise TypeError(f"unsupported parameter type {type(self.params).__name__}") from None
        object.__setattr__(self, "variant", variant)

    @property
    def domain(self) -> tuple[float, float]:
        """Upper corner (U, V) of the open rectangle (0, U) x (0, V)."""
        if self.variant is Variant.BIO:
            return (float(self.params.K_x), float(self.params.K_y))
        return (1.0, 1.0)

    @classmethod
    def neg(cls, zeta, eta, theta, kappa) -> "SystemSpec":
        return cls(ParamsNeg(zeta, eta, theta, kappa))

    @classmethod
    def pos(cls, p, lam, mu, nu) -> "SystemSpec":
        return cls(ParamsPos(p, lam, mu, nu))

    @classmethod
    def bio(cls, alpha, beta, gamma, delta, r_x, r_y, K_x=1, K_y=1) -> "SystemSpec":
        return cls(ParamsBio(alpha, beta, gamma, delta, r_x, r_y, K_x, K_y))


# -- parameter derivation ----------------------------------------------------


def derive_neg(raw: RawGameParamsNeg) -> ParamsNeg:
    """Canonical coefficients for the negative defensive medicine game.

    Raises
    ------
    RegimeError
        If the derived coefficients leave 0 < zeta < eta, 0 < theta < kappa.
    """
    zeta = raw.B_PH
    eta = raw.P * raw.E
    theta = raw.q_ND * (raw.C_L - raw.p_ND * raw.E)
    kappa = theta + raw.q_D * (raw.p_D * raw.E - raw.C_L)
    return ParamsNeg(zeta, eta, theta, kappa)


def derive_pos(raw: RawGameParamsPos) -> ParamsPos:
    """Canonical coefficients for the positive defensive medicine game."""
    lam = raw.E_ND - raw.E_D
    mu = raw.C_D - raw.C_ND
    nu = raw.E_ND - raw.C_L
    return ParamsPos(raw.p, lam, mu, nu)


# -- common kernel -----------------------------------------------------------


class Kernel(NamedTuple):
    a: float
    b: float
    c: float
    d: float
    rx: float
    ry: float
    U: float
    V: float
    hscale: float


def kernel_values(variant: Variant, **q) -> Kernel:
    """Common coefficients from canonical ones; works elementwise on arrays."""
    if variant is Variant.NEG_MED:
        return Kernel(q["zeta"], q["eta"], q["theta"], q["kappa"], 1.0, 1.0, 1.0, 1.0, 1.0)
    if variant is Variant.POS_MED:
        p, lam, mu, nu = q["p"], q["lam"], q["mu"], q["nu"]
        return Kernel(-mu, -p * lam, -nu, -lam, 1.0, p, 1.0, 1.0, -p)
    return Kernel(
        q["alpha"], q["beta"], q["gamma"], q["delta"], q["r_x"], q["r_y"], q["K_x"], q["K_y"], 1.0
    )


def coefficients(params: Params) -> dict:
    """Canonical coefficients as a name -> float mapping."""
    return {f.name: float(getattr(params, f.name)) for f in dataclasses.fields(params)}


def _kernel_from_params(params: Params) -> Kernel:
    return kernel_values(_VARIANT_OF[type(params)], **coefficients(params))


def kernel(sys: SystemSpec) -> Kernel:
    """Coefficients of ``sys`` in the common separable form."""
    return _kernel_from_params(sys.params)


def _energy(k: Kernel, x: np.ndarray) -> np.ndarray:
    u = x[..., 0]
    v = x[..., 1]
    a_part = (-k.c * np.log(u) + (k.c - k.d * k.U) * np.log(k.U - u)) / k.rx
    b_part = (-k.a * np.log(v) + (k.a - k.b * k.V) * np.log(k.V - v)) / k.ry
    return k.hscale * (a_part + b_part)


def _gradient(k: Kernel, x: np.ndarray) -> np.ndarray:
    u = x[..., 0]
    v = x[..., 1]
    gu = k.hscale * (k.U / k.rx) * (k.d * u - k.c) / (u * (k.U - u))
    gv = k.hscale * (k.V / k.ry) * (k.b * v - k.a) / (v * (k.V - v))
    return np.stack([gu, gv], axis=-1)


def _field(k: Kernel, x: np.ndarray) -> np.ndarray:
    u = x[..., 0]
    v = x[..., 1]
    du = k.rx * u * (1.0 - u / k.U) * (k.a - k.b * v)
    dv = k.ry * v * (1.0 - v / k.V) * (k.d * u - k.c)
    return np.stack([du, dv], axis=-1)


def _check_interior(sys: SystemSpec, x: np.ndarray) -> None:
    U, V = sys.domain
    g = BOUNDARY_GUARD
    u = x[..., 0]
    v = x[..., 1]
    bad = (u <= g) | (u >= U - g) | (v <= g) | (v >= V - g) | ~np.isfinite(u) | ~np.isfinite(v)
    if np.any(bad):
        first = np.asarray(x)[bad][0] if np.ndim(bad) else np.asarray(x)
        raise DomainError(f"point {tuple(np.round(first, 15))} not strictly inside (0,{U})x(0,{V})")


# -- public operations -------------------------------------------------------


def center(sys: SystemSpec) -> tuple:
    """Interior equilibrium.  Exact when the parameters are exact rationals."""
    q = sys.params
    if isinstance(q, ParamsNeg):
        return (_div(q.theta, q.kappa), _div(q.zeta, q.eta))
    if isinstance(q, ParamsPos):
        return (_div(q.nu, q.lam), _div(q.mu, q.p * q.lam))
    return (_div(q.gamma, q.delta), _div(q.alpha, q.beta))


def _div(a, b):
    if isinstance(a, (int, Fraction)) and isinstance(b, (int, Fraction)):
        return Fraction(a) / Fraction(b)
    return a / b


def center_array(sys: SystemSpec) -> np.ndarray:
    return np.array([float(c) for c in center(sys)])


def hamiltonian(sys: SystemSpec, x) -> np.ndarray | float:
    """First integral H(x) with natural logarithms and zero additive constants.

    ``x`` may be a single point or an array of shape (..., 2).

    Raises
    ------
    DomainError
        If a point is within ``BOUNDARY_GUARD`` of the domain boundary.
    """
    x = np.asarray(x, dtype=float)
    _check_interior(sys, x)
    h = _energy(kernel(sys), x)
    return float(h) if h.ndim == 0 else h


def min_energy(sys: SystemSpec) -> float:
    """Energy at the center: the global minimum e0 of H."""
    return float(_energy(kernel(sys), center_array(sys)))


def gradient(sys: SystemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_interior(sys, x)
    return _gradient(kernel(sys), x)


def vector_field(sys: SystemSpec, x) -> np.ndarray:
    """Right-hand side evaluated at ``x`` (shape (..., 2)); defined on the closed domain."""
    return _field(kernel(sys), np.asarray(x, dtype=float))


def jacobian(sys: SystemSpec, x=None) -> np.ndarray:
    """Analytic Jacobian of the vector field (at the center by default)."""
    k = kernel(sys)
    u, v = center_array(sys) if x is None else np.asarray(x, dtype=float)
    return np.array(
        [
            [
                k.rx * (1 - 2 * u / k.U) * (k.a - k.b * v),
                -k.b * k.rx * u * (1 - u / k.U),
            ],
            [
                k.d * k.ry * v * (1 - v / k.V),
                k.ry * (1 - 2 * v / k.V) * (k.d * u - k.c),
            ],
        ]
    )


def rotation_direction(sys: SystemSpec) -> Direction:
    # moving up just right of the center means counterclockwise
    return Direction.CCW if jacobian(sys)[1, 0] > 0 else Direction.CW


def linearized_frequency(sys: SystemSpec) -> float:
    """Angular frequency sqrt(|det J|) of the linearization at the center."""
    return math.sqrt(abs(np.linalg.det(jacobian(sys))))


def linear_period(sys: SystemSpec) -> float:
    """Small-cycle limit 2*pi/omega of the orbit period."""
    return 2 * math.pi / linearized_frequency(sys)


def energy_scale(sys: SystemSpec) -> float:
    """Typical energy unit: the sum of |coefficients| multiplying the logs."""
    k = kernel(sys)
    return abs(k.hscale) * (
        (abs(k.c) + abs(k.c - k.d * k.U)) / k.rx + (abs(k.a) + abs(k.a - k.b * k.V)) / k.ry
    )
