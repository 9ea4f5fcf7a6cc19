"""Women/mosquito compartment model with personal-protection and spraying controls.

State ordering everywhere in the package is

    0 S   susceptible pregnant women
    1 I   infected pregnant women
    2 W   women who gave birth without microcephaly
    3 M   women who gave birth to babies with microcephaly
    4 Am  aquatic-phase mosquitoes (egg, larva, pupa)
    5 Sm  susceptible adult mosquitoes
    6 Em  exposed adult mosquitoes
    7 Im  infectious adult mosquitoes

The arithmetic lives in :func:`rhs_terms`, a scalar function with no numpy
calls so the same source runs under numba (integrators), on numpy arrays
(vectorised sampling) and on ``gmpy2.mpfr`` values (extended-precision
oracles).
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import NonfiniteInput, NonpositivePopulation, ValidationError

STATE_NAMES = ("S", "I", "W", "M", "Am", "Sm", "Em", "Im")
N_STATES = 8

PARAM_NAMES = (
    "Lambda", "phi", "B", "beta_mh", "beta_hm", "tau1", "tau2", "mu_h",
    "psi", "mu_b", "mu_A", "eta_A", "eta_m", "mu_m", "K",
)

# Rates tabulated "per day"; multiplied by ``per_day_scale`` when loading.
PER_DAY_PARAMS = ("B", "mu_b", "mu_A", "eta_A", "eta_m", "mu_m")

_FRACTIONS = ("phi", "psi", "beta_mh", "beta_hm")


@dataclass(frozen=True)
class StateVector:
    S: float
    I: float
    W: float
    M: float
    Am: float
    Sm: float
    Em: float
    Im: float

    @classmethod
    def from_array(cls, arr) -> "StateVector":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (N_STATES,):
            raise ValueError(f"expected 8 compartments, got shape {arr.shape}")
        return cls(*(float(v) for v in arr))

    @classmethod
    def default_initial(cls) -> "StateVector":
        return cls(
            S=2_180_686.0, I=1.0, W=0.0, M=0.0,
            Am=1.0903e6, Sm=1.0903e6, Em=6.5421e6, Im=1.0903e6,
        )

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class ControlPair:
    u1: float = 0.0
    u2: float = 0.0

    def check(self, u_max: float = 0.5) -> None:
        for name in ("u1", "u2"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise NonfiniteInput(f"{name} is not finite: {v!r}")
            if not 0.0 <= v <= u_max:
                raise ValidationError(name, f"0 <= {name} <= u_max={u_max}", v)


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological and entomological constants (time unit: week).

    Defaults are the verbatim tabulated values. ``preset(per_day_scale=7.0)``
    converts the per-day rates to per-week.
    """

    Lambda: float = 3_000_000 / 52
    phi: float = 0.459
    B: float = 1.0
    beta_mh: float = 0.6
    beta_hm: float = 0.6
    tau1: float = 37.0
    tau2: float = 1 / 25
    mu_h: float = 1 / 50
    psi: float = 0.133
    mu_b: float = 80.0
    mu_A: float = 1 / 4
    eta_A: float = 0.5
    eta_m: float = 1 / 125
    mu_m: float = 1 / 125
    K: float = 1.09034e6

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f.name, "finite real", v)
            if v <= 0:
                raise ValidationError(f.name, "> 0", v)
        for name in _FRACTIONS:
            v = getattr(self, name)
            if v > 1:
                raise ValidationError(name, "in (0, 1]", v)

    @classmethod
    def preset(cls, per_day_scale: float = 1.0, **overrides) -> "ModelParams":
        base = {f.name: f.default for f in fields(cls)}
        if per_day_scale != 1.0:
            for name in PER_DAY_PARAMS:
                base[name] = base[name] * per_day_scale
        base.update(overrides)
        return cls(**base)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def rhs_terms(S, I, W, M, Am, Sm, Em, Im, u1, u2, p):
    """Controlled right-hand side, one return value per compartment.

    ``p`` is indexable in :data:`PARAM_NAMES` order. The susceptible-mosquito
    equation uses ``- mu_m * Sm`` so that zero controls give back the
    uncontrolled system.
    """
    Lam = p[0]
    phi = p[1]
    B = p[2]
    beta_mh = p[3]
    beta_hm = p[4]
    tau1 = p[5]
    tau2 = p[6]
    mu_h = p[7]
    psi = p[8]
    mu_b = p[9]
    mu_A = p[10]
    eta_A = p[11]
    eta_m = p[12]
    mu_m = p[13]
    K = p[14]

    N = S + I + W + M
    infect_w = (1.0 - u1) * phi * B * beta_mh * Im / N * S
    infect_m = B * beta_hm * I / N * Sm

    dS = Lam - infect_w - (1.0 - phi) * tau1 * S - mu_h * S
    dI = infect_w - (tau2 + mu_h) * I
    dW = (1.0 - phi) * tau1 * S + (1.0 - psi) * tau2 * I - mu_h * W
    dM = psi * tau2 * I - mu_h * M
    dAm = mu_b * (1.0 - Am / K) * (Sm + Em + Im) - (mu_A + eta_A) * Am
    dSm = eta_A * Am - infect_m - mu_m * Sm - u2 * Sm
    dEm = infect_m - (eta_m + mu_m) * Em - u2 * Em
    dIm = eta_m * Em - mu_m * Im - u2 * Im
    return dS, dI, dW, dM, dAm, dSm, dEm, dIm


def _as_state_array(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.as_array()
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != N_STATES:
        raise ValueError(f"expected 8 compartments, got shape {arr.shape}")
    return arr


def _as_controls(u) -> tuple[float, float]:
    if isinstance(u, ControlPair):
        return u.u1, u.u2
    u1, u2 = u
    return float(u1), float(u2)


def _as_params(p) -> np.ndarray:
    return p.as_array() if isinstance(p, ModelParams) else np.asarray(p, dtype=float)


def check_state(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise NonfiniteInput(f"state has non-finite entries: {x}")
    N = x[..., 0] + x[..., 1] + x[..., 2] + x[..., 3]
    if np.any(N <= 0):
        raise NonpositivePopulation(f"total women population N = {N} <= 0")


def rhs_controlled(t, x, u, p) -> np.ndarray:
    """Time derivative of the 8 compartments under controls ``u = (u1, u2)``.

    Autonomous: ``t`` is accepted for signature compatibility only.
    """
    x = _as_state_array(x)
    u1, u2 = _as_controls(u)
    pa = _as_params(p)
    check_state(x)
    if not (math.isfinite(u1) and math.isfinite(u2)):
        raise NonfiniteInput(f"controls are not finite: {(u1, u2)}")
    if not np.all(np.isfinite(pa)):
        raise NonfiniteInput("parameters contain non-finite values")
    return np.array(rhs_terms(*x, u1, u2, pa), dtype=float)


def rhs_uncontrolled(t, x, p) -> np.ndarray:
    return rhs_controlled(t, x, (0.0, 0.0), p)


def total_women(x) -> float:
    x = _as_state_array(x)
    return x[..., 0] + x[..., 1] + x[..., 2] + x[..., 3]


def total_adult_mosquitoes(x) -> float:
    """Adult mosquitoes Sm + Em + Im; the aquatic phase is excluded."""
    x = _as_state_array(x)
    return x[..., 5] + x[..., 6] + x[..., 7]
