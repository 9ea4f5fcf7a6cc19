"""Pontryagin machinery: Hamiltonian, costate equations, control characterization.

Costates follow the minimization convention ``H = running cost + lam . f``
with ``lam' = -dH/dx`` and ``lam(t_f) = 0``. The costate equations below were
differentiated by hand from :func:`hamiltonian_terms`; ``verify.fd_adjoint_check``
compares them against central differences of that function.

Shorthand used in the derivation (``a = 1 - u1``)::

    F = phi B beta_mh Im S / N      infection flow into I (before the a factor)
    G = B beta_hm I Sm / N          infection flow into Em
    d12 = lam2 - lam1,  d67 = lam7 - lam6
    H  = ... + a d12 F + d67 G + ...
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .errors import NonfiniteInput, ValidationError
from .model import N_STATES, _as_controls, _as_params, _as_state_array, check_state, rhs_terms


@dataclass(frozen=True)
class ObjectiveWeights:
    w1: float = 10.0
    w2: float = 10.0
    w3: float = 100.0
    w4: float = 100.0

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "w4"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(name, "finite real", v)
            if name in ("w3", "w4") and v <= 0:
                raise ValidationError(name, "> 0", v)
            if v < 0:
                raise ValidationError(name, ">= 0", v)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


def hamiltonian_terms(S, I, W, M, Am, Sm, Em, Im, l1, l2, l3, l4, l5, l6, l7, l8, u1, u2, p, w):
    f = rhs_terms(S, I, W, M, Am, Sm, Em, Im, u1, u2, p)
    running = w[0] * I + w[1] * (Sm + Em + Im) + w[2] * u1 * u1 + w[3] * u2 * u2
    return (running + l1 * f[0] + l2 * f[1] + l3 * f[2] + l4 * f[3]
            + l5 * f[4] + l6 * f[5] + l7 * f[6] + l8 * f[7])


def adjoint_terms(S, I, W, M, Am, Sm, Em, Im, l1, l2, l3, l4, l5, l6, l7, l8, u1, u2, p, w):
    """Costate derivatives ``-dH/dx``, one per compartment."""
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
    N2 = N * N
    c = phi * B * beta_mh
    g = B * beta_hm
    a = 1.0 - u1
    d12 = l2 - l1
    d67 = l7 - l6

    # dF/dx and dG/dx for the women compartments (N depends on all four)
    dF_S = c * Im * (N - S) / N2
    dF_other = -c * Im * S / N2
    dG_I = g * Sm * (N - I) / N2
    dG_other = -g * I * Sm / N2

    aF = a * d12
    recruit = mu_b * (1.0 - Am / K)

    dl1 = -(aF * dF_S + d67 * dG_other - l1 * ((1.0 - phi) * tau1 + mu_h) + l3 * (1.0 - phi) * tau1)
    dl2 = -(w[0] + aF * dF_other + d67 * dG_I - l2 * (tau2 + mu_h)
            + l3 * (1.0 - psi) * tau2 + l4 * psi * tau2)
    dl3 = -(aF * dF_other + d67 * dG_other - l3 * mu_h)
    dl4 = -(aF * dF_other + d67 * dG_other - l4 * mu_h)
    dl5 = l5 * (mu_b * (Sm + Em + Im) / K + mu_A + eta_A) - l6 * eta_A
    dl6 = -(w[1] + l5 * recruit + d67 * g * I / N - l6 * (mu_m + u2))
    dl7 = -(w[1] + l5 * recruit - l7 * (eta_m + mu_m + u2) + l8 * eta_m)
    dl8 = -(w[1] + l5 * recruit + aF * c * S / N - l8 * (mu_m + u2))
    return dl1, dl2, dl3, dl4, dl5, dl6, dl7, dl8


def stationary_controls(S, I, W, M, Am, Sm, Em, Im, l1, l2, l3, l4, l5, l6, l7, l8, p, w):
    """Unconstrained minimizer of H in (u1, u2).

    dH/du1 = 2 w3 u1 - (lam2 - lam1) F
    dH/du2 = 2 w4 u2 - (lam6 Sm + lam7 Em + lam8 Im)
    """
    N = S + I + W + M
    F = p[1] * p[2] * p[3] * Im / N * S
    v1 = (l2 - l1) * F / (2.0 * w[2])
    v2 = (l6 * Sm + l7 * Em + l8 * Im) / (2.0 * w[3])
    return v1, v2


def _as_costate_array(lam) -> np.ndarray:
    arr = np.asarray(lam, dtype=float)
    if arr.shape[-1] != N_STATES:
        raise ValueError(f"expected 8 costates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonfiniteInput(f"costate has non-finite entries: {arr}")
    return arr


def _as_weights(w) -> np.ndarray:
    return w.as_array() if isinstance(w, ObjectiveWeights) else np.asarray(w, dtype=float)


def hamiltonian(x, lam, u, p, w) -> float:
    x = _as_state_array(x)
    check_state(x)
    lam = _as_costate_array(lam)
    u1, u2 = _as_controls(u)
    return float(hamiltonian_terms(*x, *lam, u1, u2, _as_params(p), _as_weights(w)))


def adjoint_rhs(t, x, lam, u, p, w) -> np.ndarray:
    x = _as_state_array(x)
    check_state(x)
    lam = _as_costate_array(lam)
    u1, u2 = _as_controls(u)
    return np.array(adjoint_terms(*x, *lam, u1, u2, _as_params(p), _as_weights(w)), dtype=float)


def characterize_controls(x, lam, p, w, u_max: float = 0.5) -> tuple[float, float]:
    """Pointwise minimizer of H over [0, u_max]^2 (H is separable and convex in u)."""
    x = _as_state_array(x)
    check_state(x)
    lam = _as_costate_array(lam)
    v1, v2 = stationary_controls(*x, *lam, _as_params(p), _as_weights(w))
    return float(min(max(v1, 0.0), u_max)), float(min(max(v2, 0.0), u_max))


def transversality() -> np.ndarray:
    return np.zeros(N_STATES)
