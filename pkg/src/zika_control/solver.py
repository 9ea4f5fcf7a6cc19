"""Fixed-step RK4 state/costate integration and the forward-backward sweep.

Controls live on the nodes of a uniform :class:`TimeGrid`. Each grid interval
is integrated with ``substeps`` classical RK4 steps of equal length, so the
method stays fixed-step while the aquatic-phase equation, whose
linearisation rate ``mu_b * N_m / K`` reaches a few thousand per week under
the tabulated rates, stays inside the RK4 stability region. Controls at stage
times are linearly interpolated between grid nodes; the backward sweep
interpolates the stored fine-step states at half steps.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NonfiniteInput, NonfiniteState, NonpositivePopulation, ValidationError
from .model import N_STATES, ModelParams, _as_params, _as_state_array, check_state, rhs_terms
from .pmp import ObjectiveWeights, _as_weights, adjoint_terms, stationary_controls, transversality

log = logging.getLogger(__name__)

_rhs_nb = njit(cache=True, nogil=True)(rhs_terms)
_adj_nb = njit(cache=True, nogil=True)(adjoint_terms)

_OK, _NONFINITE, _NEGATIVE, _NONPOS_N = 0, 1, 2, 3


@dataclass(frozen=True)
class TimeGrid:
    """Uniform node grid on [0, t_f] (weeks).

    ``substeps`` RK4 steps are taken per interval. The default of 200 keeps
    h = 5e-4 week, enough for uncontrolled runs under the tabulated rates.
    """

    t_f: float = 160.0
    n_steps: int = 1600
    substeps: int = 200

    def __post_init__(self):
        if not (isinstance(self.t_f, (int, float)) and math.isfinite(self.t_f) and self.t_f > 0):
            raise ValidationError("t_f", "> 0", self.t_f)
        if not isinstance(self.n_steps, (int, np.integer)) or self.n_steps < 2:
            raise ValidationError("n_steps", "integer >= 2", self.n_steps)
        if not isinstance(self.substeps, (int, np.integer)) or self.substeps < 1:
            raise ValidationError("substeps", "integer >= 1", self.substeps)

    @property
    def dt(self) -> float:
        return self.t_f / self.n_steps

    @property
    def h(self) -> float:
        return self.dt / self.substeps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_f, self.n_steps + 1)

    @property
    def n_fine(self) -> int:
        return self.n_steps * self.substeps


@dataclass(frozen=True)
class FbsmConfig:
    max_iters: int = 200
    rel_tol: float = 1e-3
    relaxation: float = 0.5
    u_max: float = 0.5

    def __post_init__(self):
        if not isinstance(self.max_iters, (int, np.integer)) or self.max_iters < 1:
            raise ValidationError("max_iters", "integer >= 1", self.max_iters)
        if not (math.isfinite(self.rel_tol) and self.rel_tol > 0):
            raise ValidationError("rel_tol", "> 0", self.rel_tol)
        if not 0 < self.relaxation <= 1:
            raise ValidationError("relaxation", "in (0, 1]", self.relaxation)
        if not 0 < self.u_max <= 0.5:
            raise ValidationError("u_max", "in (0, 0.5]", self.u_max)


@dataclass
class FbsmSolution:
    times: np.ndarray
    states: np.ndarray       # (n+1, 8)
    adjoints: np.ndarray     # (n+1, 8)
    controls: np.ndarray     # (n+1, 2)
    objective: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    fixed_point_residual: float = math.nan


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _interp(u, k, frac):
    return u[k] + frac * (u[k + 1] - u[k])


@njit(cache=True, nogil=True)
def _forward_kernel(x0, u1, u2, p, n_steps, substeps, dt, floor, out):
    h = dt / substeps
    x = x0.copy()
    xs = np.empty(8)
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    out[0, :] = x
    j = 0
    for k in range(n_steps):
        for s in range(substeps):
            f0 = s * h / dt
            fm = (s + 0.5) * h / dt
            f1 = (s + 1.0) * h / dt
            a1 = _interp(u1, k, f0)
            b1 = _interp(u2, k, f0)
            am = _interp(u1, k, fm)
            bm = _interp(u2, k, fm)
            a2 = _interp(u1, k, f1)
            b2 = _interp(u2, k, f1)

            if x[0] + x[1] + x[2] + x[3] <= 0.0:
                return _NONPOS_N, j
            r = _rhs_nb(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], a1, b1, p)
            for i in range(8):
                k1[i] = r[i]
                xs[i] = x[i] + 0.5 * h * r[i]
            if xs[0] + xs[1] + xs[2] + xs[3] <= 0.0:
                return _NONPOS_N, j
            r = _rhs_nb(xs[0], xs[1], xs[2], xs[3], xs[4], xs[5], xs[6], xs[7], am, bm, p)
            for i in range(8):
                k2[i] = r[i]
                xs[i] = x[i] + 0.5 * h * r[i]
            if xs[0] + xs[1] + xs[2] + xs[3] <= 0.0:
                return _NONPOS_N, j
            r = _rhs_nb(xs[0], xs[1], xs[2], xs[3], xs[4], xs[5], xs[6], xs[7], am, bm, p)
            for i in range(8):
                k3[i] = r[i]
                xs[i] = x[i] + h * r[i]
            if xs[0] + xs[1] + xs[2] + xs[3] <= 0.0:
                return _NONPOS_N, j
            r = _rhs_nb(xs[0], xs[1], xs[2], xs[3], xs[4], xs[5], xs[6], xs[7], a2, b2, p)
            for i in range(8):
                k4[i] = r[i]
            j += 1
            for i in range(8):
                x[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not np.isfinite(x[i]):
                    return _NONFINITE, j
                if x[i] < -floor:
                    return _NEGATIVE, j
                out[j, i] = x[i]
    return _OK, j


@njit(cache=True, nogil=True)
def _backward_kernel(xf, u1, u2, p, w, n_steps, substeps, dt, lam_T, out):
    h = dt / substeps
    lam = lam_T.copy()
    ls = np.empty(8)
    xm = np.empty(8)
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    out[n_steps, :] = lam
    j = n_steps * substeps
    for k in range(n_steps - 1, -1, -1):
        for s in range(substeps - 1, -1, -1):
            # step from fine node j = k*substeps + s + 1 down to j - 1
            f1 = (s + 1.0) * h / dt
            fm = (s + 0.5) * h / dt
            f0 = s * h / dt
            a1 = _interp(u1, k, f1)
            b1 = _interp(u2, k, f1)
            am = _interp(u1, k, fm)
            bm = _interp(u2, k, fm)
            a0 = _interp(u1, k, f0)
            b0 = _interp(u2, k, f0)
            for i in range(8):
                xm[i] = 0.5 * (xf[j, i] + xf[j - 1, i])

            x = xf[j]
            r = _adj_nb(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7],
                        lam[0], lam[1], lam[2], lam[3], lam[4], lam[5], lam[6], lam[7], a1, b1, p, w)
            for i in range(8):
                k1[i] = r[i]
                ls[i] = lam[i] - 0.5 * h * r[i]
            r = _adj_nb(xm[0], xm[1], xm[2], xm[3], xm[4], xm[5], xm[6], xm[7],
                        ls[0], ls[1], ls[2], ls[3], ls[4], ls[5], ls[6], ls[7], am, bm, p, w)
            for i in range(8):
                k2[i] = r[i]
                ls[i] = lam[i] - 0.5 * h * r[i]
            r = _adj_nb(xm[0], xm[1], xm[2], xm[3], xm[4], xm[5], xm[6], xm[7],
                        ls[0], ls[1], ls[2], ls[3], ls[4], ls[5], ls[6], ls[7], am, bm, p, w)
            for i in range(8):
                k3[i] = r[i]
                ls[i] = lam[i] - h * r[i]
            x = xf[j - 1]
            r = _adj_nb(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7],
                        ls[0], ls[1], ls[2], ls[3], ls[4], ls[5], ls[6], ls[7], a0, b0, p, w)
            for i in range(8):
                k4[i] = r[i]
            j -= 1
            for i in range(8):
                lam[i] = lam[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not np.isfinite(lam[i]):
                    return _NONFINITE, j
        out[k, :] = lam
    return _OK, j


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def _control_arrays(u, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_steps + 1, 2):
        raise ValueError(f"control grid must have shape {(grid.n_steps + 1, 2)}, got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise NonfiniteInput("control grid has non-finite entries")
    return np.ascontiguousarray(u[:, 0]), np.ascontiguousarray(u[:, 1])


def zero_controls(grid: TimeGrid) -> np.ndarray:
    return np.zeros((grid.n_steps + 1, 2))


def rk4_forward(x0, u, p, grid: TimeGrid, *, return_fine: bool = False):
    """Integrate the controlled system; one row per grid node.

    With ``return_fine`` the substep trajectory (``n_steps*substeps + 1`` rows)
    is returned as well, for use by :func:`rk4_backward`.
    """
    x0 = _as_state_array(x0).astype(float)
    check_state(x0)
    u1, u2 = _control_arrays(u, grid)
    pa = _as_params(p)
    fine = np.empty((grid.n_fine + 1, N_STATES))
    floor = 1e-9 * float(np.sum(np.abs(x0)))
    status, j = _forward_kernel(x0, u1, u2, pa, grid.n_steps, grid.substeps, grid.dt, floor, fine)
    if status != _OK:
        node = j // grid.substeps
        t = j * grid.h
        if status == _NONPOS_N:
            raise NonpositivePopulation(f"N <= 0 at t = {t:.6g}", node=node)
        what = "non-finite state" if status == _NONFINITE else "state below positivity tolerance"
        raise NonfiniteState(
            f"{what} at t = {t:.6g} (h = {grid.h:.3g}; increase substeps if the run is stiff)",
            node=node,
        )
    coarse = fine[:: grid.substeps].copy()
    return (coarse, fine) if return_fine else coarse


def rk4_backward(lam_T, x_traj, u, p, w, grid: TimeGrid) -> np.ndarray:
    """Integrate the costate equations from t_f to 0.

    ``x_traj`` is either the node trajectory or the fine substep trajectory
    from :func:`rk4_forward`; node trajectories are linearly interpolated.
    """
    lam_T = np.asarray(lam_T, dtype=float)
    x_traj = np.asarray(x_traj, dtype=float)
    if x_traj.shape == (grid.n_fine + 1, N_STATES):
        fine = x_traj
    elif x_traj.shape == (grid.n_steps + 1, N_STATES):
        tf = np.arange(grid.n_fine + 1) * grid.h
        fine = np.column_stack([np.interp(tf, grid.times, x_traj[:, i]) for i in range(N_STATES)])
    else:
        raise ValueError(f"state trajectory shape {x_traj.shape} does not match the grid")
    u1, u2 = _control_arrays(u, grid)
    out = np.empty((grid.n_steps + 1, N_STATES))
    status, j = _backward_kernel(
        np.ascontiguousarray(fine), u1, u2, _as_params(p), _as_weights(w),
        grid.n_steps, grid.substeps, grid.dt, lam_T, out,
    )
    if status != _OK:
        raise NonfiniteState(f"non-finite costate at t = {j * grid.h:.6g}", node=j // grid.substeps)
    return out


def running_cost(x_traj, u, w) -> np.ndarray:
    x_traj = np.asarray(x_traj, dtype=float)
    u = np.asarray(u, dtype=float)
    wa = _as_weights(w)
    n_m = x_traj[:, 5] + x_traj[:, 6] + x_traj[:, 7]
    return wa[0] * x_traj[:, 1] + wa[1] * n_m + wa[2] * u[:, 0] ** 2 + wa[3] * u[:, 1] ** 2


def evaluate_objective(x_traj, u, w, grid: TimeGrid) -> float:
    """Composite trapezoidal rule on the grid nodes."""
    x_traj = np.asarray(x_traj, dtype=float)
    u = np.asarray(u, dtype=float)
    if len(x_traj) != grid.n_steps + 1 or len(u) != grid.n_steps + 1:
        raise ValueError("trajectory and controls must be aligned with the grid nodes")
    g = running_cost(x_traj, u, w)
    return float(grid.dt * (0.5 * g[0] + g[1:-1].sum() + 0.5 * g[-1]))


def characterize_on_grid(x_traj, lam_traj, p, w, u_max: float, pinned=(False, False)) -> np.ndarray:
    """Node-wise projected Hamiltonian minimizer; pinned controls are held at 0."""
    x = np.asarray(x_traj, dtype=float).T
    lam = np.asarray(lam_traj, dtype=float).T
    v1, v2 = stationary_controls(*x, *lam, _as_params(p), _as_weights(w))
    u = np.column_stack([np.clip(v1, 0.0, u_max), np.clip(v2, 0.0, u_max)])
    for i, pin in enumerate(pinned):
        if pin:
            u[:, i] = 0.0
    return u


def _l1_margin(new: np.ndarray, old: np.ndarray, tol: float) -> float:
    """min over columns of tol*||new||_1 - ||new - old||_1 (>= 0 means converged)."""
    return float(np.min(tol * np.abs(new).sum(axis=0) - np.abs(new - old).sum(axis=0)))


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    num = np.abs(new - old).sum(axis=0)
    den = np.abs(new).sum(axis=0)
    rel = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return float(rel.max())


def fbsm_solve(x0, p, w, grid: TimeGrid, cfg: FbsmConfig = FbsmConfig(), *,
               pinned=(False, False), u_init=None) -> FbsmSolution:
    """Forward-backward sweep for the two-control problem.

    Each iteration integrates the states with the current controls ``u``,
    integrates the costates backward, characterizes ``u_char`` node-wise and
    relaxes ``u <- theta*u_char + (1-theta)*u``. It stops once the
    characterized controls agree with the controls that produced (x, lam),
    and x, lam agree with the previous iteration, all in the relative
    l1 sense with tolerance ``cfg.rel_tol``. On convergence the controls are
    replaced by ``u_char`` and states and costates recomputed, so the returned
    (controls, states, adjoints) triple is mutually consistent and saturated
    nodes sit exactly on their bound.
    """
    x0 = _as_state_array(x0)
    u_max = cfg.u_max
    u = zero_controls(grid) if u_init is None else np.clip(np.array(u_init, dtype=float), 0.0, u_max)
    for i, pin in enumerate(pinned):
        if pin:
            u[:, i] = 0.0
    lam_T = transversality()
    x_prev = lam_prev = None
    history = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        x, fine = rk4_forward(x0, u, p, grid, return_fine=True)
        lam = rk4_backward(lam_T, fine, u, p, w, grid)
        u_char = characterize_on_grid(x, lam, p, w, u_max, pinned)

        rel = _relative_change(u_char, u)
        margin = _l1_margin(u_char, u, cfg.rel_tol)
        if x_prev is not None:
            rel = max(rel, _relative_change(x, x_prev), _relative_change(lam, lam_prev))
            margin = min(margin, _l1_margin(x, x_prev, cfg.rel_tol),
                         _l1_margin(lam, lam_prev, cfg.rel_tol))
        history.append(rel)
        log.debug("fbsm iter %d: max relative change %.3e", it, rel)
        if x_prev is not None and margin >= 0:
            converged = True
            break
        x_prev, lam_prev = x, lam
        u = cfg.relaxation * u_char + (1.0 - cfg.relaxation) * u

    if converged:
        # undamped final step: relaxed iterates only approach a saturated bound geometrically
        u = u_char
    else:
        log.warning("fbsm did not converge in %d iterations (last change %.3e)", cfg.max_iters, history[-1])
    x, fine = rk4_forward(x0, u, p, grid, return_fine=True)
    lam = rk4_backward(lam_T, fine, u, p, w, grid)
    u_char = characterize_on_grid(x, lam, p, w, u_max, pinned)

    return FbsmSolution(
        times=grid.times,
        states=x,
        adjoints=lam,
        controls=u,
        objective=evaluate_objective(x, u, w, grid),
        iterations=it,
        converged=converged,
        history=history,
        fixed_point_residual=_relative_change(u_char, u),
    )
