"""Experiment matrix: no control, single controls, both controls, weight sweeps."""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ScenarioError, ValidationError, ZikaControlError
from .model import ModelParams, StateVector
from .pmp import ObjectiveWeights
from .solver import FbsmConfig, FbsmSolution, TimeGrid, evaluate_objective, fbsm_solve, rk4_forward, zero_controls

log = logging.getLogger(__name__)

MODES = ("none", "u1_only", "u2_only", "both")
_PINNED = {"u1_only": (False, True), "u2_only": (True, False), "both": (False, False)}


@dataclass(frozen=True)
class ScenarioSpec:
    label: str
    mode: str = "both"
    weights: ObjectiveWeights = ObjectiveWeights()
    fbsm: FbsmConfig = FbsmConfig()
    params: ModelParams = ModelParams()
    x0: StateVector = StateVector.default_initial()
    grid: TimeGrid = TimeGrid()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError("mode", f"one of {MODES}", self.mode)


@dataclass
class ScenarioMetrics:
    J: float
    final_M: float
    peak_I: float
    time_to_90pct_mosquito_reduction: float   # nan if never reached
    effort_u1: float
    effort_u2: float


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    solution: FbsmSolution | None
    metrics: ScenarioMetrics | None
    error: str | None = None

    @property
    def label(self) -> str:
        return self.spec.label

    @property
    def ok(self) -> bool:
        return self.error is None


def _trapezoid(y: np.ndarray, dt: float) -> float:
    return float(dt * (0.5 * y[0] + y[1:-1].sum() + 0.5 * y[-1]))


def compute_metrics(states, controls, weights, grid: TimeGrid) -> ScenarioMetrics:
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    n_m = states[:, 5] + states[:, 6] + states[:, 7]
    below = np.nonzero(n_m <= 0.1 * n_m[0])[0]
    return ScenarioMetrics(
        J=evaluate_objective(states, controls, weights, grid),
        final_M=float(states[-1, 3]),
        peak_I=float(states[:, 1].max()),
        time_to_90pct_mosquito_reduction=float(grid.times[below[0]]) if below.size else math.nan,
        effort_u1=_trapezoid(controls[:, 0], grid.dt),
        effort_u2=_trapezoid(controls[:, 1], grid.dt),
    )


def _solve(spec: ScenarioSpec) -> FbsmSolution:
    grid = spec.grid
    if spec.mode == "none":
        u = zero_controls(grid)
        x = rk4_forward(spec.x0, u, spec.params, grid)
        return FbsmSolution(
            times=grid.times,
            states=x,
            adjoints=np.full_like(x, np.nan),
            controls=u,
            objective=evaluate_objective(x, u, spec.weights, grid),
            iterations=0,
            converged=True,
        )
    return fbsm_solve(spec.x0, spec.params, spec.weights, grid, spec.fbsm, pinned=_PINNED[spec.mode])


def run_scenario(spec: ScenarioSpec) -> ScenarioResult:
    """Run one scenario; solver errors are re-raised as :class:`ScenarioError`."""
    try:
        sol = _solve(spec)
    except ZikaControlError as exc:
        raise ScenarioError(spec.label, exc) from exc
    metrics = compute_metrics(sol.states, sol.controls, spec.weights, spec.grid)
    log.info("scenario %s: J=%.6e iterations=%d converged=%s", spec.label, metrics.J,
             sol.iterations, sol.converged)
    return ScenarioResult(spec, sol, metrics)


def _run_or_record(spec: ScenarioSpec) -> ScenarioResult:
    try:
        return run_scenario(spec)
    except ScenarioError as exc:
        log.error("%s", exc)
        return ScenarioResult(spec, None, None, error=str(exc.cause))


def run_many(specs, max_workers: int | None = None, keep_going: bool = False) -> list[ScenarioResult]:
    """Run independent scenarios concurrently; output order follows input order."""
    specs = list(specs)
    fn = _run_or_record if keep_going else run_scenario
    if max_workers == 1 or len(specs) <= 1:
        return [fn(s) for s in specs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, specs))


def compare_specs(base: ScenarioSpec) -> list[ScenarioSpec]:
    return [dataclasses.replace(base, label=mode, mode=mode) for mode in MODES]


def sweep_specs(base: ScenarioSpec, w34_values) -> list[ScenarioSpec]:
    values = [float(v) for v in w34_values]
    if not values:
        raise ValidationError("w34_values", "non-empty", values)
    if any(not (math.isfinite(v) and v > 0) for v in values):
        raise ValidationError("w34_values", "all > 0", values)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError("w34_values", "strictly ascending", values)
    specs = []
    for v in values:
        if base.mode == "u1_only":
            w = dataclasses.replace(base.weights, w3=v)
        elif base.mode == "u2_only":
            w = dataclasses.replace(base.weights, w4=v)
        else:
            w = dataclasses.replace(base.weights, w3=v, w4=v)
        specs.append(dataclasses.replace(base, label=f"{base.label}-w{v:g}", weights=w))
    return specs


def weight_sweep(base: ScenarioSpec, w34_values, max_workers: int | None = None) -> list[ScenarioResult]:
    """One run per cost weight; in single-control modes only that control's weight moves.

    Failed runs are kept in the list with ``error`` set.
    """
    return run_many(sweep_specs(base, w34_values), max_workers=max_workers, keep_going=True)


TABLE_COLUMNS = ("label", "mode", "J", "final_M", "peak_I", "t90_Nm", "effort_u1", "effort_u2",
                 "iterations", "converged")


def comparison_table(results) -> list[dict]:
    if not results:
        raise ValueError("comparison_table needs at least one result")
    rows = []
    for r in sorted(results, key=lambda r: r.label):
        if r.ok:
            m = r.metrics
            rows.append({
                "label": r.label, "mode": r.spec.mode, "J": m.J, "final_M": m.final_M,
                "peak_I": m.peak_I, "t90_Nm": m.time_to_90pct_mosquito_reduction,
                "effort_u1": m.effort_u1, "effort_u2": m.effort_u2,
                "iterations": r.solution.iterations, "converged": r.solution.converged,
            })
        else:
            rows.append({"label": r.label, "mode": r.spec.mode, "error": r.error})
    return rows


def format_table(rows: list[dict]) -> str:
    def cell(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)

    body = [[cell(row.get(c, "")) if "error" not in row or c in ("label", "mode")
             else ("ERROR: " + row["error"] if c == "J" else "") for c in TABLE_COLUMNS] for row in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(TABLE_COLUMNS)]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(TABLE_COLUMNS, widths)).rstrip()]
    lines.append("  ".join("-" * wd for wd in widths))
    lines += ["  ".join(v.ljust(wd) for v, wd in zip(b, widths)).rstrip() for b in body]
    return "\n".join(lines)
