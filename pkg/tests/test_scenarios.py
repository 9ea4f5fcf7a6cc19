import math

import numpy as np
import pytest

from zika_control.errors import ScenarioError, ValidationError
from zika_control.model import StateVector
from zika_control.pmp import ObjectiveWeights
from zika_control.scenarios import (
    MODES,
    ScenarioSpec,
    compare_specs,
    comparison_table,
    compute_metrics,
    format_table,
    run_many,
    run_scenario,
    sweep_specs,
    weight_sweep,
)
from zika_control.solver import FbsmConfig, TimeGrid

SHORT = TimeGrid(t_f=20.0, n_steps=200, substeps=100)


def spec(mode="both", **kw):
    return ScenarioSpec(label=kw.pop("label", mode), mode=mode, grid=SHORT, **kw)


@pytest.fixture(scope="module")
def short_results():
    return run_many(compare_specs(spec()))


def test_modes_pin_the_right_controls(short_results):
    by = {r.label: r for r in short_results}
    assert [r.label for r in short_results] == list(MODES)
    assert np.all(by["none"].solution.controls == 0)
    assert np.isnan(by["none"].solution.adjoints).all()
    assert np.all(by["u1_only"].solution.controls[:, 1] == 0)
    assert np.all(by["u2_only"].solution.controls[:, 0] == 0)
    assert by["both"].solution.converged


def test_controlled_modes_beat_no_control(short_results):
    J = {r.label: r.metrics.J for r in short_results}
    assert J["both"] <= min(J["u1_only"], J["u2_only"]) * (1 + 1e-6)
    assert max(J["u1_only"], J["u2_only"]) < J["none"]


def test_metrics_by_hand():
    grid = TimeGrid(t_f=1.0, n_steps=4, substeps=1)
    states = np.zeros((5, 8))
    states[:, 1] = [0, 1, 3, 2, 1]
    states[:, 3] = [0, 0, 0, 0, 7]
    states[:, 5] = [100, 50, 9, 20, 5]
    controls = np.column_stack([np.full(5, 0.5), np.zeros(5)])
    m = compute_metrics(states, controls, ObjectiveWeights(w1=1, w2=0, w3=1, w4=1), grid)
    assert m.final_M == 7 and m.peak_I == 3
    assert m.time_to_90pct_mosquito_reduction == 0.5
    assert m.effort_u1 == pytest.approx(0.5) and m.effort_u2 == 0
    assert m.J == pytest.approx(0.25 * (0 + 1 + 3 + 2 + 0.5) + 0.25)
    states[:, 5] = 100
    assert math.isnan(compute_metrics(states, controls, ObjectiveWeights(), grid).time_to_90pct_mosquito_reduction)


def test_sweep_specs_labels_and_weights():
    specs = sweep_specs(spec("u1_only", label="s"), [100, 1000])
    assert [s.label for s in specs] == ["s-w100", "s-w1000"]
    assert [(s.weights.w3, s.weights.w4) for s in specs] == [(100, 100), (1000, 100)]
    both = sweep_specs(spec(), [50])
    assert (both[0].weights.w3, both[0].weights.w4) == (50, 50)


@pytest.mark.parametrize("values", [[], [100, 100], [1000, 100], [0, 1], [float("nan")]])
def test_sweep_rejects_bad_values(values):
    with pytest.raises(ValidationError):
        sweep_specs(spec(), values)


def test_bad_mode():
    with pytest.raises(ValidationError):
        ScenarioSpec(label="x", mode="u3")


def test_solver_failure_becomes_scenario_error():
    stiff = ScenarioSpec(label="stiff", mode="none", grid=TimeGrid(t_f=20, n_steps=200, substeps=1))
    with pytest.raises(ScenarioError) as info:
        run_scenario(stiff)
    assert info.value.label == "stiff"


def test_sweep_keeps_failed_runs():
    base = ScenarioSpec(label="s", mode="both", grid=TimeGrid(t_f=20, n_steps=200, substeps=1))
    results = weight_sweep(base, [100, 1000])
    assert [r.ok for r in results] == [False, False]
    text = format_table(comparison_table(results))
    assert "ERROR" in text


def test_parallel_matches_serial():
    specs = compare_specs(spec())[:3]
    a = run_many(specs, max_workers=1)
    b = run_many(specs, max_workers=3)
    for ra, rb in zip(a, b):
        assert ra.label == rb.label
        np.testing.assert_array_equal(ra.solution.states, rb.solution.states)


def test_table_layout(short_results):
    rows = comparison_table(list(reversed(short_results)))
    assert [r["label"] for r in rows] == sorted(MODES)
    text = format_table(rows).splitlines()
    assert text[0].split()[:3] == ["label", "mode", "J"]
    assert len(text) == 2 + len(MODES)
    with pytest.raises(ValueError):
        comparison_table([])


def test_larger_weights_mean_less_effort():
    results = weight_sweep(spec(label="w"), [100, 1000, 10000])
    efforts = [r.metrics.effort_u1 + r.metrics.effort_u2 for r in results]
    assert efforts[0] >= efforts[1] >= efforts[2]


def test_no_infection_scenario_stays_clean():
    x0 = StateVector(S=2e6, I=0, W=0, M=0, Am=1e6, Sm=1e6, Em=0, Im=0)
    r = run_scenario(spec(x0=x0, fbsm=FbsmConfig(max_iters=50)))
    assert np.all(r.solution.states[:, [1, 3, 6, 7]] == 0)
    assert np.all(r.solution.controls[:, 0] == 0)
