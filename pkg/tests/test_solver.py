import math

import mpmath as mp
import numpy as np
import pytest

from zika_control.errors import NonfiniteInput, NonfiniteState, ValidationError
from zika_control.model import ModelParams, StateVector
from zika_control.pmp import ObjectiveWeights, adjoint_rhs
from zika_control.solver import (
    FbsmConfig,
    TimeGrid,
    evaluate_objective,
    fbsm_solve,
    rk4_backward,
    rk4_forward,
    zero_controls,
)

from oracles import DEFAULT_X0, rhs_oracle, rk4_single_step_oracle, simpson

# oracle: one classical RK4 step from the default initial state, u = 0
STEP_01 = [741835.40167963059143, 9800.111451697461967, 1430452.6138057700582, 5.3229134653207461305,
           832603618.32142819801, 502876.1806004672009, 6531960.7268356749606, 1094655.5730996887074]
STEP_00005 = [2158827.9382465863081, 150.37951860479832032, 21715.721281790640415,
              0.00020166810513088040667, 1089961.1500681448313, 1090568.157245781891,
              6542047.6747829955264, 1090321.8070517277536]
SIMPSON_SIN = 1715351.813630044842  # oracle: int_0^160 10*1000*(1 + sin(t/7)) dt, n = 16000


def test_oracle_step_is_reproducible():
    step = rk4_single_step_oracle(lambda x: rhs_oracle(x), DEFAULT_X0, mp.mpf("0.0005"))
    np.testing.assert_allclose([float(v) for v in step], STEP_00005, rtol=1e-15)


def test_single_step_matches_oracle(x0, params):
    grid = TimeGrid(t_f=0.001, n_steps=2, substeps=1)
    x = rk4_forward(x0, zero_controls(grid), params, grid)
    np.testing.assert_array_equal(x[0], x0.as_array())
    np.testing.assert_allclose(x[1], STEP_00005, rtol=1e-11)


def test_coarse_step_matches_oracle_when_not_stiff(params):
    # At the default state one dt = 0.1 step is far outside RK4 stability; the
    # frozen STEP_01 values document that (Am jumps to ~8e8).
    assert STEP_01[4] > 500 * 1.09034e6
    start = [1e5, 40.0, 2e3, 3.0, 5e5, 1e4, 2e3, 500.0]
    u = (0.2, 0.1)
    expected = [start]
    for _ in range(2):
        expected.append(rk4_single_step_oracle(lambda y: rhs_oracle(y, *u), expected[-1], mp.mpf("0.1")))
    grid = TimeGrid(t_f=0.2, n_steps=2, substeps=1)
    x = rk4_forward(start, np.tile(u, (3, 1)), params, grid)
    np.testing.assert_allclose(x, [[float(v) for v in row] for row in expected], rtol=1e-11)


def test_substeps_compose_single_steps(x0, params):
    fine = TimeGrid(t_f=0.002, n_steps=2, substeps=2)
    single = TimeGrid(t_f=0.002, n_steps=4, substeps=1)
    a = rk4_forward(x0, zero_controls(fine), params, fine)
    b = rk4_forward(x0, zero_controls(single), params, single)
    np.testing.assert_allclose(a, b[::2], rtol=1e-14)


def _decay_setup():
    p = ModelParams.preset(mu_h=1.0)
    x0 = StateVector(S=1.0, I=0, W=0, M=1.0, Am=0, Sm=0, Em=0, Im=0)
    return p, x0


def test_scalar_decay_converges_at_fourth_order():
    p, x0 = _decay_setup()
    errs = []
    for n in (10, 20, 40):
        grid = TimeGrid(t_f=1.0, n_steps=n, substeps=1)
        x = rk4_forward(x0, zero_controls(grid), p, grid)
        errs.append(abs(x[-1, 3] - math.exp(-1.0)))
    assert errs[-1] < 1e-7
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(3.8 < q < 4.2 for q in orders), orders


def test_zero_dynamics_with_raw_parameter_array():
    # A raw array bypasses validation, so every rate can be zero.
    grid = TimeGrid(t_f=5.0, n_steps=10, substeps=3)
    x0 = np.arange(1.0, 9.0)
    p = np.zeros(15)
    p[14] = 1.0  # K only appears as a divisor
    x = rk4_forward(x0, zero_controls(grid), p, grid)
    assert np.array_equal(x, np.tile(x0, (11, 1)))


def test_backward_single_step_matches_oracle(params, weights):
    grid = TimeGrid(t_f=0.2, n_steps=2, substeps=1)
    x = np.array([1e5, 40.0, 2e3, 3.0, 5e5, 3e5, 2e4, 4e3])
    traj = np.tile(x, (3, 1))
    u = np.full((3, 2), [0.1, 0.3])
    lam_T = np.array([0.5, -1.0, 0.25, 2.0, 1e-3, 3.0, -0.5, 1.5])
    lam = rk4_backward(lam_T, traj, u, params, weights, grid)

    def f(l):
        return list(adjoint_rhs(0.0, x, np.array([float(v) for v in l]), (0.1, 0.3), params, weights))

    expected = rk4_single_step_oracle(f, list(lam_T), -0.1)
    np.testing.assert_array_equal(lam[-1], lam_T)
    np.testing.assert_allclose(lam[1], [float(v) for v in expected], rtol=1e-12, atol=1e-12)


def test_constant_objective(params):
    grid = TimeGrid(t_f=160.0, n_steps=1600, substeps=1)
    traj = np.zeros((1601, 8))
    traj[:, 1] = 10.0
    w = ObjectiveWeights(w1=10, w2=0, w3=1, w4=1)
    assert evaluate_objective(traj, zero_controls(grid), w, grid) == pytest.approx(160.0 * 10 * 10, rel=1e-14)


def test_trapezoid_against_simpson_oracle():
    grid = TimeGrid(t_f=160.0, n_steps=16000, substeps=1)
    traj = np.zeros((grid.n_steps + 1, 8))
    traj[:, 1] = 1000.0 * (1 + np.sin(grid.times / 7))
    w = ObjectiveWeights(w1=10, w2=0, w3=1, w4=1)
    oracle = simpson(lambda t: 10 * 1000 * (1 + mp.sin(t / 7)), 0, 160, 16000)
    assert float(oracle) == pytest.approx(SIMPSON_SIN, rel=1e-15)
    assert evaluate_objective(traj, zero_controls(grid), w, grid) == pytest.approx(SIMPSON_SIN, rel=1e-4)


def test_grid_and_config_validation():
    g = TimeGrid()
    assert (g.dt, g.h, g.n_fine) == (0.1, 0.1 / 200, 320000)
    assert g.times[-1] == 160.0 and len(g.times) == 1601
    for kw in (dict(t_f=0.0), dict(n_steps=0), dict(substeps=0)):
        with pytest.raises(ValidationError):
            TimeGrid(**kw)
    for kw in (dict(relaxation=0.0), dict(rel_tol=-1.0), dict(max_iters=0), dict(u_max=0.0)):
        with pytest.raises(ValidationError):
            FbsmConfig(**kw)


def test_forward_rejects_bad_inputs(x0, params):
    grid = TimeGrid(t_f=1.0, n_steps=2, substeps=1)
    with pytest.raises(ValueError):
        rk4_forward(x0, np.zeros((2, 2)), params, grid)
    u = zero_controls(grid)
    u[1, 0] = np.nan
    with pytest.raises(NonfiniteInput):
        rk4_forward(x0, u, params, grid)


def test_stiff_step_is_reported(x0, params):
    grid = TimeGrid(t_f=1.0, n_steps=10, substeps=1)
    with pytest.raises(NonfiniteState) as info:
        rk4_forward(x0, zero_controls(grid), params, grid)
    assert info.value.node is not None


SHORT = TimeGrid(t_f=20.0, n_steps=200, substeps=100)


@pytest.fixture(scope="module")
def short_solution(x0, params, weights):
    return fbsm_solve(x0, params, weights, SHORT)


def test_fbsm_improves_on_no_control(short_solution, x0, params, weights):
    x = rk4_forward(x0, zero_controls(SHORT), params, SHORT)
    assert short_solution.converged
    assert short_solution.objective < evaluate_objective(x, zero_controls(SHORT), weights, SHORT)


def test_fbsm_solution_is_a_fixed_point(short_solution):
    assert short_solution.fixed_point_residual < 1e-3
    assert np.all((short_solution.controls >= 0) & (short_solution.controls <= 0.5))
    np.testing.assert_array_equal(short_solution.adjoints[-1], 0.0)
    assert short_solution.history[-1] <= short_solution.history[0]


def test_fbsm_objective_is_locally_minimal(short_solution, x0, params, weights):
    u = short_solution.controls
    bump = np.sin(np.pi * SHORT.times / SHORT.t_f)[:, None] * np.array([1.0, 0.0])
    j0 = short_solution.objective
    for eps in (1e-3, -1e-3):
        v = np.clip(u + eps * bump, 0.0, 0.5)
        x = rk4_forward(x0, v, params, SHORT)
        assert evaluate_objective(x, v, weights, SHORT) >= j0 * (1 - 1e-9)


def test_pinned_control_stays_zero(x0, params, weights):
    sol = fbsm_solve(x0, params, weights, SHORT, pinned=(True, False))
    assert np.all(sol.controls[:, 0] == 0.0)


@pytest.mark.parametrize("big,bound", [(1e12, 1e-2), (1e16, 1e-6)])
def test_prohibitive_costs_reproduce_the_uncontrolled_run(x0, params, big, bound):
    # u2* ~ lam6*Sm/(2 w4) with lam6*Sm near 1e9 here, so 1e12 is not yet "infinite".
    sol = fbsm_solve(x0, params, ObjectiveWeights(w3=big, w4=big), SHORT)
    assert sol.converged
    assert np.max(sol.controls) <= bound
    free = rk4_forward(x0, zero_controls(SHORT), params, SHORT)
    np.testing.assert_allclose(sol.states, free, rtol=10 * bound)


def test_no_improving_direction_at_default_optimum(default_results):
    r = default_results["both"]
    u, spec = r.solution.controls, r.spec
    rng = np.random.default_rng(7)
    eps = 1e-4
    free = (u > eps) & (u < 0.5 - eps)

    def J(v):
        return evaluate_objective(rk4_forward(spec.x0, v, spec.params, spec.grid), v, spec.weights, spec.grid)

    for _ in range(3):
        d = np.where(free, rng.uniform(-1.0, 1.0, u.shape), 0.0)
        slope = (J(u + eps * d) - J(u - eps * d)) / (2 * eps)
        assert slope >= -1e-2 * np.linalg.norm(d)
