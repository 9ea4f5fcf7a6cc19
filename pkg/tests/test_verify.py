import math

import numpy as np
import pytest

from zika_control.model import StateVector
from zika_control.verify import (
    CheckReport,
    fd_adjoint_check,
    order_check,
    relative_error,
    richardson_order,
    sample_point,
)


def test_sample_point_ranges():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x, lam, u = sample_point(rng)
        assert np.all((x >= 1) & (x <= 1e7))
        assert np.all(np.abs(lam) <= 10)
        assert np.all((u >= 0) & (u <= 0.5))


def test_relative_error_floor():
    ref = np.array([1e6, 0.0])
    err = relative_error(np.array([1e6, 1e-4]), ref)
    assert err[0] == 0 and err[1] == pytest.approx(1e-4 / 1e-3)


def test_richardson_on_synthetic_errors():
    exact = np.ones(3)
    h = 0.1
    runs = [exact + 7.0 * (h / 2**k) ** 4 for k in range(3)]
    order, e1, e2 = richardson_order(*runs)
    assert order == pytest.approx(4.0, abs=1e-6)
    assert math.isnan(richardson_order(exact, exact, exact)[0])


def test_order_check_short_horizon():
    report = order_check(t_f=10.0, n_steps=100, substeps=(50, 100, 200))
    assert report.passed, report.line()
    assert 3.5 <= report.metric <= 4.5


def test_order_check_degenerate_is_skipped():
    p = np.zeros(15)
    p[14] = 1.0
    x0 = StateVector(S=1.0, I=0, W=0, M=0, Am=0, Sm=0, Em=0, Im=0)
    report = order_check(p=p, x0=x0, t_f=1.0, n_steps=10, substeps=(1, 2, 4))
    assert report.passed and math.isnan(report.metric)
    assert "skipped" in report.note


def test_fd_check_is_seeded():
    a = fd_adjoint_check(samples=5, seed=11)
    b = fd_adjoint_check(samples=5, seed=11)
    assert a.metric == b.metric


def test_report_line():
    text = CheckReport("x", False, 1.5e-3, "thr", samples=3, runtime_s=0.25, note="hi").line()
    assert text == "[FAIL] x: metric=1.500e-03 (thr), samples=3, 0.25s - hi"
