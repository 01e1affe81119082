import numpy as np
import pytest

from uvlag import PreconditionError, build_frame, get_problem
from uvlag.ulag import (dense_grid_oracle, grad_L_at_zero, inner_minimize,
                        marginal_subgradient_link, quadratic_lower_bound_check, radius_u,
                        sample_gbars, solver_settings, tilt_map)
from uvlag.funcmodel import eval_f

from conftest import PROBLEMS, close, setup


def test_radius_formula():
    p = get_problem("P1")
    assert radius_u(p, 0.6) == pytest.approx(0.8)


def test_p1_value_and_minimizer():
    p, f, _, _ = setup("P1")
    ev = inner_minimize(p, f, [0.3], np.zeros(2), 0.5)
    assert ev.value == pytest.approx(0.09, abs=1e-12)
    assert ev.single_cluster and close(ev.v, [0.0])


def test_p6_value_and_minimizer():
    p, f, _, _ = setup("P6")
    ev = inner_minimize(p, f, [0.1], np.zeros(2), 0.5)
    assert ev.value == pytest.approx(0.0, abs=1e-10)
    assert ev.single_cluster and close(ev.v, [0.01], 1e-9)
    assert dense_grid_oracle(p, f, [0.1], np.zeros(2), 0.5) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("name", PROBLEMS)
def test_base_point_identity(name):
    p, f, eps, _ = setup(name)
    for g in sample_gbars(f, eps, 3):
        ev = inner_minimize(p, f, np.zeros(f.m), g, eps)
        assert abs(ev.value - p.f_bar) <= 1e-9
        assert ev.single_cluster and max(ev.diameters) <= 1e-6
        assert np.linalg.norm(ev.v) <= 1e-9


@pytest.mark.parametrize("name", PROBLEMS)
def test_minimizers_feasible_and_upper_bound(name):
    p, f, eps, g = setup(name)
    rng = np.random.default_rng(0)
    for _ in range(5):
        u = rng.uniform(-0.3, 0.3, f.m)
        ev = inner_minimize(p, f, u, g, eps)
        assert all(np.linalg.norm(v) <= eps + 1e-12 for v in ev.minimizers)
        assert ev.value <= eval_f(p, f.point(u, np.zeros(f.p))) + 1e-12


def test_preconditions():
    p, f, _, g = setup("P1")
    with pytest.raises(PreconditionError):
        inner_minimize(p, f, [0.0], g, 1.0)
    with pytest.raises(PreconditionError):
        inner_minimize(p, f, [0.0], g, 0.0)


@pytest.mark.parametrize("name, gbar, expected", [
    ("P1", (0, 0), (0,)),
    ("P4", (2, 0), (2, 0)),
    ("P5", (0, 0.5), (0,)),
])
def test_grad_at_zero_examples(name, gbar, expected):
    p, f, eps, _ = setup(name)
    grad = grad_L_at_zero(p, f, np.array(gbar, float), eps)
    assert close(grad, expected, 1e-5 * (1 + np.linalg.norm(gbar)))


def test_qlb_equality_case_p2():
    p, f, eps, g = setup("P2")
    cert = quadratic_lower_bound_check(p, f, g, eps, samples=200)
    assert cert.passed
    assert cert.details["max_abs_slack"] <= 1e-8


def test_qlb_p1_slack_positive_off_zero():
    p, f, eps, g = setup("P1")
    cert = quadratic_lower_bound_check(p, f, g, eps, samples=64)
    assert cert.passed and cert.details["min_slack"] == pytest.approx(0.0, abs=1e-12)


def test_value_sandwich():
    p, f, eps, g = setup("P6")
    r = radius_u(p, eps)
    for u in np.linspace(-0.9 * r, 0.9 * r, 11):
        val = inner_minimize(p, f, [u], g, eps).value
        lower = p.f_bar + f.u_coords(g) @ [u] - 0.5 * p.theorem_rho * u * u
        assert lower - 1e-12 <= val <= eval_f(p, f.point([u], [0.0])) + 1e-12


@pytest.mark.parametrize("name, gbar, eps, s", [
    ("P1", (0, 0), 0.5, 0.0),
    ("P1", (0, 0), 0.5, 0.3),
    ("P5", (0, 0.5), 0.5, 0.9),
])
def test_tilt_examples(name, gbar, eps, s):
    p, f, _, _ = setup(name)
    ts = tilt_map(p, f, np.array(gbar, float), eps, [s])
    assert len(ts.minimizers) == 1 and close(ts.minimizers[0], [0.0], 1e-9)


def test_tilt_outside_e_rejected():
    p, f, _, _ = setup("P1")
    with pytest.raises(PreconditionError):
        tilt_map(p, f, np.zeros(2), 0.5, [0.7])


@pytest.mark.parametrize("name, u", [("P6", [0.1]), ("P1", [0.3]), ("P1", [0.0])])
def test_marginal_link(name, u):
    p, f, eps, g = setup(name)
    link = marginal_subgradient_link(p, f, np.zeros(2), 0.5, u)
    assert link.passed


def test_oracle_matches_on_2d_v():
    p, f, eps, g = setup("P3")
    fast = inner_minimize(p, f, np.zeros(0), g + np.array([0.1, -0.2]), eps).value
    dense = dense_grid_oracle(p, f, np.zeros(0), g + np.array([0.1, -0.2]), eps)
    assert abs(fast - dense) <= 1e-6


def test_solver_settings_restores_default():
    p, f, eps, g = setup("P1")
    with solver_settings(grid_n=11):
        assert inner_minimize(p, f, [0.2], g, eps).solver_log["grid_n"] == 11
    assert inner_minimize(p, f, [0.2], g, eps).solver_log["grid_n"] == 41
    with pytest.raises(ValueError):
        with solver_settings(grid_n=10):
            pass
