import numpy as np
import pytest

from uvlag import OracleUnavailable, get_problem, limiting_subdifferential
from uvlag.funcmodel import (FiniteMax, Problem, Restriction, SmoothPlusIndicator,
                             _quad, directional_derivative, eval_f)

from conftest import PROBLEMS, close


def hull_set(result):
    return {tuple(np.round(g, 12)) for g in result.polytope.generators}


@pytest.mark.parametrize("name, x, expected", [
    ("P1", (0.3, -0.2), 0.29),
    ("P2", (0.0, 0.0), 0.0),
    ("P6", (0.1, 0.01), 0.0),
])
def test_eval_examples(name, x, expected):
    assert eval_f(get_problem(name), np.array(x)) == pytest.approx(expected, abs=1e-15)


def test_eval_is_vectorized():
    p = get_problem("P1")
    xs = np.array([[0.3, -0.2], [0.0, 1.0]])
    assert close(eval_f(p, xs), [0.29, 1.0])


def test_subdifferential_p1_origin():
    assert hull_set(limiting_subdifferential(get_problem("P1"), np.zeros(2))) == \
        {(0.0, -1.0), (0.0, 1.0)}


def test_subdifferential_smooth_point():
    res = limiting_subdifferential(get_problem("P4"), np.array([1.0, 2.0]))
    assert res.polytope.is_singleton
    assert close(res.polytope.generators[0], [2.0, 4.0])


def test_subdifferential_p6_on_parabola():
    res = limiting_subdifferential(get_problem("P6"), np.array([0.1, 0.01]))
    assert hull_set(res) == {(-0.2, 1.0), (0.2, -1.0)}
    assert res.regular_equals_limiting


def test_p1_generators_are_proximal_on_grid():
    # Every generator of df(0) satisfies the proximal inequality with rho = 0.1
    # on a 101 x 101 grid in B(0, 0.5).
    p = get_problem("P1")
    axis = np.linspace(-0.5, 0.5, 101)
    pts = np.stack(np.meshgrid(axis, axis), -1).reshape(-1, 2)
    pts = pts[np.linalg.norm(pts, axis=1) <= 0.5]
    fx = eval_f(p, pts)
    for g in limiting_subdifferential(p, np.zeros(2)).polytope.generators:
        assert np.all(fx >= pts @ g - 0.05 * np.sum(pts ** 2, axis=1) - 1e-15)


@pytest.mark.parametrize("w, expected", [((0, 1), 1.0), ((1, 0), 0.0)])
def test_directional_derivative_p1(w, expected):
    p = get_problem("P1")
    w = np.array(w, dtype=float)
    assert directional_derivative(p, np.zeros(2), w) == pytest.approx(expected)
    t = 1e-6
    assert (eval_f(p, t * w) - eval_f(p, np.zeros(2))) / t == pytest.approx(expected, abs=1e-5)


@pytest.mark.parametrize("name", PROBLEMS)
def test_zero_direction(name):
    p = get_problem(name)
    assert directional_derivative(p, p.base_point, np.zeros(2)) == 0.0


@pytest.mark.parametrize("name", PROBLEMS)
def test_prox_inequality_at_base_generators(name):
    p = get_problem(name)
    rng = np.random.default_rng(0)
    d = rng.standard_normal((4000, 2))
    d *= (rng.random(4000) ** 0.5 / np.linalg.norm(d, axis=1))[:, None] * p.known_eps_bar
    xs = p.base_point + d
    fx = eval_f(p, xs)
    for g in limiting_subdifferential(p, p.base_point).polytope.generators:
        viol = p.f_bar + d @ g - 0.5 * p.known_rho * np.sum(d ** 2, axis=1) - fx
        assert viol.max() <= 1e-9


@pytest.mark.parametrize("name", PROBLEMS)
def test_singleton_matches_fd_gradient_at_smooth_points(name):
    p = get_problem(name)
    x = p.base_point + np.array([0.137, 0.291])
    res = limiting_subdifferential(p, x)
    assert res.polytope.is_singleton
    h = 1e-6
    fd = [(eval_f(p, x + h * e) - eval_f(p, x - h * e)) / (2 * h) for e in np.eye(2)]
    assert close(res.polytope.generators[0], fd, 1e-5)


def test_restriction_matches_eval():
    p = get_problem("P6")
    r = Restriction(np.array([[0.0], [1.0]]), np.array([0.2, 0.0]), p)
    assert r(np.array([0.04])) == pytest.approx(0.0)
    assert r(np.array([0.5])) == pytest.approx(eval_f(p, np.array([0.2, 0.5])))


def test_indicator_structure_outside_and_boundary():
    ball = SmoothPlusIndicator(_quad([1, 1]), contains=lambda x: np.sum(x ** 2, -1) <= 1,
                               interior=lambda x: np.sum(x ** 2, -1) < 1 - 1e-12, label="ball")
    p = Problem("B", 2, ball, np.zeros(2), 1.0, 0.0)
    assert np.isinf(eval_f(p, np.array([2.0, 0.0])))
    assert close(limiting_subdifferential(p, np.array([0.5, 0.0])).polytope.generators[0],
                 [1.0, 0.0])
    with pytest.raises(OracleUnavailable):
        limiting_subdifferential(p, np.array([1.0, 0.0]))


def test_problem_invariants():
    with pytest.raises(ValueError):
        Problem("bad", 2, FiniteMax((_quad([1, 0]),)), np.zeros(2), 1.0, 2.5)
    with pytest.raises(ValueError):
        Problem("bad", 2, FiniteMax((_quad([1, 0]),)), np.zeros(2), 0.0, 0.5)
    with pytest.raises(KeyError):
        get_problem("P9")


def test_theorem_rho_substitutes_zero():
    assert get_problem("P1").theorem_rho == pytest.approx(0.1)
    assert get_problem("P2").theorem_rho == 1.0
