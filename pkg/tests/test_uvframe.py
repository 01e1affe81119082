import numpy as np
import pytest

from uvlag import build_frame, get_problem
from uvlag.polytope import Subspace, subspace_gap
from uvlag.uvframe import gu_constancy, u_prime_crosscheck

from conftest import PROBLEMS, close

E1 = Subspace(np.array([[1.0], [0.0]]))


@pytest.mark.parametrize("name, m, p", [("P1", 1, 1), ("P4", 2, 0), ("P3", 0, 2)])
def test_build_frame_dimensions(name, m, p):
    f = build_frame(get_problem(name))
    assert (f.m, f.p) == (m, p)


def test_p1_frame_axes():
    f = build_frame(get_problem("P1"))
    assert subspace_gap(f.U, E1) == 0.0
    assert close(np.abs(f.Vbar), [[0.0], [1.0]])


@pytest.mark.parametrize("name", PROBLEMS)
def test_frame_invariants(name):
    f = build_frame(get_problem(name))
    assert f.m + f.p == 2
    assert close(f.Ubar.T @ f.Vbar, np.zeros((f.m, f.p)))
    rng = np.random.default_rng(0)
    for x in rng.standard_normal((10, 2)):
        assert close(f.Ubar @ f.u_coords(x) + f.Vbar @ f.v_coords(x), x)


@pytest.mark.parametrize("name", PROBLEMS)
def test_gtilde_independence(name):
    p = get_problem(name)
    base = build_frame(p)
    gens = base.subdiff.generators
    rng = np.random.default_rng(5)
    for _ in range(10):
        gt = rng.dirichlet(np.ones(len(gens))) @ gens
        assert subspace_gap(build_frame(p, gt).V, base.V) <= 1e-8


@pytest.mark.parametrize("name, dim", [("P1", 1), ("P3", 0), ("P4", 2), ("P5", 1),
                                       ("P2", 1), ("P6", 1)])
def test_u_prime_matches_u(name, dim):
    p = get_problem(name)
    f = build_frame(p)
    up = u_prime_crosscheck(p, f)
    assert up.dim == dim
    assert subspace_gap(up, f.U) <= 1e-8


@pytest.mark.parametrize("name", PROBLEMS)
def test_gu_constancy(name):
    p = get_problem(name)
    assert gu_constancy(p, build_frame(p)) <= 1e-10
