import functools

import numpy as np
import pytest

from uvlag import build_frame, get_problem
from uvlag.ulag import default_eps, default_gbar

PROBLEMS = ["P1", "P2", "P3", "P4", "P5", "P6"]


@functools.lru_cache(maxsize=None)
def setup(name):
    """(problem, frame, default eps, default g_bar) for a catalog problem."""
    p = get_problem(name)
    frame = build_frame(p)
    eps = default_eps(p, frame)
    return p, frame, eps, default_gbar(frame, eps)


@pytest.fixture(params=PROBLEMS)
def catalog_setup(request):
    return setup(request.param)


def close(a, b, tol=1e-12):
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), atol=tol, rtol=0)
