"""Structured nonsmooth functions with exact first-order oracles.

Three structures are supported:

* ``FiniteMax``: ``f = max_i f_i`` over smooth pieces;
* ``SmoothPlusAbs``: ``f = s(x) + sum_{j in J} |x_j|``;
* ``SmoothPlusIndicator``: ``f = s(x) + indicator_C(x)`` for a convex set ``C``.

All evaluators accept arrays of shape ``(..., n)`` so grids and sample
batches are evaluated in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import OracleUnavailable
from .polytope import Polytope

Array = NDArray[np.float64]

ACTIVE_TOL = 1e-10


@dataclass(frozen=True)
class SmoothPiece:
    """Closed-form C^2 function with value, gradient and Hessian."""

    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    hess: Callable[[Array], Array]
    label: str = ""


@dataclass(frozen=True)
class FiniteMax:
    pieces: tuple[SmoothPiece, ...]


@dataclass(frozen=True)
class SmoothPlusAbs:
    smooth: SmoothPiece
    abs_indices: tuple[int, ...]


@dataclass(frozen=True)
class SmoothPlusIndicator:
    smooth: SmoothPiece
    contains: Callable[[Array], Array]
    interior: Callable[[Array], Array]
    label: str = ""


Structure = Union[FiniteMax, SmoothPlusAbs, SmoothPlusIndicator]


@dataclass(frozen=True, eq=False)
class Problem:
    name: str
    dim: int
    structure: Structure
    base_point: Array
    known_eps_bar: float
    known_rho: float
    description: str = ""
    is_local_min: bool = True

    def __post_init__(self):
        object.__setattr__(self, "base_point", np.asarray(self.base_point, dtype=float))
        if self.dim < 1 or self.dim > 8:
            raise ValueError("dimension must lie in 1..8")
        if self.base_point.shape != (self.dim,):
            raise ValueError("base point has the wrong shape")
        if not self.known_eps_bar > 0:
            raise ValueError("eps_bar must be positive")
        if not 0 <= self.known_rho <= 2:
            raise ValueError("rho must lie in [0, 2]")
        if not np.isfinite(eval_f(self, self.base_point)):
            raise ValueError("f must be finite at the base point")

    @property
    def theorem_rho(self) -> float:
        """Strictly positive modulus used where a theorem needs rho > 0."""
        return self.known_rho if self.known_rho > 0 else 0.1

    @property
    def f_bar(self) -> float:
        return float(eval_f(self, self.base_point))


@dataclass(frozen=True, eq=False)
class SubdiffResult:
    point: Array
    polytope: Polytope
    regular_equals_limiting: bool


@dataclass(frozen=True, eq=False)
class Restriction:
    """``w -> f(base + basis @ w)`` for an orthonormal ``basis``."""

    basis: Array
    base: Array
    problem: Problem

    def __call__(self, w: ArrayLike) -> Array:
        w = np.asarray(w, dtype=float)
        return eval_f(self.problem, self.base + w @ self.basis.T)


def eval_f(problem: Problem, x: ArrayLike) -> Array | float:
    """Exact value of ``f`` at ``x`` (``+inf`` outside the domain)."""
    x = np.asarray(x, dtype=float)
    st = problem.structure
    if isinstance(st, FiniteMax):
        vals = np.stack([p.value(x) for p in st.pieces], axis=-1)
        out = vals.max(axis=-1)
    elif isinstance(st, SmoothPlusAbs):
        out = st.smooth.value(x)
        if st.abs_indices:
            out = out + np.abs(x[..., list(st.abs_indices)]).sum(axis=-1)
    elif isinstance(st, SmoothPlusIndicator):
        out = np.where(st.contains(x), st.smooth.value(x), np.inf)
    else:  # pragma: no cover
        raise TypeError(f"unknown structure {type(st).__name__}")
    return float(out) if np.ndim(out) == 0 else out


def active_pieces(problem: Problem, x: ArrayLike) -> list[int]:
    st = problem.structure
    if not isinstance(st, FiniteMax):
        raise TypeError("active pieces are defined for FiniteMax only")
    x = np.asarray(x, dtype=float)
    vals = np.array([float(p.value(x)) for p in st.pieces])
    return [i for i, v in enumerate(vals) if vals.max() - v <= ACTIVE_TOL]


def limiting_subdifferential(problem: Problem, x: ArrayLike) -> SubdiffResult:
    """Exact limiting subdifferential via the max rule or the sum rule."""
    x = np.asarray(x, dtype=float)
    st = problem.structure
    if isinstance(st, FiniteMax):
        gens = np.array([st.pieces[i].grad(x) for i in active_pieces(problem, x)])
    elif isinstance(st, SmoothPlusAbs):
        g0 = np.asarray(st.smooth.grad(x), dtype=float)
        choices = []
        for j in st.abs_indices:
            if abs(x[j]) <= ACTIVE_TOL:
                choices.append((j, (-1.0, 1.0)))
            else:
                g0 = g0.copy()
                g0[j] += np.sign(x[j])
        gens_list = []
        for signs in np.ndindex(*([2] * len(choices))):
            g = g0.copy()
            for (j, vals), s in zip(choices, signs):
                g[j] += vals[s]
            gens_list.append(g)
        gens = np.array(gens_list)
    elif isinstance(st, SmoothPlusIndicator):
        if not bool(st.contains(x)):
            raise OracleUnavailable(f"{problem.name}: point outside the domain")
        if not bool(st.interior(x)):
            raise OracleUnavailable(
                f"{problem.name}: indicator boundary has no polyhedral normal-cone description")
        gens = np.atleast_2d(st.smooth.grad(x))
    else:  # pragma: no cover
        raise TypeError(f"unknown structure {type(st).__name__}")
    return SubdiffResult(point=x, polytope=Polytope(gens), regular_equals_limiting=True)


def directional_derivative(problem: Problem, x: ArrayLike, w: ArrayLike) -> float:
    """Subderivative ``df(x)(w) = max <g, w>`` over the subdifferential."""
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        return 0.0
    return limiting_subdifferential(problem, x).polytope.support(w)


def kink_snap(problem: Problem, x: ArrayLike, rng: np.random.Generator) -> Array:
    """Move ``x`` onto a randomly chosen nonsmooth stratum near it.

    Used by samplers so that points with multi-valued subdifferentials are
    hit with positive probability.
    """
    x = np.array(x, dtype=float)
    st = problem.structure
    if isinstance(st, SmoothPlusAbs) and st.abs_indices:
        mask = rng.random(len(st.abs_indices)) < 0.5
        if not mask.any():
            mask[rng.integers(len(st.abs_indices))] = True
        for j, m in zip(st.abs_indices, mask):
            if m:
                x[j] = 0.0
    elif isinstance(st, FiniteMax) and len(st.pieces) >= 2:
        i, j = rng.choice(len(st.pieces), size=2, replace=False)
        pi, pj = st.pieces[i], st.pieces[j]
        for _ in range(50):
            gap = float(pi.value(x) - pj.value(x))
            if abs(gap) < 1e-15:
                break
            d = pi.grad(x) - pj.grad(x)
            dd = float(d @ d)
            if dd < 1e-14:
                break
            x = x - gap / dd * d
    return x


# ---------------------------------------------------------------------------
# catalog

def _quad(diag: ArrayLike, lin: ArrayLike | None = None, label: str = "") -> SmoothPiece:
    """``sum_i diag_i x_i^2 + lin . x``."""
    d = np.asarray(diag, dtype=float)
    c = np.zeros_like(d) if lin is None else np.asarray(lin, dtype=float)
    return SmoothPiece(
        value=lambda x: (d * x * x).sum(axis=-1) + x @ c,
        grad=lambda x: 2 * d * x + c,
        hess=lambda x: np.diag(2 * d),
        label=label,
    )


def _build_catalog() -> dict[str, Problem]:
    origin = np.zeros(2)
    return {
        "P1": Problem("P1", 2, SmoothPlusAbs(_quad([1, 0], label="x1^2"), (1,)),
                      origin, 1.0, 0.0, "abs-quad: x1^2 + |x2|"),
        "P2": Problem("P2", 2, SmoothPlusAbs(_quad([-0.5, 0], label="-0.5 x1^2"), (1,)),
                      origin, 1.0, 1.0, "neg-quad-abs: -0.5 x1^2 + |x2|",
                      is_local_min=False),
        "P3": Problem("P3", 2, SmoothPlusAbs(_quad([0, 0], label="0"), (0, 1)),
                      origin, 1.0, 0.0, "l1: |x1| + |x2|"),
        "P4": Problem("P4", 2, SmoothPlusAbs(_quad([1, 1], label="x1^2 + x2^2"), ()),
                      np.array([1.0, 0.0]), 1.0, 0.0, "smooth: x1^2 + x2^2 at (1, 0)",
                      is_local_min=False),
        "P5": Problem("P5", 2, FiniteMax((_quad([1, 0], [0, 2], "x1^2 + 2 x2"),
                                          _quad([1, 0], [0, -1], "x1^2 - x2"))),
                      origin, 1.0, 0.0, "asym-max: x1^2 + max(2 x2, -x2)"),
        "P6": Problem("P6", 2, FiniteMax((_quad([-1, 0], [0, 1], "x2 - x1^2"),
                                          _quad([1, 0], [0, -1], "x1^2 - x2"))),
                      origin, 1.0, 2.0, "parabolic-valley: |x2 - x1^2|"),
    }


CATALOG: dict[str, Problem] = _build_catalog()


def get_problem(name: str) -> Problem:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(CATALOG)}") from None
