"""UV-decomposition at the base point and its cross-checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvariantViolation
from .funcmodel import Problem, directional_derivative, limiting_subdifferential
from .polytope import (Polytope, Subspace, epsilon_relative_interior, max_feasible_eps,
                       normal_cone, span_of_differences, subspace_gap)

Array = NDArray[np.float64]

ANGLE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class UVFrame:
    """Orthonormal bases ``Ubar`` (n x m) and ``Vbar`` (n x p) anchored at x_bar."""

    U: Subspace
    V: Subspace
    origin: Array
    subdiff: Polytope
    gtilde: Array

    @property
    def Ubar(self) -> Array:
        return self.U.basis

    @property
    def Vbar(self) -> Array:
        return self.V.basis

    @property
    def m(self) -> int:
        return self.U.dim

    @property
    def p(self) -> int:
        return self.V.dim

    def u_coords(self, x: ArrayLike) -> Array:
        return np.asarray(x, dtype=float) @ self.Ubar

    def v_coords(self, x: ArrayLike) -> Array:
        return np.asarray(x, dtype=float) @ self.Vbar

    def point(self, u: ArrayLike, v: ArrayLike) -> Array:
        """``x_bar + Ubar u + Vbar v``."""
        u = np.asarray(u, dtype=float).reshape(self.m)
        v = np.asarray(v, dtype=float).reshape(self.p)
        return self.origin + self.Ubar @ u + self.Vbar @ v

    def max_eps(self) -> float:
        return max_feasible_eps(self.subdiff, self.V)

    def eps_ri(self, eps: float) -> Polytope:
        return epsilon_relative_interior(self.subdiff, self.V, eps)


def build_frame(problem: Problem, gtilde: ArrayLike | None = None) -> UVFrame:
    """V = span(df(x_bar) - gtilde), U = V-perp; gtilde defaults to the first generator."""
    poly = limiting_subdifferential(problem, problem.base_point).polytope.with_facets()
    gt = poly.generators[0] if gtilde is None else np.asarray(gtilde, dtype=float)
    vspace = span_of_differences(poly, gt)
    return UVFrame(U=vspace.complement(), V=vspace, origin=problem.base_point.copy(),
                   subdiff=poly, gtilde=gt)


def _support_gap(problem: Problem, w: Array) -> float:
    x = problem.base_point
    return directional_derivative(problem, x, w) + directional_derivative(problem, x, -w)


def u_prime_crosscheck(problem: Problem, frame: UVFrame | None = None,
                       eps: float | None = None, n_directions: int = 64,
                       seed: int = 0) -> Subspace:
    """U' = {w : df(x_bar)(-w) = -df(x_bar)(w)} checked against U and N(g deg).

    U' is the null space of all pairwise generator differences (the lineality
    space of the sublinear map w -> df(w) + df(-w)).  The subderivative
    oracle then confirms it: the gap vanishes on U' and is strictly positive
    on every direction orthogonal to it.
    """
    frame = frame or build_frame(problem)
    gens = frame.subdiff.generators
    diffs = (gens[:, None, :] - gens[None, :, :]).reshape(-1, problem.dim)
    uprime = Subspace.span(diffs, problem.dim).complement()

    rng = np.random.default_rng(seed)
    scale = 1.0 + float(np.abs(gens).max())
    for w in uprime.basis.T:
        if _support_gap(problem, w) > 1e-12 * scale:
            raise InvariantViolation("support gap nonzero on a U' basis vector",
                                     {"w": w.tolist()})
    for w in uprime.complement().basis.T:
        if _support_gap(problem, w) <= 1e-9:
            raise InvariantViolation("support gap vanishes off U'", {"w": w.tolist()})
    for _ in range(n_directions):
        w = rng.standard_normal(problem.dim)
        w /= np.linalg.norm(w)
        on_u = uprime.project(w)
        if uprime.dim and _support_gap(problem, on_u) > 1e-12 * scale:
            raise InvariantViolation("support gap nonzero inside U'", {"w": on_u.tolist()})
        off = w - on_u
        if np.linalg.norm(off) > 1e-6 and _support_gap(problem, w) <= 1e-12:
            raise InvariantViolation("support gap vanishes off U'", {"w": w.tolist()})

    if eps is None:
        max_eps = frame.max_eps()
        eps = 0.5 * max_eps if np.isfinite(max_eps) else 0.5 * problem.known_eps_bar
    g0 = frame.eps_ri(eps).centroid()
    ncone = normal_cone(frame.subdiff, g0)
    if not isinstance(ncone, Subspace):
        raise InvariantViolation("normal cone at an eps-ri point is not a subspace",
                                 {"g0": g0.tolist()})
    gaps = {"U_vs_Uprime": subspace_gap(frame.U, uprime),
            "U_vs_normal_cone": subspace_gap(frame.U, ncone),
            "Uprime_vs_normal_cone": subspace_gap(uprime, ncone)}
    if max(gaps.values()) > ANGLE_TOL:
        raise InvariantViolation("U, U' and the normal cone disagree",
                                 {"gaps": gaps, "U": frame.U.to_dict(),
                                  "Uprime": uprime.to_dict(), "normal_cone": ncone.to_dict()})
    return uprime


def gu_constancy(problem: Problem, frame: UVFrame) -> float:
    """Max spread of ``P_U g`` over generator pairs of the base-point subdifferential."""
    pu = frame.U.project(frame.subdiff.generators)
    diffs = pu[:, None, :] - pu[None, :, :]
    return float(np.linalg.norm(diffs, axis=-1).max())
