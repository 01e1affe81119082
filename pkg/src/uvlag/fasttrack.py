"""Minimizer selections along U, the manifold they trace, and the batteries
that test smoothness of the selection and partial smoothness of f."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .certificate import Certificate, Kind, jsonable
from .certify import regularity_certificate
from .errors import InvariantViolation, SolverError
from .funcmodel import Problem, eval_f, limiting_subdifferential
from .polytope import Subspace, hull_projection, subspace_gap
from .ulag import (VALUE_TOL, _objective, as_points, default_eps, default_gbar, fd_gradient,
                   inner_minimize)
from .uvframe import UVFrame

Array = NDArray[np.float64]

SELECTION_FD_STEP = 1e-4
JACOBIAN_TOL = 1e-4
RATIO_TOL = 1e-2
TANGENT_FD_STEP = 1e-5
ANGLE_TOL = 1e-4
FIT_TOL = 1e-8
IDENTITY_TOL = 1e-8
CURVATURE_BOUND = 10.0
# Steps of the sequence G(2^-k u0).  With u0 = 0.2 the last point keeps
# piece-value gaps of order u^2 above the oracle's active-set tolerance.
SEQUENCE_STEPS = 13


@dataclass(frozen=True)
class Part:
    passed: bool
    value: float
    tolerance: float
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return jsonable({"passed": self.passed, "value": self.value,
                         "tolerance": self.tolerance, "witness": self.witness,
                         "details": self.details})


@dataclass(frozen=True)
class Battery:
    """Named sub-checks; passes only if every part passes."""

    name: str
    parts: dict[str, Part]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.parts.values())

    @property
    def failing(self) -> list[str]:
        return [k for k, p in self.parts.items() if not p.passed]

    @property
    def witness(self) -> dict | None:
        for k in self.failing:
            return {"part": k, **(self.parts[k].witness or {})}
        return None

    @property
    def max_violation(self) -> float:
        return max((p.value - p.tolerance for p in self.parts.values()), default=0.0)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "failing": self.failing,
                "parts": {k: p.to_dict() for k, p in self.parts.items()}}


def _part(value: float, tol: float, witness: dict | None = None, **details) -> Part:
    ok = bool(value <= tol)
    return Part(ok, float(value), tol, None if ok else (witness or {"value": value}), details)


# ---------------------------------------------------------------------------
# trace

@dataclass(frozen=True, eq=False)
class TrajectoryTrace:
    problem: Problem
    frame: UVFrame
    eps: float
    u_grid: Array
    gbars: list[Array]
    v_of_u: Array
    L_values: Array          # (n_gbar, n_grid)
    selections: Array        # (n_gbar, n_grid, p), per-gbar representatives
    member: Array            # (n_gbar, n_grid) booleans
    jacobians: Array | None  # (n_grid, p, m) when the grid is a sorted 1-d line

    @property
    def selection_spread(self) -> float:
        """Largest distance between the selections of two sampled g_bar."""
        if self.selections.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.selections - self.selections[:1], axis=-1)))


def symmetric_grid(frame: UVFrame, radius: float = 0.2, n: int = 9) -> Array:
    """Points ``t e_1`` with t evenly spaced in [-radius, radius]; just 0 when U = {0}."""
    if frame.m == 0:
        return np.zeros((1, 0))
    return np.linspace(-radius, radius, n)[:, None] * np.eye(frame.m)[0]


def trace_fast_track(problem: Problem, frame: UVFrame, eps: float, u_grid: ArrayLike,
                     gbar_samples: list[ArrayLike]) -> TrajectoryTrace:
    """Select v(u) from W(u; g_v) and check it minimizes for every sampled g_bar."""
    if len(gbar_samples) < 3:
        raise ValueError("at least three g_bar samples are required")
    gbars = [np.asarray(g, dtype=float) for g in gbar_samples]
    grid = as_points(u_grid, frame.m)
    n_g, n_u = len(gbars), len(grid)
    L = np.empty((n_g, n_u))
    sel = np.empty((n_g, n_u, frame.p))
    member = np.zeros((n_g, n_u), dtype=bool)
    for i, g in enumerate(gbars):
        for j, u in enumerate(grid):
            ev = inner_minimize(problem, frame, u, g, eps)
            if not ev.single_cluster:
                raise SolverError(
                    f"W(u) has {len(ev.minimizers)} clusters at u={u.tolist()}, "
                    f"gbar={g.tolist()}: {[m.tolist() for m in ev.minimizers]}")
            L[i, j] = ev.value
            sel[i, j] = ev.v
    v = sel[0]
    for i, g in enumerate(gbars):
        for j, u in enumerate(grid):
            val = float(_objective(problem, frame, u, g)(v[j][None, :])[0])
            member[i, j] = val <= L[i, j] + VALUE_TOL
            if not member[i, j]:
                raise InvariantViolation("v(u) is not a minimizer for a sampled g_bar",
                                         {"u": u.tolist(), "gbar": g.tolist(),
                                          "v": v[j].tolist(), "gap": val - L[i, j]})
    zero = np.flatnonzero(np.linalg.norm(grid, axis=1) == 0)
    if zero.size and np.linalg.norm(v[zero[0]]) > 1e-9:
        raise InvariantViolation("v(0) != 0", {"v0": v[zero[0]].tolist()})
    jac = None
    if frame.m == 1 and n_u > 2 and np.all(np.diff(grid[:, 0]) > 0):
        jac = np.gradient(v, grid[:, 0], axis=0)[:, :, None]
    return TrajectoryTrace(problem, frame, eps, grid, gbars, v, L, sel, member, jac)


def _selection(trace: TrajectoryTrace) -> Callable[[Array], Array]:
    def v(u):
        return inner_minimize(trace.problem, trace.frame, u, trace.gbars[0], trace.eps).v
    return v


def check_smooth_selection(trace: TrajectoryTrace) -> Battery:
    """Jacobian of v at 0 and the o(|u|) ratio test."""
    frame = trace.frame
    if frame.m == 0:
        return Battery("smooth-selection", {"jacobian": _part(0.0, JACOBIAN_TOL),
                                            "ratio": _part(0.0, RATIO_TOL)})
    v = _selection(trace)
    h = SELECTION_FD_STEP
    jac = np.column_stack([(v(h * e) - v(-h * e)) / (2 * h) for e in np.eye(frame.m)])
    jnorm = float(np.linalg.norm(jac, 2)) if jac.size else 0.0
    e1 = np.eye(frame.m)[0]
    ratios = {t: float(np.linalg.norm(v(t * e1)) / t) for t in (1e-2, 1e-3)}
    decreasing = ratios[1e-3] <= ratios[1e-2]
    ratio_val = ratios[1e-3] if decreasing else np.inf
    return Battery("smooth-selection", {
        "jacobian": _part(jnorm, JACOBIAN_TOL, {"jacobian": jac}, jacobian=jac),
        "ratio": _part(ratio_val, RATIO_TOL, {"ratios": ratios},
                       ratios={str(k): r for k, r in ratios.items()}),
    })


# ---------------------------------------------------------------------------
# manifold

@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """Single chart ``G(u) = x_bar + Ubar u + Vbar v(u)``."""

    G: Callable[[Array], Array]
    jac0: Array
    tangent: Subspace
    normal: Subspace
    delta: float
    frame: UVFrame
    label: str


def _model(frame: UVFrame, v_map: Callable[[Array], Array], label: str,
           delta: float) -> ManifoldModel:
    def G(u):
        u = np.asarray(u, dtype=float).reshape(frame.m)
        return frame.point(u, v_map(u))

    n, m = frame.origin.size, frame.m
    h = TANGENT_FD_STEP
    jac = np.column_stack([(G(h * e) - G(-h * e)) / (2 * h) for e in np.eye(m)]) \
        if m else np.zeros((n, 0))
    if m and np.linalg.matrix_rank(jac, tol=1e-8) < m:
        raise InvariantViolation("dG(0) is rank deficient", {"jacobian": jac.tolist()})
    tangent = Subspace.span(jac.T, n) if m else Subspace.zero(n)
    return ManifoldModel(G, jac, tangent, tangent.complement(), delta, frame, label)


def build_manifold_model(problem: Problem, frame: UVFrame, eps: float | None = None,
                         gbar: ArrayLike | None = None, delta: float = 0.2) -> ManifoldModel:
    """The fast-track manifold traced by the minimizer selection."""
    eps = default_eps(problem, frame) if eps is None else eps
    g = default_gbar(frame, eps) if gbar is None else np.asarray(gbar, dtype=float)

    def v_map(u):
        return inner_minimize(problem, frame, u, g, eps).v

    return _model(frame, v_map, "fast-track", delta)


def explicit_manifold(frame: UVFrame, v_map: Callable[[Array], Array] | None = None,
                      label: str = "u-axis", delta: float = 0.2) -> ManifoldModel:
    """A chart from a given V-coordinate map; ``None`` gives the flat chart v = 0."""
    if v_map is None:
        def v_map(u):
            return np.zeros(frame.p)
    return _model(frame, v_map, label, delta)


def tangent_space(model: ManifoldModel) -> Subspace:
    """Column space of the finite-difference Jacobian of G at 0."""
    return model.tangent


def manifold_sequence(model: ManifoldModel, K: int = SEQUENCE_STEPS,
                      u0: ArrayLike | None = None) -> list[Array]:
    """``x_k = G(2^-k u0)`` for k = 1..K; u0 defaults to 0.2 e_1."""
    m = model.frame.m
    if u0 is None:
        u0 = 0.2 * np.eye(m)[0] if m else np.zeros(0)
    u0 = np.asarray(u0, dtype=float)
    return [model.G(u0 * 0.5 ** k) for k in range(1, K + 1)]


# ---------------------------------------------------------------------------
# batteries

def inner_semicontinuity_check(problem: Problem, manifold: ManifoldModel,
                               gbar_targets: list[ArrayLike] | None = None, K: int = SEQUENCE_STEPS,
                               u0: ArrayLike | None = None,
                               eps: float | None = None) -> Certificate:
    """Every target subgradient must be a limit of subgradients along the sequence.

    Targets default to the generators of df(x_bar) plus the centroid of the
    eps-relative interior.  For each target the nearest point of df(x_k) is
    found by exact hull projection; the distances must stop increasing from
    k = 3 on and end below 1e-4.
    """
    from .certify import sequence_verdict

    frame = manifold.frame
    if gbar_targets is None:
        eps = default_eps(problem, frame) if eps is None else eps
        gbar_targets = [*frame.subdiff.generators, default_gbar(frame, eps)]
    targets = [np.asarray(g, dtype=float) for g in gbar_targets]
    xs = manifold_sequence(manifold, K, u0)
    polys = [limiting_subdifferential(problem, x).polytope for x in xs]
    worst, witness, records = -np.inf, None, []
    for g in targets:
        projs = [hull_projection(p.generators, g) for p in polys]
        dists = [pr.distance for pr in projs]
        viol = sequence_verdict(dists)
        limit = 2 * projs[-1].point - projs[-2].point if K > 1 else projs[-1].point
        limit = np.round(limit, 9) + 0.0
        records.append({"target": g, "distances": dists, "limit": limit})
        worst = max(worst, viol)
        if witness is None and viol > 0:
            witness = {"target": g, "limit": limit, "plateau": dists[-1],
                       "distances": dists}
    return Certificate(
        kind=Kind.INNER_SEMICONTINUITY,
        parameters={"problem": problem.name, "manifold": manifold.label, "K": K,
                    "targets": len(targets)},
        max_violation=worst, tolerance=0.0, n_checked=len(targets), witness=witness,
        details={"targets": records},
    )


def _poly_features(U: Array, degree: int) -> Array:
    cols = [np.ones(len(U))]
    for d in range(1, degree + 1):
        for idx in combinations_with_replacement(range(U.shape[1]), d):
            cols.append(np.prod(U[:, list(idx)], axis=1))
    return np.column_stack(cols)


def _fit_grid(m: int, radius: float, n: int = 21) -> Array:
    if m == 0:
        return np.zeros((1, 0))
    axis = np.linspace(-radius, radius, n if m == 1 else 9)
    mesh = np.stack(np.meshgrid(*[axis] * m, indexing="ij"), axis=-1).reshape(-1, m)
    return mesh[np.linalg.norm(mesh, axis=1) <= radius + 1e-12]


def partial_smoothness_battery(problem: Problem, manifold: ManifoldModel,
                               radii: ArrayLike = (0.2,), eps: float | None = None,
                               K: int = SEQUENCE_STEPS) -> Battery:
    """Smooth restriction, regularity, normal space and subgradient continuity."""
    frame = manifold.frame
    radius = float(np.max(radii))
    grid = _fit_grid(frame.m, radius)
    pts = np.array([manifold.G(u) for u in grid])
    vals = np.asarray(eval_f(problem, pts), dtype=float)
    if frame.m:
        X = _poly_features(grid, 4)
        coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
        resid = np.abs(X @ coef - vals)
        k = int(np.argmax(resid))
        fit = _part(resid[k], FIT_TOL, {"u": grid[k], "residual": resid[k]})
    else:
        fit = _part(0.0, FIT_TOL)

    reg = regularity_certificate(problem, pts[:: max(1, len(pts) // 9)], Kind.LIMITING_EQUALS_REGULAR)
    regular = _part(reg.max_violation, reg.tolerance, reg.witness)

    gap = subspace_gap(manifold.normal, frame.V)
    normal = _part(gap, ANGLE_TOL, {"normal": manifold.normal.basis, "V": frame.V.basis})

    isc = inner_semicontinuity_check(problem, manifold, K=K, eps=eps)
    inner = _part(isc.max_violation, isc.tolerance, isc.witness,
                  targets=isc.details["targets"])
    return Battery(f"partial-smoothness/{manifold.label}",
                   {"i": fit, "ii": regular, "iii": normal, "iv": inner})


def c1_fast_track_battery(problem: Problem, frame: UVFrame, eps: float,
                          trace: TrajectoryTrace) -> Battery:
    """Gradient-jump modulus of L(.; g_bar) on the grid and the affine identity
    L(u; g) = L(u; h) - <g_v - h_v, v(u)> between sampled g, h."""
    grid = trace.u_grid
    jump, jump_w = 0.0, None
    spacing = 0.0
    if frame.m and len(grid) > 1:
        dist = np.linalg.norm(grid[:, None] - grid[None, :], axis=-1)
        spacing = float(np.min(dist[dist > 0]))
        adjacent = [(a, b) for a in range(len(grid)) for b in range(a + 1, len(grid))
                    if dist[a, b] <= spacing * (1 + 1e-9)]
        for g in trace.gbars:
            grads = [fd_gradient(problem, frame, u, g, eps) for u in grid]
            for a, b in adjacent:
                j = float(np.linalg.norm(grads[a] - grads[b]))
                if j > jump:
                    jump, jump_w = j, {"gbar": g, "u1": grid[a], "u2": grid[b],
                                       "grad1": grads[a], "grad2": grads[b]}
    bound = 10 * spacing * CURVATURE_BOUND
    jump_part = _part(jump - bound, 0.0, jump_w, jump=jump, bound=bound)

    worst, id_w = 0.0, None
    gv = [frame.v_coords(g) for g in trace.gbars]
    for a in range(len(gv)):
        for b in range(len(gv)):
            pred = trace.L_values[b] - trace.v_of_u @ (gv[a] - gv[b])
            err = np.abs(trace.L_values[a] - pred)
            k = int(np.argmax(err))
            if err[k] > worst:
                worst = float(err[k])
                id_w = {"u": grid[k], "gbar": trace.gbars[a], "ghat": trace.gbars[b],
                        "error": err[k]}
    return Battery("c1-fast-track", {
        "gradient-jump": jump_part,
        "identity": _part(worst, IDENTITY_TOL, id_w),
    })
