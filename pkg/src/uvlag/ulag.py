"""Localized U-Lagrangian.

``L(u; g_v) = inf_{|v| <= eps} f(x_bar + Ubar u + Vbar v) - <g_bar, Vbar v>``

The infimum over the V-ball is taken by a dense grid followed by a
coordinate pattern search from every discrete local minimum of the grid.
"""

from __future__ import annotations

import contextlib
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize, minimize_scalar

from . import sampling
from .certificate import Certificate, Kind
from .errors import InvariantViolation, PreconditionError
from .funcmodel import Problem, eval_f, limiting_subdifferential
from .polytope import Polytope
from .uvframe import UVFrame

Array = NDArray[np.float64]

GRID_N = 41
FINAL_STEP = 1e-12
VALUE_TOL = 1e-6
CLUSTER_RADIUS = 1e-4
MAX_STARTS = 8
FD_STEP = 1e-5

_settings = {"grid_n": GRID_N}


@contextlib.contextmanager
def solver_settings(grid_n: int | None = None):
    """Temporarily change the default coarse-grid size of the inner solver."""
    old = dict(_settings)
    if grid_n is not None:
        if grid_n < 3 or grid_n % 2 == 0:
            raise ValueError("grid_n must be an odd integer >= 3")
        _settings["grid_n"] = grid_n
    try:
        yield
    finally:
        _settings.update(old)


@dataclass(frozen=True, eq=False)
class ULagEval:
    u: Array
    gbar: Array
    eps: float
    value: float
    minimizers: list[Array]
    diameters: list[float]
    solver_log: dict = field(default_factory=dict)

    @property
    def single_cluster(self) -> bool:
        return len(self.minimizers) == 1

    @property
    def v(self) -> Array:
        """Representative of the best cluster."""
        return self.minimizers[0]


@dataclass(frozen=True, eq=False)
class TiltSample:
    s: Array
    minimizers: list[Array]
    diameter: float


def as_points(a: ArrayLike, dim: int) -> Array:
    """Rows of ``dim`` coordinates; a zero-dimensional space gets one empty row."""
    a = np.asarray(a, dtype=float)
    if dim == 0:
        return np.zeros((max(1, a.shape[0]) if a.ndim else 1, 0))
    return a.reshape(-1, dim)


def radius_u(problem: Problem, eps: float) -> float:
    """Radius of the U-ball on which the lower bounds hold: sqrt(eps_bar^2 - eps^2)."""
    return math.sqrt(problem.known_eps_bar ** 2 - eps ** 2)


def default_eps(problem: Problem, frame: UVFrame) -> float:
    max_eps = frame.max_eps()
    eps = 0.5 * max_eps if math.isfinite(max_eps) else 0.5 * problem.known_eps_bar
    if eps >= problem.known_eps_bar:
        eps = 0.5 * problem.known_eps_bar
    return eps


def default_gbar(frame: UVFrame, eps: float) -> Array:
    return frame.eps_ri(eps).centroid()


def sample_gbars(frame: UVFrame, eps: float, k: int, seed: int = 0) -> list[Array]:
    """The centroid of the eps-relative interior followed by ``k - 1`` random members."""
    ri = frame.eps_ri(eps)
    rng = np.random.default_rng(seed)
    out = [ri.centroid()]
    gens = ri.generators
    for _ in range(k - 1):
        w = rng.dirichlet(np.ones(len(gens)))
        out.append(w @ gens)
    return out


def _objective(problem: Problem, frame: UVFrame, u: Array, gbar: Array):
    base = frame.origin + frame.Ubar @ u
    vbar = frame.Vbar
    gv = vbar.T @ gbar

    def obj(v: Array) -> Array:
        v = np.asarray(v, dtype=float)
        return eval_f(problem, base + v @ vbar.T) - v @ gv

    return obj


def _to_ball(v: Array, eps: float) -> Array:
    nrm = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = np.where(nrm > eps, eps / np.maximum(nrm, 1e-300), 1.0)
    return v * scale


def _poll_directions(p: int) -> Array:
    dirs = [s * np.eye(p)[i] for i in range(p) for s in (1.0, -1.0)]
    for i, j in itertools.combinations(range(p), 2):
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            d = np.zeros(p)
            d[i], d[j] = si, sj
            dirs.append(d / math.sqrt(2))
    return np.array(dirs)


def pattern_search(obj, v0: Array, eps: float, step: float,
                   final_step: float = FINAL_STEP, max_iter: int = 20000):
    """Complete-poll compass search on the closed eps-ball; halves the step on failure."""
    dirs = _poll_directions(v0.shape[0])
    v = v0.copy()
    fv = float(obj(v))
    it = 0
    while step >= final_step and it < max_iter:
        trials = _to_ball(v + step * dirs, eps)
        vals = obj(trials)
        k = int(np.argmin(vals))
        if vals[k] < fv:
            v, fv = trials[k], float(vals[k])
        else:
            step *= 0.5
        it += 1
    return v, fv, step, it


def _grid(p: int, eps: float, n: int) -> Array:
    axis = np.linspace(-eps, eps, n)
    mesh = np.meshgrid(*([axis] * p), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _grid_local_minima(vals: Array, p: int, n: int) -> list[int]:
    cube = vals.reshape((n,) * p)
    is_min = np.isfinite(cube)
    for ax in range(p):
        for shift in (1, -1):
            nb = np.full_like(cube, np.inf)
            src = [slice(None)] * p
            dst = [slice(None)] * p
            if shift == 1:
                src[ax], dst[ax] = slice(0, n - 1), slice(1, n)
            else:
                src[ax], dst[ax] = slice(1, n), slice(0, n - 1)
            nb[tuple(dst)] = cube[tuple(src)]
            is_min &= cube <= nb
    idx = np.flatnonzero(is_min.ravel())
    order = np.lexsort((idx, vals[idx]))
    return [int(i) for i in idx[order]]


def _cluster(points: Array, vals: Array, radius: float):
    order = np.lexsort(tuple(points.T[::-1]) + (vals,)) if points.shape[1] else np.argsort(vals, kind="stable")
    clusters: list[list[int]] = []
    for i in order:
        for c in clusters:
            if np.linalg.norm(points[i] - points[c[0]]) <= radius:
                c.append(int(i))
                break
        else:
            clusters.append([int(i)])
    reps, diams = [], []
    for c in clusters:
        pts = points[c]
        reps.append(pts[0].copy())
        if len(c) > 1:
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1).max()
        else:
            d = 0.0
        diams.append(float(d))
    return reps, diams


def inner_minimize(problem: Problem, frame: UVFrame, u: ArrayLike, gbar: ArrayLike,
                   eps: float, grid_n: int | None = None, final_step: float = FINAL_STEP,
                   value_tol: float = VALUE_TOL,
                   cluster_radius: float = CLUSTER_RADIUS) -> ULagEval:
    """Evaluate the U-Lagrangian at ``u`` and its V-space minimizer clusters."""
    if frame.p > 3:
        raise PreconditionError(f"dim V = {frame.p} exceeds the grid solver bound 3")
    if not 0 < eps < problem.known_eps_bar:
        raise PreconditionError(
            f"eps={eps} must lie in (0, eps_bar={problem.known_eps_bar})")
    grid_n = _settings["grid_n"] if grid_n is None else grid_n
    u = np.asarray(u, dtype=float).reshape(frame.m)
    gbar = np.asarray(gbar, dtype=float)
    p = frame.p
    obj = _objective(problem, frame, u, gbar)
    if p == 0:
        val = float(obj(np.zeros(0)))
        return ULagEval(u, gbar, eps, val, [np.zeros(0)], [0.0],
                        {"grid_n": 0, "starts": 0, "iterations": 0, "final_step": 0.0})

    grid = _grid(p, eps, grid_n)
    inside = np.linalg.norm(grid, axis=1) <= eps * (1 + 1e-15)
    gvals = np.full(grid.shape[0], np.inf)
    gvals[inside] = obj(grid[inside])
    starts = _grid_local_minima(gvals, p, grid_n)[:MAX_STARTS]
    h = 2 * eps / (grid_n - 1)

    refined, rvals, iters, last_step = [], [], 0, h
    for i in starts:
        v, fv, step, it = pattern_search(obj, grid[i], eps, h, final_step)
        refined.append(v)
        rvals.append(fv)
        iters += it
        last_step = step
    best = min(min(rvals), float(gvals.min()))

    near_grid = np.flatnonzero(gvals <= best + value_tol)[:2000]
    pts = np.vstack([np.array(refined), grid[near_grid]])
    vals = np.concatenate([np.array(rvals), gvals[near_grid]])
    keep = vals <= best + value_tol
    reps, diams = _cluster(pts[keep], vals[keep], cluster_radius)
    log = {"grid_n": grid_n, "starts": len(starts), "iterations": iters,
           "final_step": last_step}
    return ULagEval(u, gbar, eps, best, reps, diams, log)


def dense_grid_oracle(problem: Problem, frame: UVFrame, u: ArrayLike, gbar: ArrayLike,
                      eps: float, n: int = 2001, polish: bool = True) -> float:
    """Independent value of the U-Lagrangian: fine grid, then a bracketed polish.

    The polish stays inside the best grid cell (bounded Brent in 1-d,
    Nelder-Mead in 2-d), so the result never moves away from the grid
    minimum by more than one spacing.
    """
    u = np.asarray(u, dtype=float).reshape(frame.m)
    p = frame.p
    obj = _objective(problem, frame, u, np.asarray(gbar, dtype=float))
    if p == 0:
        return float(obj(np.zeros(0)))
    if n ** p > 2.5e7:
        raise PreconditionError(f"dense grid with {n}^{p} points is too large")
    axis = np.linspace(-eps, eps, n)
    h = axis[1] - axis[0]
    best_val, best_pt = np.inf, None
    if p == 1:
        vals = obj(axis[:, None])
        k = int(np.argmin(vals))
        best_val, best_pt = float(vals[k]), axis[k:k + 1]
    else:
        rest = _grid(p - 1, eps, n)
        for a in axis:
            pts = np.column_stack([np.full(rest.shape[0], a), rest])
            ok = np.linalg.norm(pts, axis=1) <= eps * (1 + 1e-15)
            if not ok.any():
                continue
            vals = obj(pts[ok])
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val, best_pt = float(vals[k]), pts[ok][k]
    if not polish:
        return best_val
    if p == 1:
        lo, hi = max(-eps, best_pt[0] - h), min(eps, best_pt[0] + h)
        res = minimize_scalar(lambda t: float(obj(np.array([t]))), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-13})
        return min(best_val, float(res.fun))
    res = minimize(lambda v: float(obj(_to_ball(v, eps))), best_pt, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000,
                            "initial_simplex": best_pt + h * np.vstack(
                                [np.zeros(p), np.eye(p)])})
    return min(best_val, float(res.fun))


def fd_gradient(problem: Problem, frame: UVFrame, u: ArrayLike, gbar: ArrayLike,
                eps: float, h: float = FD_STEP) -> Array:
    """Central finite-difference gradient of ``u -> L(u; g_v)``."""
    u = np.asarray(u, dtype=float).reshape(frame.m)
    grad = np.zeros(frame.m)
    for i in range(frame.m):
        e = np.zeros(frame.m)
        e[i] = h
        lp = inner_minimize(problem, frame, u + e, gbar, eps).value
        lm = inner_minimize(problem, frame, u - e, gbar, eps).value
        grad[i] = (lp - lm) / (2 * h)
    return grad


def grad_L_at_zero(problem: Problem, frame: UVFrame, gbar: ArrayLike, eps: float,
                   h: float = FD_STEP) -> Array:
    """Finite-difference gradient of the U-Lagrangian at 0; expected to equal g_bar_u."""
    return fd_gradient(problem, frame, np.zeros(frame.m), gbar, eps, h)


def quadratic_lower_bound_check(problem: Problem, frame: UVFrame, gbar: ArrayLike,
                                eps: float, samples: int = 1000, seed: int = 0,
                                rho: float | None = None) -> Certificate:
    """Sampled check of L(u) >= f(x_bar) + <g_u, u> - rho/2 |u|^2 on B_U(0, r)."""
    gbar = np.asarray(gbar, dtype=float)
    rho = problem.theorem_rho if rho is None else rho
    r = radius_u(problem, eps)
    gu = frame.u_coords(gbar)
    us = np.vstack([np.zeros((1, frame.m)), sampling.ball(samples - 1, frame.m, r, seed)])
    if frame.m == 0:
        us = us[:1]
    slack = np.empty(len(us))
    for k, u in enumerate(us):
        lval = inner_minimize(problem, frame, u, gbar, eps).value
        slack[k] = lval - (problem.f_bar + gu @ u - 0.5 * rho * (u @ u))
    worst = int(np.argmin(slack))
    viol = float(-slack[worst])
    witness = None
    if viol > 1e-8:
        witness = {"u": us[worst], "slack": slack[worst]}
    return Certificate(
        kind=Kind.QUADRATIC_LOWER_BOUND,
        parameters={"eps": eps, "eps_bar": problem.known_eps_bar, "rho": rho, "r": r,
                    "gbar": gbar, "samples": len(us), "seed": seed},
        max_violation=viol, tolerance=1e-8, n_checked=len(us), witness=witness,
        details={"min_slack": float(slack.min()), "max_abs_slack": float(np.abs(slack).max())},
    )


def _eps_ri_contains(frame: UVFrame, eps: float, g: Array) -> bool:
    ri = frame.eps_ri(eps)
    return ri.contains(g, tol=1e-10) and bool(np.all(ri.facet_slack(g) >= -1e-10))


def tilt_map(problem: Problem, frame: UVFrame, gbar: ArrayLike, eps: float,
             s: ArrayLike) -> TiltSample:
    """Minimizers of F(v) - <s, v> over the V-ball, for a tilt ``s`` in V-coordinates."""
    gbar = np.asarray(gbar, dtype=float)
    s = np.asarray(s, dtype=float).reshape(frame.p)
    tilted = gbar + frame.Vbar @ s
    if not _eps_ri_contains(frame, eps, tilted):
        raise PreconditionError("tilt s leaves the set E: s + g_v is outside P_V(D_eps f)")
    ev = inner_minimize(problem, frame, np.zeros(frame.m), tilted, eps)
    return TiltSample(s=s, minimizers=ev.minimizers, diameter=max(ev.diameters))


def sample_tilts(frame: UVFrame, gbar: ArrayLike, eps: float, k: int,
                 seed: int = 0) -> list[Array]:
    """Random tilts ``s`` with ``g_bar + Vbar s`` in the eps-relative interior."""
    gbar = np.asarray(gbar, dtype=float)
    ri = frame.eps_ri(eps)
    rng = np.random.default_rng(seed)
    out = [np.zeros(frame.p)]
    for _ in range(k - 1):
        g = rng.dirichlet(np.ones(len(ri.generators))) @ ri.generators
        out.append(frame.v_coords(g - gbar))
    return out


@dataclass(frozen=True, eq=False)
class LinkCheck:
    u: Array
    s: Array
    vhat: Array
    distance: float
    subdiff: Polytope

    @property
    def passed(self) -> bool:
        return self.distance <= 1e-5


def marginal_subgradient_link(problem: Problem, frame: UVFrame, gbar: ArrayLike,
                              eps: float, u: ArrayLike, h: float = FD_STEP) -> LinkCheck:
    """Check (s, 0) in dh(u, v_hat) for s = grad L(u) and some minimizer v_hat.

    ``dh(u, v) = {(g_u, g_v - g_bar_v) : g in df(x)}`` so the membership is
    ``Ubar s + Vbar g_bar_v in df(x_bar + Ubar u + Vbar v_hat)``.
    """
    gbar = np.asarray(gbar, dtype=float)
    u = np.asarray(u, dtype=float).reshape(frame.m)
    s = fd_gradient(problem, frame, u, gbar, eps, h)
    target = frame.Ubar @ s + frame.V.project(gbar)
    ev = inner_minimize(problem, frame, u, gbar, eps)
    checks = []
    for vhat in ev.minimizers:
        poly = limiting_subdifferential(problem, frame.point(u, vhat)).polytope
        checks.append(LinkCheck(u, s, vhat, poly.distance(target), poly))
    best = min(checks, key=lambda c: c.distance)
    if not best.passed:
        raise InvariantViolation("no minimizer carries (s, 0) in dh(u, v_hat)",
                                 {"u": u.tolist(), "s": s.tolist(),
                                  "distances": [c.distance for c in checks]})
    return best
