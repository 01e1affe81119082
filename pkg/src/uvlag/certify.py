"""Sampling-based certificates.

Every certificate is evidence, not proof: a pass is reported as "no
violation found at N samples".  Sampling is seeded (scrambled Sobol for
points, PCG64 for auxiliary draws) and the witness of a failure is the
first violating sample in generation order, so equal seeds give equal
certificates.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import sampling
from .certificate import Certificate, Kind
from .errors import OracleUnavailable, PreconditionError
from .funcmodel import Problem, eval_f, kink_snap, limiting_subdifferential
from .sets import SetModel
from .ulag import as_points, fd_gradient, inner_minimize, radius_u
from .uvframe import UVFrame

if TYPE_CHECKING:
    from .fasttrack import ManifoldModel

Array = NDArray[np.float64]

WINDOW_SLACK = 1e-12
PROX_TOL = 1e-9
MONO_TOL = 1e-8
HAUSDORFF_TOL = 1e-8
MAX_BATCHES = 8


def _first_violation(viol: Array, tol: float) -> int | None:
    bad = np.flatnonzero(viol > tol)
    return int(bad[0]) if bad.size else None


# ---------------------------------------------------------------------------
# functions

def _probe_triples(problem: Problem, gbar: Array, eps_bar: float):
    xb = problem.base_point
    gens = limiting_subdifferential(problem, xb).polytope.generators
    targets = []
    for i in range(problem.dim):
        e = np.zeros(problem.dim)
        e[i] = 0.5 * eps_bar
        targets += [xb + e, xb - e]
    for g in [gbar, *gens]:
        for t in targets:
            yield xb, g, t


def certify_function_prox_regularity(problem: Problem, gbar: ArrayLike, eps_bar: float,
                                     rho: float, n_samples: int = 10_000,
                                     seed: int = 0) -> Certificate:
    """Check f(x') >= f(x) + <g, x' - x> - rho/2 |x' - x|^2 on the eps_bar windows.

    Pairs ``(x, g)`` must satisfy |x - x_bar| < eps_bar, |g - g_bar| < eps_bar
    and |f(x) - f(x_bar)| < eps_bar; targets ``x'`` range over B(x_bar, eps_bar).
    Base-point probes along the coordinate axes come first, then quasi-random
    samples, most of them snapped onto a nonsmooth stratum.
    """
    gbar = np.asarray(gbar, dtype=float)
    n = problem.dim
    xb, fb = problem.base_point, problem.f_bar
    rng = np.random.default_rng(seed)

    X, G, T = [], [], []
    for x, g, t in _probe_triples(problem, gbar, eps_bar):
        X.append(x), G.append(g), T.append(t)
    n_probe = len(X)
    X, G, T = np.array(X), np.array(G), np.array(T)
    fx = eval_f(problem, X)
    skipped = 0
    # Draw batches until n_samples pairs fall inside the attentive windows.
    for batch in range(MAX_BATCHES):
        xs = sampling.ball(n_samples, n, eps_bar, seed + 31 * batch, center=xb)
        ts = sampling.ball(n_samples, n, eps_bar, seed + 31 * batch + 7919, center=xb)
        bx, bg, bt = [], [], []
        for x, t in zip(xs, ts):
            if rng.random() < 0.9:
                x = kink_snap(problem, x, rng)
            try:
                gens = limiting_subdifferential(problem, x).polytope.generators
            except OracleUnavailable:
                skipped += 1
                continue
            if rng.random() < 0.25:
                g = gens[rng.integers(len(gens))]
            else:
                g = rng.dirichlet(np.ones(len(gens))) @ gens
            bx.append(x), bg.append(g), bt.append(t)
        if not bx:
            continue
        bx, bg, bt = np.array(bx), np.array(bg), np.array(bt)
        bf = eval_f(problem, bx)
        window = ((np.linalg.norm(bx - xb, axis=1) < eps_bar - WINDOW_SLACK)
                  & (np.linalg.norm(bg - gbar, axis=1) < eps_bar - WINDOW_SLACK)
                  & (np.abs(bf - fb) < eps_bar - WINDOW_SLACK))
        skipped += int((~window).sum())
        X = np.vstack([X, bx[window]])
        G = np.vstack([G, bg[window]])
        T = np.vstack([T, bt[window]])
        fx = np.concatenate([fx, bf[window]])
        if len(X) - n_probe >= n_samples:
            break
    X, G, T, fx = X[:n_probe + n_samples], G[:n_probe + n_samples], \
        T[:n_probe + n_samples], fx[:n_probe + n_samples]
    d = T - X
    viol = fx + np.einsum("ij,ij->i", G, d) - 0.5 * rho * np.einsum("ij,ij->i", d, d) \
        - eval_f(problem, T)
    k = _first_violation(viol, PROX_TOL)
    witness = None
    if k is not None:
        witness = {"x": X[k], "g": G[k], "x_prime": T[k], "violation": viol[k], "index": k}
    return Certificate(
        kind=Kind.PROX_REG_FUNCTION,
        parameters={"problem": problem.name, "gbar": gbar, "eps_bar": eps_bar, "rho": rho,
                    "n_samples": n_samples, "seed": seed},
        max_violation=float(viol.max()), tolerance=PROX_TOL, n_checked=len(viol),
        witness=witness, n_skipped=skipped,
    )


# ---------------------------------------------------------------------------
# sets

def _points_in(cset: SetModel, center: Array, radius: float, n: int, seed: int,
               rng: np.random.Generator, open_ball: bool) -> Array:
    pts = sampling.ball(n, cset.dim, radius, seed, center=center)
    snap = rng.random(n) < 0.5
    if snap.any():
        pts[snap] = cset.to_boundary(pts[snap], rng)
    dist = np.linalg.norm(pts - center, axis=1)
    inside = (dist < radius - WINDOW_SLACK) if open_ball else (dist <= radius)
    return pts[inside & cset.contains(pts)]


def certify_set_prox_regularity(cset: SetModel, xbar: ArrayLike, wbar: ArrayLike,
                                eps: float, rho: float, n_samples: int = 2000,
                                n_targets: int = 64, seed: int = 0) -> Certificate:
    """Check <w, x' - x> <= rho/2 |x' - x|^2 for x' in C near x_bar.

    Pairs (x, w) range over x in int B(x_bar, eps) and w in N_C(x) with
    |w - w_bar| < eps; each pair is tested against ``n_targets`` points x'
    of C within B(x_bar, eps).
    """
    xbar = np.asarray(xbar, dtype=float)
    wbar = np.asarray(wbar, dtype=float)
    rng = np.random.default_rng(seed)
    targets = _points_in(cset, xbar, eps, 8 * n_targets, seed + 104729, rng,
                         open_ball=False)[:n_targets]
    targets = np.vstack([xbar[None, :], targets])

    pairs_x, pairs_w = [xbar], [wbar]
    skipped = 0
    for batch in range(MAX_BATCHES):
        xs = _points_in(cset, xbar, eps, n_samples, seed + 31 * batch, rng, open_ball=True)
        for x in xs:
            w = cset.sample_normal(x, wbar, eps, rng)
            if w is None:
                skipped += 1
                continue
            pairs_x.append(x)
            pairs_w.append(w)
        if len(pairs_x) > n_samples:
            break
    pairs_x, pairs_w = pairs_x[:n_samples + 1], pairs_w[:n_samples + 1]
    X, W = np.array(pairs_x), np.array(pairs_w)
    d = targets[None, :, :] - X[:, None, :]
    viol = np.einsum("pk,ptk->pt", W, d) - 0.5 * rho * np.einsum("ptk,ptk->pt", d, d)
    flat = viol.ravel()
    k = _first_violation(flat, PROX_TOL)
    witness = None
    if k is not None:
        i, j = divmod(k, targets.shape[0])
        witness = {"x": X[i], "w": W[i], "x_prime": targets[j], "violation": flat[k]}
    return Certificate(
        kind=Kind.PROX_REG_SET,
        parameters={"set": cset.describe(), "xbar": xbar, "wbar": wbar, "eps": eps,
                    "rho": rho, "n_samples": n_samples, "n_targets": n_targets,
                    "seed": seed},
        max_violation=float(flat.max()), tolerance=PROX_TOL, n_checked=flat.size,
        witness=witness, n_skipped=skipped,
    )


def certify_product_set(set_d: SetModel, set_e: SetModel, points, directions,
                        eps: float, rho: float, n_samples: int = 2000,
                        seed: int = 0) -> Certificate:
    """Certify D x E first, then the factor D with the same (eps, rho)."""
    from .sets import Product

    xbar, ybar = (np.asarray(p, dtype=float) for p in points)
    wbar, zbar = (np.asarray(p, dtype=float) for p in directions)
    product = Product(set_d, set_e)
    whole = certify_set_prox_regularity(product, np.concatenate([xbar, ybar]),
                                        np.concatenate([wbar, zbar]), eps, rho,
                                        n_samples, seed=seed)
    if not whole.passed:
        raise PreconditionError("the product set is not certified with (eps, rho)")
    factor = certify_set_prox_regularity(set_d, xbar, wbar, eps, rho, n_samples, seed=seed)
    return Certificate(
        kind=Kind.PRODUCT_SET,
        parameters={"D": set_d.describe(), "E": set_e.describe(), "eps": eps, "rho": rho,
                    "n_samples": n_samples, "seed": seed},
        max_violation=factor.max_violation, tolerance=factor.tolerance,
        n_checked=factor.n_checked, witness=factor.witness, n_skipped=factor.n_skipped,
        details={"product": whole.to_dict(), "factor": factor.to_dict()},
    )


def certify_perturbation(cset: SetModel, xbar: ArrayLike, vbar: ArrayLike, eps_bar: float,
                         rho: float, beta: float, n_points: int = 10,
                         n_samples: int = 1000, seed: int = 0) -> Certificate:
    """Re-certify C at perturbed (x~, v~) with radius eps_bar - beta."""
    if not 0 < beta < eps_bar:
        raise PreconditionError("beta must lie in (0, eps_bar)")
    xbar = np.asarray(xbar, dtype=float)
    vbar = np.asarray(vbar, dtype=float)
    base = certify_set_prox_regularity(cset, xbar, vbar, eps_bar, rho, n_samples, seed=seed)
    if not base.passed:
        raise PreconditionError("base certificate fails; perturbation claim does not apply")
    rng = np.random.default_rng(seed + 1)
    cands = _points_in(cset, xbar, beta, 8 * n_points, seed + 3, rng, open_ball=False)
    centers = [(xbar, vbar)]
    for x in cands:
        if len(centers) >= n_points:
            break
        v = cset.sample_normal(x, vbar, beta, rng)
        if v is not None:
            centers.append((x, v))
    radius = eps_bar - beta
    worst, witness, checked = -math.inf, None, 0
    for i, (xt, vt) in enumerate(centers):
        cert = certify_set_prox_regularity(cset, xt, vt, radius, rho, n_samples, seed=seed + i)
        checked += cert.n_checked
        if cert.max_violation > worst:
            worst = cert.max_violation
        if witness is None and not cert.passed:
            witness = {"x_tilde": xt, "v_tilde": vt, "inner": cert.witness}
    return Certificate(
        kind=Kind.PERTURBED,
        parameters={"set": cset.describe(), "xbar": xbar, "vbar": vbar, "eps_bar": eps_bar,
                    "rho": rho, "beta": beta, "radius": radius, "n_points": len(centers),
                    "seed": seed},
        max_violation=worst, tolerance=PROX_TOL, n_checked=checked, witness=witness,
        details={"centers": [{"x_tilde": x, "v_tilde": v} for x, v in centers]},
    )


def ball_inclusion_check(ybar: ArrayLike, alpha: float, beta: float,
                         n_samples: int = 10_000, seed: int = 0) -> Certificate:
    """|z - y_bar| <= alpha for y in B(y_bar, beta), z in B(y, alpha - beta)."""
    if not 0 < beta < alpha:
        raise PreconditionError("ball inclusion needs 0 < beta < alpha")
    ybar = np.asarray(ybar, dtype=float)
    n = ybar.size
    dirs = np.vstack([np.eye(n), -np.eye(n)])
    tight_y = ybar + beta * dirs
    tight_z = tight_y + (alpha - beta) * dirs
    ys = sampling.ball(n_samples, n, beta, seed, center=ybar)
    zs = ys + sampling.ball(n_samples, n, alpha - beta, seed + 1)
    Y = np.vstack([tight_y, ys])
    Z = np.vstack([tight_z, zs])
    viol = np.linalg.norm(Z - ybar, axis=1) - alpha
    tol = 1e-12 * max(1.0, alpha)
    k = _first_violation(viol, tol)
    witness = None if k is None else {"y": Y[k], "z": Z[k], "violation": viol[k]}
    return Certificate(
        kind=Kind.BALL_INCLUSION,
        parameters={"ybar": ybar, "alpha": alpha, "beta": beta, "n_samples": n_samples,
                    "seed": seed},
        max_violation=float(viol.max()), tolerance=tol, n_checked=len(viol), witness=witness,
    )


# ---------------------------------------------------------------------------
# U-Lagrangian localizations

def estimate_W_lipschitz(problem: Problem, frame: UVFrame, gbar: ArrayLike, eps: float,
                         grid: ArrayLike, bound: float | None = None) -> Certificate:
    """Empirical Lipschitz constant of the minimizer map u -> W(u) on the Theta window."""
    gbar = np.asarray(gbar, dtype=float)
    grid = as_points(grid, frame.m)
    r = radius_u(problem, eps)
    us, ws = [], []
    for u in grid:
        if np.linalg.norm(u) >= r:
            continue
        ev = inner_minimize(problem, frame, u, gbar, eps)
        if abs(ev.value - problem.f_bar) >= r:
            continue
        us.append(u)
        ws.append(ev.minimizers)
    c, worst = 0.0, None
    for i in range(len(us)):
        for j in range(i + 1, len(us)):
            du = np.linalg.norm(us[i] - us[j])
            if du == 0:
                continue
            for vi in ws[i]:
                for vj in ws[j]:
                    ratio = float(np.linalg.norm(vi - vj) / du)
                    if ratio > c:
                        c, worst = ratio, (us[i], vi, us[j], vj)
    diam = 0.0
    if len(us) > 1:
        arr = np.array(us)
        diam = float(np.linalg.norm(arr[:, None] - arr[None, :], axis=-1).max())
    viol = 0.0 if bound is None else c - bound
    witness = None
    if worst is not None and viol > 0:
        witness = {"u1": worst[0], "v1": worst[1], "u2": worst[2], "v2": worst[3]}
    return Certificate(
        kind=Kind.W_LIPSCHITZ,
        parameters={"problem": problem.name, "gbar": gbar, "eps": eps, "r": r,
                    "grid_points": len(grid), "bound": bound},
        max_violation=viol, tolerance=0.0, n_checked=len(us), witness=witness,
        details={"c": c, "grid_diameter": diam, "points_in_theta": len(us)},
    )


def certify_localization_monotonicity(problem: Problem, frame: UVFrame, gbar: ArrayLike,
                                      eps: float, rho_hat: float, n_points: int = 32,
                                      seed: int = 0) -> Certificate:
    """<s1 - s0, u1 - u0> + rho_hat |u1 - u0|^2 >= 0 on the L-attentive r-window."""
    gbar = np.asarray(gbar, dtype=float)
    r = radius_u(problem, eps)
    gu = frame.u_coords(gbar)
    l0 = inner_minimize(problem, frame, np.zeros(frame.m), gbar, eps).value
    cand = np.vstack([np.zeros((1, frame.m)),
                      sampling.ball(n_points - 1, frame.m, r, seed)]) if frame.m else np.zeros((1, 0))
    us, ss, skipped = [], [], 0
    for u in cand:
        if np.linalg.norm(u) >= r - WINDOW_SLACK:
            skipped += 1
            continue
        lu = inner_minimize(problem, frame, u, gbar, eps).value
        s = fd_gradient(problem, frame, u, gbar, eps)
        if abs(lu - l0) >= r - WINDOW_SLACK or np.linalg.norm(s - gu) >= r - WINDOW_SLACK:
            skipped += 1
            continue
        us.append(u)
        ss.append(s)
    worst, witness, checked = -math.inf, None, 0
    for i in range(len(us)):
        for j in range(i, len(us)):
            du = us[j] - us[i]
            val = float((ss[j] - ss[i]) @ du + rho_hat * du @ du)
            checked += 1
            if -val > worst:
                worst = -val
            if witness is None and -val > MONO_TOL:
                witness = {"u0": us[i], "u1": us[j], "s0": ss[i], "s1": ss[j], "value": val}
    return Certificate(
        kind=Kind.MONOTONICITY,
        parameters={"problem": problem.name, "gbar": gbar, "eps": eps, "rho_hat": rho_hat,
                    "r": r, "n_points": n_points, "seed": seed},
        max_violation=worst, tolerance=MONO_TOL, n_checked=checked, witness=witness,
        n_skipped=skipped,
    )


# ---------------------------------------------------------------------------
# section-5 assumptions

def one_sided_derivative(problem: Problem, x: Array, w: Array, t: float = 1e-5) -> float:
    """One-sided derivative of f at x along w from three difference quotients.

    The quotients at t, t/2, t/4 are fitted by ``a/t + d + c t``.  The ``a/t``
    term absorbs a point that sits a rounding distance off a kink, the
    ``c t`` term absorbs curvature; ``d`` is the derivative.
    """
    f0 = float(eval_f(problem, x))
    ts = np.array([t, t / 2, t / 4])
    q = np.array([(float(eval_f(problem, x + s * w)) - f0) / s for s in ts])
    basis = np.column_stack([1 / ts, np.ones(3), ts])
    return float(np.linalg.solve(basis, q)[1])


def regular_limiting_gap(problem: Problem, x: ArrayLike, n_dirs: int = 64,
                         seed: int = 0) -> float:
    """Hausdorff gap between the oracle subdifferential and the regular one.

    For a regular point the regular subdifferential has support function
    ``df(x)``, so the gap is sup over unit w of |sigma(w) - df(x)(w)|, with
    df estimated from difference quotients independently of the oracle.
    """
    x = np.asarray(x, dtype=float)
    poly = limiting_subdifferential(problem, x).polytope
    dirs = np.vstack([np.eye(problem.dim), -np.eye(problem.dim),
                      sampling.sphere(n_dirs, problem.dim, seed)])
    gaps = [abs(poly.support(w) - one_sided_derivative(problem, x, w)) for w in dirs]
    return float(max(gaps))


def regularity_certificate(problem: Problem, points: ArrayLike, kind: Kind = Kind.LIMITING_EQUALS_REGULAR,
                           seed: int = 0) -> Certificate:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    gaps = np.array([regular_limiting_gap(problem, x, seed=seed) for x in pts])
    k = _first_violation(gaps, HAUSDORFF_TOL)
    witness = None if k is None else {"x": pts[k], "gap": gaps[k]}
    return Certificate(kind=kind, parameters={"problem": problem.name, "points": len(pts)},
                       max_violation=float(gaps.max()), tolerance=HAUSDORFF_TOL,
                       n_checked=len(pts), witness=witness)


def sequence_verdict(dists: ArrayLike, final_tol: float = 1e-4, after: int = 3) -> float:
    """Violation of "nonincreasing from step ``after`` on, last value <= final_tol".

    Steps are numbered from 1; a value <= 0 means the sequence passes.
    """
    d = np.asarray(dists, dtype=float)
    tail = d[after - 1:]
    rise = float(np.max(np.diff(tail))) if tail.size > 1 else 0.0
    return max(float(d[-1]) - final_tol, rise - 1e-12)


def check_manifold_assumptions(problem: Problem, manifold: ManifoldModel, eps: float,
                               radii: ArrayLike = (0.2,), n_sequence: int = 13) -> dict[str, Certificate]:
    """Regularity on M, interior selection of v(u), and the inner-limit inclusion of
    boundary subgradients, keyed "regular", "limiting", "interior" and "boundary"."""
    from .fasttrack import manifold_sequence

    frame = manifold.frame
    radius = float(np.max(radii))
    if frame.m:
        grid = np.linspace(-radius, radius, 9)[:, None] * np.eye(frame.m)[0]
    else:
        grid = np.zeros((1, 0))
    pts = np.array([manifold.G(u) for u in grid])
    out = {"regular": regularity_certificate(problem, pts, Kind.REGULAR_ON_MANIFOLD),
           "limiting": regularity_certificate(problem, pts, Kind.LIMITING_EQUALS_REGULAR)}

    vnorms = np.array([np.linalg.norm(frame.V.project(x - frame.origin)) for x in pts])
    viol_int = vnorms - (eps - 1e-9)
    k = _first_violation(viol_int, 0.0)
    out["interior"] = Certificate(
        kind=Kind.INTERIOR_SELECTION, parameters={"problem": problem.name, "eps": eps,
                                             "radius": radius},
        max_violation=float(viol_int.max()), tolerance=0.0, n_checked=len(pts),
        witness=None if k is None else {"u": grid[k], "v_norm": vnorms[k]})

    ri = frame.eps_ri(eps)
    boundary = [g for g in frame.subdiff.generators if not ri.contains(g, tol=1e-10)]
    xs = manifold_sequence(manifold, n_sequence)
    worst, witness, details = -math.inf, None, []
    for g in boundary:
        target = frame.v_coords(g)
        dists = []
        for x in xs:
            gens_v = frame.v_coords(limiting_subdifferential(problem, x).polytope.generators)
            dists.append(_hull_dist(gens_v, target))
        v = sequence_verdict(dists)
        details.append({"g": g, "distances": dists})
        if v > worst:
            worst = v
        if witness is None and v > 0:
            witness = {"g": g, "distances": dists}
    if not boundary:
        worst = 0.0
    out["boundary"] = Certificate(
        kind=Kind.BOUNDARY_SUBGRADIENTS,
        parameters={"problem": problem.name, "eps": eps, "steps": n_sequence},
        max_violation=worst, tolerance=0.0, n_checked=len(boundary), witness=witness,
        details={"boundary_generators": details})
    return out


def _hull_dist(gens: Array, target: Array) -> float:
    from .polytope import hull_projection

    if gens.shape[1] == 0:
        return 0.0
    return hull_projection(gens, target).distance
