"""Geometry of polyhedral subdifferentials.

A :class:`Polytope` stores the convex hull of finitely many generators and,
when known, a facet description ``A g <= b``.  Facets of a lower-dimensional
polytope always include the pair ``+-u . g <= +-u . g_ref`` for every
direction ``u`` orthogonal to its affine hull, so the same facet list
describes it both as a set in R^n and relative to its affine span.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import subspace_angles
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull

from .errors import EpsilonTooLarge, NotInPolytope

Array = NDArray[np.float64]

RANK_RTOL = 1e-10
MEMBERSHIP_TOL = 1e-10
FACET_TOL = 1e-12
INTERIOR_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class Subspace:
    """Linear subspace of R^n held as an orthonormal n x k basis."""

    basis: Array

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-d array (n x k)")
        object.__setattr__(self, "basis", b)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> Array:
        return self.basis @ self.basis.T

    def project(self, x: ArrayLike) -> Array:
        x = np.asarray(x, dtype=float)
        return (x @ self.basis) @ self.basis.T

    def coords(self, x: ArrayLike) -> Array:
        return np.asarray(x, dtype=float) @ self.basis

    def complement(self) -> Subspace:
        return Subspace(canonical_basis(np.eye(self.n) - self.projector, self.n - self.dim))

    def contains(self, x: ArrayLike, tol: float = 1e-10) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x - self.project(x)) <= tol * max(1.0, np.linalg.norm(x)))

    @classmethod
    def zero(cls, n: int) -> Subspace:
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> Subspace:
        return cls(np.eye(n))

    @classmethod
    def span(cls, vectors: ArrayLike, n: int | None = None) -> Subspace:
        """Span of the rows of ``vectors`` with the standard numerical-rank cutoff."""
        vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
        if n is None:
            n = vecs.shape[1]
        if vecs.size == 0:
            return cls.zero(n)
        _, s, vt = np.linalg.svd(vecs, full_matrices=False)
        cutoff = RANK_RTOL * max(s[0] if s.size else 0.0, 1.0)
        rank = int(np.sum(s > cutoff))
        if rank == 0:
            return cls.zero(n)
        q = vt[:rank].T
        return cls(canonical_basis(q @ q.T, rank))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "basis": self.basis.T.tolist()}


def canonical_basis(proj: Array, rank: int) -> Array:
    """Orthonormal basis of ``range(proj)`` seeded by canonical vectors.

    Pivoted Gram-Schmidt on the columns ``proj @ e_i``: the column with the
    largest residual wins, ties go to the lowest index.  The output depends
    only on the projector, never on which spanning set produced it.
    """
    n = proj.shape[0]
    if rank == 0:
        return np.zeros((n, 0))
    cols = proj.copy()
    chosen: list[Array] = []
    for _ in range(rank):
        norms = np.linalg.norm(cols, axis=0)
        best = float(norms.max())
        idx = int(np.flatnonzero(norms >= best * (1 - 1e-9))[0])
        q = cols[:, idx] / norms[idx]
        for prev in chosen:
            q = q - (prev @ q) * prev
        q = q / np.linalg.norm(q)
        chosen.append(q)
        cols = cols - np.outer(q, q @ cols)
    return np.column_stack(chosen)


@dataclass(frozen=True, eq=False)
class Cone:
    """Closed convex cone generated by nonnegative combinations of rays."""

    rays: Array

    def to_dict(self) -> dict:
        return {"rays": np.asarray(self.rays).tolist()}


def subspace_gap(a: Subspace, b: Subspace) -> float:
    """Largest principal angle between two subspaces (pi/2 if dims differ)."""
    if a.dim != b.dim:
        return float(np.pi / 2)
    if a.dim == 0 or a.dim == a.n:
        return 0.0
    return float(np.max(subspace_angles(a.basis, b.basis)))


def project(space: Subspace, x: ArrayLike) -> Array:
    """Orthogonal projection of ``x`` onto ``space``."""
    return space.project(x)


@dataclass(frozen=True, eq=False)
class HullProjection:
    point: Array
    weights: Array
    distance: float


def hull_projection(generators: ArrayLike, target: ArrayLike) -> HullProjection:
    """Nearest point of conv(generators) to ``target``.

    Exact for small generator counts: every affinely independent subset is
    tried and the best feasible affine projection kept.
    """
    gens = np.atleast_2d(np.asarray(generators, dtype=float))
    t = np.asarray(target, dtype=float)
    k, n = gens.shape
    if k > 12:
        return _hull_projection_nnls(gens, t)
    best: HullProjection | None = None
    for size in range(1, min(k, n + 1) + 1):
        for subset in itertools.combinations(range(k), size):
            base = gens[subset[0]]
            if size == 1:
                lam_sub = np.ones(1)
                point = base
            else:
                d = (gens[list(subset[1:])] - base).T
                if np.linalg.matrix_rank(d, tol=1e-12) < size - 1:
                    continue
                mu, *_ = np.linalg.lstsq(d, t - base, rcond=None)
                lam_sub = np.concatenate(([1.0 - mu.sum()], mu))
                if lam_sub.min() < -1e-12:
                    continue
                point = base + d @ mu
            dist = float(np.linalg.norm(point - t))
            if best is None or dist < best.distance - 1e-15:
                w = np.zeros(k)
                w[list(subset)] = np.clip(lam_sub, 0.0, None)
                w /= w.sum()
                best = HullProjection(point=point, weights=w, distance=dist)
    assert best is not None
    return best


def _hull_projection_nnls(gens: Array, t: Array) -> HullProjection:
    big = 1e6
    a = np.vstack([gens.T, big * np.ones(gens.shape[0])])
    rhs = np.concatenate([t, [big]])
    w, _ = nnls(a, rhs)
    w = w / w.sum()
    point = w @ gens
    return HullProjection(point=point, weights=w, distance=float(np.linalg.norm(point - t)))


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of ``generators`` with an optional facet list ``A g <= b``."""

    generators: Array
    facets: tuple[Array, Array] | None = field(default=None)

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if g.shape[0] == 0:
            raise ValueError("a polytope needs at least one generator")
        object.__setattr__(self, "generators", _dedupe_rows(g))
        if self.facets is not None:
            a, b = self.facets
            a = np.atleast_2d(np.asarray(a, dtype=float))
            b = np.asarray(b, dtype=float).ravel()
            if np.any(self.generators @ a.T > b + 1e-9):
                raise ValueError("a generator violates the facet description")
            object.__setattr__(self, "facets", (a, b))

    @property
    def n(self) -> int:
        return self.generators.shape[1]

    @property
    def is_singleton(self) -> bool:
        return self.generators.shape[0] == 1

    def centroid(self) -> Array:
        return self.generators.mean(axis=0)

    def support(self, w: ArrayLike) -> float:
        return float(np.max(self.generators @ np.asarray(w, dtype=float)))

    def distance(self, x: ArrayLike) -> float:
        return hull_projection(self.generators, x).distance

    def contains(self, x: ArrayLike, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.distance(x) <= tol

    def facet_slack(self, x: ArrayLike) -> Array:
        a, b = self.with_facets().facets
        return b - a @ np.asarray(x, dtype=float)

    def with_facets(self) -> Polytope:
        if self.facets is not None:
            return self
        return Polytope(self.generators, facets_from_generators(self.generators))

    def to_dict(self) -> dict:
        return {"generators": self.generators.tolist()}


def _dedupe_rows(rows: Array, tol: float = 1e-12) -> Array:
    kept: list[Array] = []
    for r in rows:
        if not any(np.linalg.norm(r - k) <= tol * max(1.0, np.linalg.norm(r)) for k in kept):
            kept.append(r)
    return np.array(kept)


def facets_from_generators(gens: Array) -> tuple[Array, Array]:
    """H-representation of conv(gens), including the affine-hull equalities."""
    gens = np.atleast_2d(gens)
    anchor = gens[0]
    vspace = Subspace.span(gens - anchor, gens.shape[1])
    uspace = vspace.complement()
    rows: list[Array] = []
    offs: list[float] = []
    for u in uspace.basis.T:
        rows += [u, -u]
        offs += [float(u @ anchor), float(-u @ anchor)]
    p = vspace.dim
    if p == 1:
        d = vspace.basis[:, 0]
        y = (gens - anchor) @ d
        rows += [d, -d]
        offs += [float(d @ anchor + y.max()), float(-d @ anchor - y.min())]
    elif p >= 2:
        y = (gens - anchor) @ vspace.basis
        hull = ConvexHull(y)
        seen: list[Array] = []
        for eq in hull.equations:
            if any(np.allclose(eq, s, atol=1e-10) for s in seen):
                continue
            seen.append(eq)
            a = vspace.basis @ eq[:-1]
            rows.append(a)
            offs.append(float(a @ anchor - eq[-1]))
    if not rows:
        return np.zeros((0, gens.shape[1])), np.zeros(0)
    return np.array(rows), np.array(offs)


def span_of_differences(poly: Polytope, gtilde: ArrayLike) -> Subspace:
    """Orthonormal basis of span{g - gtilde : g a generator of ``poly``}."""
    gt = np.asarray(gtilde, dtype=float)
    dist = poly.distance(gt)
    if dist > MEMBERSHIP_TOL:
        raise NotInPolytope(f"gtilde lies at distance {dist:.3e} from the polytope", dist)
    return Subspace.span(poly.generators - gt, poly.n)


def _relative_system(poly: Polytope, vspace: Subspace, eps: float):
    a, b = poly.with_facets().facets
    center = poly.centroid()
    coef = a @ vspace.basis
    shrink = np.linalg.norm(a @ vspace.projector, axis=1)
    rhs = b - eps * shrink - a @ center
    keep = np.linalg.norm(coef, axis=1) > 1e-12
    return center, coef[keep], rhs[keep], shrink[keep], rhs[~keep]


def max_feasible_eps(poly: Polytope, vspace: Subspace) -> float:
    """Largest eps with a nonempty eps-relative interior (inf when V = {0})."""
    if vspace.dim == 0:
        return float("inf")
    _, coef, rhs, shrink, _ = _relative_system(poly, vspace, 0.0)
    p = vspace.dim
    c = np.zeros(p + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.column_stack([coef, shrink]), b_ub=rhs,
                  bounds=[(None, None)] * p + [(0, None)], method="highs")
    if res.status != 0:
        return 0.0
    return float(res.x[-1])


def epsilon_relative_interior(poly: Polytope, vspace: Subspace, eps: float) -> Polytope:
    """The set {g : g + B_V(0, eps) inside poly} as a polytope.

    Each facet ``a . g <= b`` is shifted to ``a . g + eps |P_V a| <= b``.
    With V = {0} the ball degenerates to the origin and ``poly`` is returned.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    poly = poly.with_facets()
    if vspace.dim == 0:
        return poly
    max_eps = max_feasible_eps(poly, vspace)
    if eps > max_eps + 1e-12:
        raise EpsilonTooLarge(eps, max_eps)
    center, coef, rhs, _, fixed = _relative_system(poly, vspace, eps)
    if fixed.size and fixed.min() < -1e-9:
        raise EpsilonTooLarge(eps, max_eps)
    p = vspace.dim
    verts: list[Array] = []
    if p == 1:
        c1 = coef[:, 0]
        hi = np.min(rhs[c1 > 0] / c1[c1 > 0])
        lo = np.max(rhs[c1 < 0] / c1[c1 < 0])
        hi = max(hi, lo)
        verts = [np.array([lo]), np.array([hi])]
    else:
        for rows in itertools.combinations(range(len(rhs)), p):
            m = coef[list(rows)]
            if abs(np.linalg.det(m)) < 1e-12:
                continue
            y = np.linalg.solve(m, rhs[list(rows)])
            if np.all(coef @ y <= rhs + 1e-9):
                verts.append(y)
        if not verts:
            raise EpsilonTooLarge(eps, max_eps)
    gens = center + np.array(verts) @ vspace.basis.T
    a, b = poly.facets
    shifted = b - eps * np.linalg.norm(a @ vspace.projector, axis=1)
    # vertex round-off can leave generators a hair outside the shifted facets
    shifted = np.maximum(shifted, (gens @ a.T).max(axis=0))
    return Polytope(gens, (a, shifted))


def normal_cone(poly: Polytope, g0: ArrayLike) -> Subspace | Cone:
    """Normal cone of ``poly`` at ``g0``; a Subspace whenever it is linear."""
    g0 = np.asarray(g0, dtype=float)
    dist = poly.distance(g0)
    if dist > MEMBERSHIP_TOL:
        raise NotInPolytope(f"g0 lies at distance {dist:.3e} from the polytope", dist)
    a, b = poly.with_facets().facets
    slack = b - a @ g0
    active = a[slack <= 1e-9 * max(1.0, float(np.abs(b).max(initial=0.0)))]
    if active.shape[0] == 0:
        return Subspace.zero(poly.n)
    for ray in active:
        _, resid = nnls(active.T, -ray)
        if resid > 1e-9:
            return Cone(active)
    return Subspace.span(active, poly.n)
