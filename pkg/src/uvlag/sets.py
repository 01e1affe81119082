"""Closed sets with exact normal-cone oracles, used by the set certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import nnls

Array = NDArray[np.float64]

BOUNDARY_TOL = 1e-12


class SetModel:
    """A closed set C in R^dim.

    Subclasses provide ``contains``, ``to_boundary`` (any map onto the
    boundary, not necessarily the nearest point) and ``normal_rays``, the
    generators of the limiting normal cone ``N_C(x)``.
    """

    name: str = "set"
    dim: int

    def contains(self, x: Array) -> Array:
        raise NotImplementedError

    def to_boundary(self, x: Array, rng: np.random.Generator) -> Array:
        raise NotImplementedError

    def normal_rays(self, x: Array) -> Array:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim}

    def sample_normal(self, x: Array, center: Array, radius: float,
                      rng: np.random.Generator, tries: int = 16) -> Array | None:
        """A vector of N_C(x) in the open ball B(center, radius), or None."""
        rays = self.normal_rays(x)
        if rays.shape[0] == 0:
            w = np.zeros(self.dim)
            return w if np.linalg.norm(w - center) < radius else None
        mu0, _ = nnls(rays.T, center)
        for _ in range(tries):
            mu = np.clip(mu0 * (1 + 0.8 * rng.uniform(-1, 1, len(mu0)))
                         + radius * rng.uniform(0, 1, len(mu0)) * (rng.random(len(mu0)) < 0.5),
                         0, None)
            w = mu @ rays
            if np.linalg.norm(w - center) < radius:
                return w
        w = mu0 @ rays
        return w if np.linalg.norm(w - center) < radius else None


@dataclass
class HalfSpace(SetModel):
    """{x : a . x <= b}."""

    a: Array
    b: float
    name: str = "half-space"

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.dim = self.a.size

    def contains(self, x):
        return np.asarray(x) @ self.a <= self.b + BOUNDARY_TOL

    def to_boundary(self, x, rng):
        x = np.asarray(x, dtype=float)
        return x - np.outer((x @ self.a - self.b) / (self.a @ self.a), self.a).reshape(x.shape)

    def normal_rays(self, x):
        if abs(float(x @ self.a) - self.b) <= 1e-10:
            return self.a[None, :].copy()
        return np.zeros((0, self.dim))

    def describe(self):
        return {"name": self.name, "a": self.a.tolist(), "b": self.b}


@dataclass
class Box(SetModel):
    """Product of closed intervals [lo_i, hi_i]."""

    lo: Array
    hi: Array
    name: str = "box"

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        self.dim = self.lo.size

    def contains(self, x):
        x = np.asarray(x)
        return np.all((x >= self.lo - BOUNDARY_TOL) & (x <= self.hi + BOUNDARY_TOL), axis=-1)

    def to_boundary(self, x, rng):
        x = np.clip(np.array(x, dtype=float), self.lo, self.hi)
        flat = x.reshape(-1, self.dim)
        for row in flat:
            i = rng.integers(self.dim)
            row[i] = self.lo[i] if abs(row[i] - self.lo[i]) < abs(row[i] - self.hi[i]) else self.hi[i]
        return flat.reshape(x.shape)

    def normal_rays(self, x):
        rays = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            if self.lo[i] == self.hi[i]:
                e[i] = 1.0
                rays += [e, -e]
            elif abs(x[i] - self.lo[i]) <= 1e-10:
                e[i] = -1.0
                rays.append(e)
            elif abs(x[i] - self.hi[i]) <= 1e-10:
                e[i] = 1.0
                rays.append(e)
        return np.array(rays) if rays else np.zeros((0, self.dim))

    def describe(self):
        return {"name": self.name, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass
class DiskComplement(SetModel):
    """{x : |x - center| >= radius}, the complement of an open disk."""

    center: Array
    radius: float = 1.0
    name: str = "disk-complement"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.dim = self.center.size

    def contains(self, x):
        return np.linalg.norm(np.asarray(x) - self.center, axis=-1) >= self.radius - BOUNDARY_TOL

    def to_boundary(self, x, rng):
        d = np.asarray(x, dtype=float) - self.center
        return self.center + self.radius * d / np.linalg.norm(d, axis=-1, keepdims=True)

    def normal_rays(self, x):
        d = np.asarray(x, dtype=float) - self.center
        if abs(np.linalg.norm(d) - self.radius) <= 1e-10:
            return (-d / np.linalg.norm(d))[None, :]
        return np.zeros((0, self.dim))

    def describe(self):
        return {"name": self.name, "center": self.center.tolist(), "radius": self.radius}


@dataclass
class ParabolaEpigraph(SetModel):
    """{(x1, x2) : x2 >= x1^2}."""

    name: str = "parabola-epigraph"

    def __post_init__(self):
        self.dim = 2

    def contains(self, x):
        x = np.asarray(x)
        return x[..., 1] >= x[..., 0] ** 2 - BOUNDARY_TOL

    def to_boundary(self, x, rng):
        x = np.array(x, dtype=float)
        x[..., 1] = x[..., 0] ** 2
        return x

    def normal_rays(self, x):
        if abs(x[1] - x[0] ** 2) <= 1e-10:
            r = np.array([2 * x[0], -1.0])
            return (r / np.linalg.norm(r))[None, :]
        return np.zeros((0, 2))


@dataclass
class Singleton(SetModel):
    point: Array
    name: str = "singleton"

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        self.dim = self.point.size

    def contains(self, x):
        return np.linalg.norm(np.asarray(x) - self.point, axis=-1) <= BOUNDARY_TOL

    def to_boundary(self, x, rng):
        return np.broadcast_to(self.point, np.shape(x)).copy()

    def normal_rays(self, x):
        eye = np.eye(self.dim)
        return np.vstack([eye, -eye])

    def describe(self):
        return {"name": self.name, "point": self.point.tolist()}


@dataclass
class Product(SetModel):
    """D x E with coordinates split after ``first.dim``."""

    first: SetModel
    second: SetModel
    name: str = "product"

    def __post_init__(self):
        self.dim = self.first.dim + self.second.dim

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., :self.first.dim], x[..., self.first.dim:]

    def contains(self, x):
        a, b = self._split(x)
        return self.first.contains(a) & self.second.contains(b)

    def to_boundary(self, x, rng):
        a, b = self._split(x)
        which = rng.integers(3)
        if which != 1:
            a = self.first.to_boundary(a, rng)
        if which != 0:
            b = self.second.to_boundary(b, rng)
        return np.concatenate([a, b], axis=-1)

    def normal_rays(self, x):
        a, b = self._split(x)
        ra, rb = self.first.normal_rays(a), self.second.normal_rays(b)
        rows = [np.concatenate([r, np.zeros(self.second.dim)]) for r in ra]
        rows += [np.concatenate([np.zeros(self.first.dim), r]) for r in rb]
        return np.array(rows) if rows else np.zeros((0, self.dim))

    def describe(self):
        return {"name": self.name, "first": self.first.describe(),
                "second": self.second.describe()}


def set_catalog() -> dict[str, SetModel]:
    return {
        "half-space": HalfSpace(np.array([0.0, 1.0]), 0.0),
        "box": Box(np.zeros(2), np.ones(2)),
        "disk-complement": DiskComplement(np.zeros(2), 1.0),
        "parabola-epigraph": ParabolaEpigraph(),
    }
