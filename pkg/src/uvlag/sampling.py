"""Seeded low-discrepancy samplers."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.stats import norm, qmc


def sobol(n: int, d: int, seed: int) -> np.ndarray:
    """First ``n`` points of a scrambled Sobol sequence in [0, 1)^d."""
    if n <= 0:
        return np.zeros((0, d))
    m = max(0, math.ceil(math.log2(n)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = qmc.Sobol(d, scramble=True, seed=seed).random_base2(m)
    return pts[:n]


def ball(n: int, dim: int, radius: float, seed: int, center=None) -> np.ndarray:
    """``n`` quasi-uniform points in the closed ball of ``radius``."""
    if dim == 0:
        return np.zeros((n, 0))
    pts = sobol(n, dim + 1, seed)
    z = norm.ppf(np.clip(pts[:, :dim], 1e-12, 1 - 1e-12))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = radius * pts[:, dim] ** (1.0 / dim)
    out = z * r[:, None]
    if center is not None:
        out = out + np.asarray(center, dtype=float)
    return out


def sphere(n: int, dim: int, seed: int) -> np.ndarray:
    """``n`` quasi-uniform unit vectors."""
    pts = sobol(n, dim, seed)
    z = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)
