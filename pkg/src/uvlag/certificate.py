from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np


class Kind(str, Enum):
    PROX_REG_FUNCTION = "ProxRegFunction"
    PROX_REG_SET = "ProxRegSet"
    PRODUCT_SET = "ProductSet"
    PERTURBED = "Perturbed"
    MONOTONICITY = "Monotonicity"
    W_LIPSCHITZ = "WLipschitz"
    REGULAR_ON_MANIFOLD = "RegularOnManifold"
    INTERIOR_SELECTION = "InteriorSelection"
    BOUNDARY_SUBGRADIENTS = "BoundarySubgradients"
    LIMITING_EQUALS_REGULAR = "LimitingEqualsRegular"
    BALL_INCLUSION = "BallInclusion"
    QUADRATIC_LOWER_BOUND = "QuadraticLowerBound"
    INNER_SEMICONTINUITY = "InnerSemicontinuity"


def jsonable(obj: Any) -> Any:
    """Recursively convert numpy containers and scalars to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Enum):
        return obj.value
    return obj


@dataclass
class Certificate:
    """Outcome of a sampled check of a universally quantified statement.

    ``max_violation`` is oriented so that larger is worse; the verdict is
    pass exactly when it does not exceed ``tolerance``.  A pass means only
    that no violation was found among ``n_checked`` samples.
    """

    kind: Kind
    parameters: dict
    max_violation: float
    tolerance: float
    n_checked: int
    witness: dict | None = None
    n_skipped: int = 0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.passed and self.witness is None:
            raise ValueError("a failing certificate must carry a witness")

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tolerance)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @property
    def label(self) -> str:
        if self.passed:
            return f"no violation found at {self.n_checked} samples"
        return f"violation found ({self.max_violation:.3e} > {self.tolerance:.1e})"

    def to_dict(self) -> dict:
        return jsonable({
            "kind": self.kind,
            "parameters": self.parameters,
            "verdict": self.verdict,
            "label": self.label,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "n_checked": self.n_checked,
            "n_skipped": self.n_skipped,
            "witness": self.witness,
            "details": self.details,
        })
