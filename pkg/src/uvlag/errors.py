"""Exception hierarchy shared by all uvlag modules."""

from __future__ import annotations


class UvlagError(Exception):
    """Base class for every error raised by this package."""


class OracleUnavailable(UvlagError):
    """The exact subdifferential oracle cannot be evaluated at the point."""


class NotInPolytope(UvlagError):
    """A point that must belong to a polytope lies outside it."""

    def __init__(self, message: str, distance: float):
        super().__init__(message)
        self.distance = distance


class EpsilonTooLarge(UvlagError):
    """The epsilon-relative interior is empty for the requested radius."""

    def __init__(self, eps: float, max_eps: float):
        super().__init__(
            f"epsilon too large: eps={eps!r} exceeds the max feasible eps={max_eps!r}")
        self.eps = eps
        self.max_eps = max_eps


class PreconditionError(UvlagError):
    """Inputs violate the stated precondition of an operation."""


class InvariantViolation(UvlagError):
    """A numerical identity that must hold was observed to fail."""

    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload or {}


class SolverError(UvlagError):
    """The inner minimization could not produce the requested output."""
