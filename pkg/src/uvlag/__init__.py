"""Numerical verification toolkit for localized U-Lagrangians of prox-regular functions."""

from .errors import (EpsilonTooLarge, InvariantViolation, NotInPolytope, OracleUnavailable,
                     PreconditionError, SolverError, UvlagError)
from .funcmodel import CATALOG, Problem, get_problem, limiting_subdifferential
from .uvframe import UVFrame, build_frame

__all__ = [
    "CATALOG", "EpsilonTooLarge", "InvariantViolation", "NotInPolytope", "OracleUnavailable",
    "PreconditionError", "Problem", "SolverError", "UVFrame", "UvlagError", "build_frame",
    "get_problem", "limiting_subdifferential",
]
__version__ = "0.1.0"
