#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Exception hierarchy for the contract solver.

All errors raised by the numerical core derive from ``SolverError`` so
the CLI can catch one type at the top level and map it to an exit code.
"""

from typing import Any, Dict, Optional


class SolverError(Exception):
    """Base class for every error raised by the solver packages."""

    def to_dict(self) -> Dict[str, Any]:
        """Structured payload for the JSON log formatter."""
        data: Dict[str, Any] = {"error": type(self).__name__, "message": str(self)}
        for key, value in vars(self).items():
            if not key.startswith("_"):
                data[key] = value
        return data


# ============================================================================
# MODEL
# ============================================================================

class DomainError(SolverError, ValueError):
    """Argument outside the domain of a utility, weighting or loss map."""


class RangeError(SolverError, ValueError):
    """Marginal utility value outside the range of u'."""


class EvalError(SolverError):
    """Derivative requested where a tabulated map is not differentiable."""

    def __init__(self, message: str, p: float, one_sided: float) -> None:
        super().__init__(message)
        self.p = p
        self.one_sided = one_sided


class InversionError(SolverError):
    """A monotone map could not be bracketed or inverted."""

    def __init__(self, message: str, x: Optional[float] = None) -> None:
        super().__init__(message)
        self.x = x


# ============================================================================
# TRANSFORM
# ============================================================================

class SingularDerivative(SolverError):
    """The weighting density vanishes, so nu' = 1 / w'(...) is infinite."""

    def __init__(self, p: float, nu: float) -> None:
        super().__init__(f"w' vanishes at w^-1(1-p) for p={p:.17g} (nu={nu:.17g})")
        self.p = p
        self.nu = nu


class QuadratureError(SolverError):
    """Weight function phi cannot be integrated on the refined grid."""


class InfeasibleProblem(SolverError):
    """Budget lies below the feasibility threshold."""

    def __init__(self, threshold: float, budget: float) -> None:
        super().__init__(
            f"problem is infeasible: budget {budget:.10g} is below "
            f"threshold {threshold:.10g}"
        )
        self.threshold = threshold
        self.budget = budget


# ============================================================================
# SOLVERS
# ============================================================================

class NoConvergence(SolverError):
    """An iterative solver hit its iteration cap or stalled."""

    def __init__(self, message: str, iterations: int, residual: float) -> None:
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class BracketError(SolverError):
    """No budget crossing inside the admissible multiplier range."""

    def __init__(self, message: str, lo: float, hi: float) -> None:
        super().__init__(message)
        self.lo = lo
        self.hi = hi


class SizeError(SolverError):
    """Exhaustive enumeration would exceed the candidate limit."""

    def __init__(self, message: str, candidates: int, limit: int) -> None:
        super().__init__(message)
        self.candidates = candidates
        self.limit = limit


class GridMismatch(SolverError, ValueError):
    """Two sampled functions do not live on the same grid."""


class IncentiveViolation(SolverError):
    """Recovered retention leaves 0 <= R' <= 1."""

    def __init__(self, count: int, worst_node: Optional[int], magnitude: float) -> None:
        super().__init__(
            f"contract is not incentive compatible at {count} steps "
            f"(worst step {worst_node}, excess {magnitude:.3e})"
        )
        self.count = count
        self.worst_node = worst_node
        self.magnitude = magnitude


# ============================================================================
# CONFIG / IO
# ============================================================================

class ParseError(SolverError):
    """Config file is not well-formed."""

    def __init__(
        self, message: str, line: Optional[int] = None, field: Optional[str] = None
    ) -> None:
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.field = field


class ValidationError(SolverError, ValueError):
    """Config parsed but a field is missing or out of range."""

    def __init__(self, field: str, detail: str = "") -> None:
        super().__init__(f"{field}: {detail}" if detail else field)
        self.field = field
        self.detail = detail


class IoError(SolverError, OSError):
    """Result artifacts could not be written."""

    def __init__(self, message: str, path: str) -> None:
        super().__init__(message)
        self.path = path
