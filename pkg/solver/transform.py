#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Change of variable that removes the probability weighting from the
objective, discretisation onto a uniform grid, and the feasibility
trichotomy of the transformed problem.

    nu(p)       = 1 - w^{-1}(1 - p)
    hbar(p)     = h(nu(p)) * nu'(p)
    phi_tilde(p) = integral of phi over [0, nu(p)]
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple

import numpy as np
from scipy import integrate

from solver import constants as _cfg
from solver.errors import DomainError, QuadratureError, SingularDerivative
from solver.model import ArrayLike, LossModel, ProblemSpec, UtilitySpec, WeightingSpec

logger = logging.getLogger(__name__)


# ============================================================================
# GRID
# ============================================================================

@dataclass(frozen=True)
class Grid:
    """Uniform grid p_i = i / (n - 1) on [0, 1]."""

    n: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < _cfg.MIN_GRID_NODES:
            raise DomainError(f"grid needs an integer n >= {_cfg.MIN_GRID_NODES}, got {self.n!r}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n - 1)


# ============================================================================
# TRANSFORMED PROBLEM
# ============================================================================

@dataclass(frozen=True, eq=False)
class TransformedProblem:
    """Grid samples of the weighting-free problem.

    ``nu`` and ``singular_nodes`` are informational; synthetic problems
    built directly in code may leave them empty.
    """

    grid: Grid
    hbar: np.ndarray
    phi_tilde: np.ndarray
    phi_tilde_prime: np.ndarray
    beta: float
    varpi: float
    utility: UtilitySpec
    nu: Optional[np.ndarray] = None
    singular_nodes: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        n = self.grid.n
        for name in ("hbar", "phi_tilde", "phi_tilde_prime"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise DomainError(f"{name} must have {n} samples, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} has non-finite samples")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.hbar < 0):
            raise DomainError("hbar must be nonnegative")

    @property
    def p(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def h(self) -> float:
        return self.grid.spacing


# ============================================================================
# CHANGE OF VARIABLE
# ============================================================================

def _nu_values(w: WeightingSpec, p: np.ndarray) -> np.ndarray:
    return 1.0 - w.inverse(np.clip(1.0 - p, 0.0, 1.0))


def _nu_samples(w: WeightingSpec, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """nu, nu' and a mask of nodes where w' vanishes (nu' set to NaN)."""
    inner = w.inverse(1.0 - p)
    nu = 1.0 - inner
    density = np.asarray(w.density(inner), dtype=float)
    singular = ~(density > 0.0)
    with np.errstate(divide="ignore"):
        nu_prime = np.where(singular, np.nan, 1.0 / np.where(singular, 1.0, density))
    return nu, nu_prime, singular


def nu_map(w: WeightingSpec, p: ArrayLike) -> Tuple[Any, Any]:
    """Return (nu(p), nu'(p)) with nu' from the inverse-function rule.

    Raises SingularDerivative where w'(w^{-1}(1-p)) = 0.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("probability must lie in [0, 1]")
    nu, nu_prime, singular = _nu_samples(w, np.atleast_1d(arr))
    if np.any(singular):
        k = int(np.argmax(singular))
        raise SingularDerivative(float(np.atleast_1d(arr)[k]), float(nu[k]))
    if arr.ndim == 0:
        return float(nu[0]), float(nu_prime[0])
    return nu.reshape(arr.shape), nu_prime.reshape(arr.shape)


def _secant_slope(w: WeightingSpec, p: float, h: float) -> float:
    """One-sided (endpoints) or centred half-cell secant of nu at p."""
    lo = max(p - 0.5 * h, 0.0)
    hi = min(p + 0.5 * h, 1.0)
    values = _nu_values(w, np.array([lo, hi]))
    return float((values[1] - values[0]) / (hi - lo))


def _phi_tilde(phi: Any, nu: np.ndarray) -> np.ndarray:
    """Cumulative integral of phi from 0 to each nu_i on a refined partition."""
    refine = _cfg.QUADRATURE_REFINE
    frac = np.arange(refine) / refine
    t = (nu[:-1, None] + np.diff(nu)[:, None] * frac).ravel()
    t = np.append(t, nu[-1])
    values = np.asarray(phi(t), dtype=float)
    if not np.all(np.isfinite(values)):
        raise QuadratureError("phi is not finite on the quadrature nodes")
    if np.any(values < 0.0):
        raise QuadratureError("phi takes negative values")
    # nu_0 = 0 so the integral starts at the origin
    cumulative = integrate.cumulative_trapezoid(values, t, initial=0.0)
    return cumulative[::refine]


def transform_problem(spec: ProblemSpec, grid: Grid) -> TransformedProblem:
    """Sample hbar, phi_tilde and phi_tilde' of ``spec`` on ``grid``."""
    p = grid.nodes
    nu, nu_prime, singular = _nu_samples(spec.weighting, p)
    singular_nodes: List[int] = [int(i) for i in np.flatnonzero(singular)]
    for i in singular_nodes:
        nu_prime[i] = _secant_slope(spec.weighting, float(p[i]), grid.spacing)
    if singular_nodes:
        logger.warning(
            "w' vanishes at %d node(s); using half-cell secants of nu there",
            len(singular_nodes),
        )

    hbar = _loss_rate(spec.loss, nu) * nu_prime
    if not np.all(np.isfinite(hbar)):
        raise DomainError("hbar is unbounded on the grid; refine the loss or weighting model")

    phi_tilde = _phi_tilde(spec.phi, nu)
    phi_tilde_prime = np.asarray(spec.phi(nu), dtype=float) * nu_prime
    if not np.all(np.isfinite(phi_tilde_prime)):
        raise QuadratureError("phi(nu) * nu' is not finite on the grid")

    logger.debug(
        "transformed %s / %s / %s on n=%d",
        spec.utility.describe(), spec.weighting.describe(), spec.loss.describe(), grid.n,
    )
    return TransformedProblem(
        grid=grid,
        hbar=hbar,
        phi_tilde=phi_tilde,
        phi_tilde_prime=phi_tilde_prime,
        beta=float(spec.beta),
        varpi=spec.varpi,
        utility=spec.utility,
        nu=nu,
        singular_nodes=tuple(singular_nodes),
    )


def _loss_rate(loss: LossModel, nu: np.ndarray) -> np.ndarray:
    return np.asarray(loss.rate(np.clip(nu, 0.0, 1.0)), dtype=float)


# ============================================================================
# FEASIBILITY
# ============================================================================

class Feasibility(enum.Enum):
    INFEASIBLE = "infeasible"
    UNIQUE = "unique"
    FEASIBLE = "feasible"


@dataclass(frozen=True, eq=False)
class Classification:
    kind: Feasibility
    threshold: float
    varpi: float
    tol: float
    unique_quantile: Optional[np.ndarray] = None


def feasibility_threshold(tp: TransformedProblem) -> float:
    """Smallest attainable budget: beta * phi_tilde(1) - integral of phi_tilde * hbar."""
    return float(tp.beta * tp.phi_tilde[-1]
                 - integrate.trapezoid(tp.phi_tilde * tp.hbar, dx=tp.h))


def minimal_quantile(tp: TransformedProblem) -> np.ndarray:
    """Q*(p) = beta - integral of hbar over [p, 1]."""
    tail = integrate.cumulative_trapezoid(tp.hbar[::-1], dx=tp.h, initial=0.0)[::-1]
    return tp.beta - tail


def steepest_quantile(tp: TransformedProblem) -> np.ndarray:
    """Grid quantile with every increment at its box bound hbar_i * dp."""
    steps = tp.hbar[:-1] * tp.h
    return tp.beta - np.concatenate((np.cumsum(steps[::-1])[::-1], [0.0]))


def feasibility_classify(tp: TransformedProblem) -> Classification:
    threshold = feasibility_threshold(tp)
    tol = _cfg.THRESHOLD_RTOL * (1.0 + abs(threshold))
    if tp.varpi < threshold - tol:
        kind = Feasibility.INFEASIBLE
        unique = None
    elif abs(tp.varpi - threshold) <= tol:
        kind = Feasibility.UNIQUE
        unique = minimal_quantile(tp)
    else:
        kind = Feasibility.FEASIBLE
        unique = None
    logger.info(
        "feasibility: %s (threshold=%.10g, budget=%.10g)", kind.value, threshold, tp.varpi
    )
    return Classification(kind=kind, threshold=threshold, varpi=tp.varpi, tol=tol,
                          unique_quantile=unique)
