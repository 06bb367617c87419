#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Map the optimal quantile back to the insured's wealth quantile G and the
contract functions R (retention) and I (indemnity), evaluate the rank-
dependent objective, and certify incentive compatibility.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy import integrate

from solver import constants as _cfg
from solver.errors import DomainError, InversionError
from solver.fbp import FbpSolution
from solver.model import LossModel, ProblemSpec, UtilitySpec, WeightingSpec
from solver.transform import Grid, TransformedProblem

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Contract:
    """Retention and indemnity sampled at loss levels x."""

    x: np.ndarray
    retention: np.ndarray
    indemnity: np.ndarray
    premium: float = 0.0
    expected_retention: float = 0.0
    projection_gap: float = 0.0

    @classmethod
    def from_retention(cls, x: np.ndarray, retention: np.ndarray) -> "Contract":
        xs = np.asarray(x, dtype=float)
        rs = np.asarray(retention, dtype=float)
        return cls(x=xs, retention=rs, indemnity=xs - rs)


@dataclass(frozen=True)
class ViolationReport:
    count: int
    worst_node: Optional[int]
    worst_magnitude: float
    nodes: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def compliant(self) -> bool:
        return self.count == 0


def _samples(values: Union[FbpSolution, np.ndarray]) -> np.ndarray:
    return np.asarray(getattr(values, "quantile", values), dtype=float)


def recover_quantile(
    sol: Union[FbpSolution, np.ndarray], w: WeightingSpec, grid: Grid
) -> np.ndarray:
    """G(p) = Q(1 - w(1 - p)) by piecewise-linear interpolation of Q."""
    q = _samples(sol)
    p = grid.nodes
    if q.shape != p.shape:
        raise DomainError(f"expected {p.size} quantile samples, got shape {q.shape}")
    g = np.interp(1.0 - w.value(1.0 - p), p, q)
    g[-1] = q[-1]
    return g


def loss_cdf(loss: LossModel, x: np.ndarray) -> np.ndarray:
    """F_X(x) = sup{s : F_X^{-1}(s) <= x} by vectorised bisection on the quantile."""
    xs = np.asarray(x, dtype=float)
    floor = loss.quantile(0.0)
    if np.any(xs < floor):
        bad = float(xs[xs < floor][0])
        raise InversionError(f"loss level {bad:.17g} is below the support of X", bad)
    lo = np.zeros_like(xs)
    hi = np.ones_like(xs)
    top = loss.quantile(1.0)
    for _ in range(_cfg.CDF_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        below = loss.quantile(mid) <= xs
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(xs >= top, 1.0, lo)


def recover_contract(
    g_samples: np.ndarray,
    loss: LossModel,
    beta: float,
    x: Optional[np.ndarray] = None,
    project: bool = False,
) -> Contract:
    """R(x) = beta - G(1 - F_X(x)) and I = x - R.

    The raw retention is returned unless ``project`` is set, in which case
    it is replaced by the nearest path with 0 <= R' <= 1 and the largest
    shift is stored in ``projection_gap``.
    """
    g = np.asarray(g_samples, dtype=float)
    p = np.linspace(0.0, 1.0, g.size)
    if x is None:
        x = np.linspace(0.0, loss.quantile(1.0 - _cfg.CONTRACT_TAIL), _cfg.CONTRACT_POINTS)
    xs = np.asarray(x, dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise DomainError("contract sample points must be strictly increasing")
    if xs[-1] > loss.supremum:
        raise InversionError(f"loss level {xs[-1]:.17g} is above the support of X", float(xs[-1]))

    cdf = loss_cdf(loss, xs)
    raw = beta - np.interp(1.0 - cdf, p, g)
    if xs[0] == 0.0:
        raw[0] = 0.0
    retention = raw
    gap = 0.0
    if project:
        steps = np.clip(np.diff(raw), 0.0, np.diff(xs))
        retention = np.concatenate(([raw[0]], raw[0] + np.cumsum(steps)))
        gap = float(np.max(np.abs(retention - raw)))
        logger.info("contract projected onto 0 <= R' <= 1 (max shift %.3e)", gap)
    indemnity = xs - retention

    s = np.linspace(0.0, 1.0, _cfg.EXPECTATION_POINTS)
    losses = np.asarray(loss.quantile(s), dtype=float)
    retained = np.interp(losses, xs, retention)
    expected_retention = float(integrate.trapezoid(retained, s))
    premium = float(integrate.trapezoid(losses - retained, s))
    return Contract(
        x=xs,
        retention=retention,
        indemnity=indemnity,
        premium=premium,
        expected_retention=expected_retention,
        projection_gap=gap,
    )


def rdut_value(g_samples: np.ndarray, u: UtilitySpec, w: WeightingSpec) -> float:
    """Stieltjes trapezoid of u(G) against d(1 - w(1 - p)).

    Cells touching a wealth where u is infinite (log or CRRA at 0) use
    the midpoint rule instead.
    """
    g = np.asarray(g_samples, dtype=float)
    p = np.linspace(0.0, 1.0, g.size)
    lower = u.lower_bound
    if np.any(g < lower):
        raise DomainError(f"wealth {float(np.min(g)):.17g} is below the utility domain")
    inside = g > lower if u.open_lower else g >= lower
    values = np.full_like(g, np.nan)
    values[inside] = u.value(g[inside])
    psi = 1.0 - np.asarray(w.value(1.0 - p), dtype=float)
    cells = 0.5 * (values[:-1] + values[1:])
    bad = ~np.isfinite(cells)
    if np.any(bad):
        cells[bad] = u.value(0.5 * (g[:-1][bad] + g[1:][bad]))
    return float(np.sum(cells * np.diff(psi)))


def uninsured_value(spec: ProblemSpec, grid: Grid) -> float:
    """Objective of the uninsured wealth beta - X."""
    p = grid.nodes
    g = spec.beta - np.asarray(spec.loss.quantile(1.0 - p), dtype=float)
    return rdut_value(g, spec.utility, spec.weighting)


def ic_tolerance(tp: TransformedProblem) -> float:
    """Step tolerance for contracts recovered from a solution on ``tp``.

    The increment boxes sample hbar at the left node, so a recovered step
    may exceed its loss step by up to dp times the variation of hbar plus
    the interpolation error at a kink, dp * max hbar.
    """
    hbar = tp.hbar
    return _cfg.IC_TOL + tp.h * float(np.sum(np.abs(np.diff(hbar))) + np.max(hbar))


def validate_incentive_compatibility(
    contract: Contract, tol: float = _cfg.IC_TOL
) -> ViolationReport:
    """Check 0 <= R_{j+1} - R_j <= x_{j+1} - x_j for every adjacent pair."""
    dx = np.diff(contract.x)
    if np.any(dx <= 0):
        raise DomainError("contract sample points must be strictly increasing")
    dr = np.diff(contract.retention)
    magnitude = np.maximum(-dr, dr - dx)
    bad = np.flatnonzero(magnitude > tol)
    if bad.size == 0:
        return ViolationReport(count=0, worst_node=None, worst_magnitude=0.0)
    worst = int(bad[np.argmax(magnitude[bad])])
    return ViolationReport(
        count=int(bad.size),
        worst_node=worst,
        worst_magnitude=float(magnitude[worst]),
        nodes=tuple(int(j) for j in bad),
    )
