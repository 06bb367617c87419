#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Brute-force oracles for the discretised Lagrangian problem.

Both oracles work on increments c_i = Q_{i+1} - Q_i in the boxes
[0, hbar_i * H] with Q_{m-1} = beta, maximise the trapezoid objective
sum w_i [u(Q_i) - lam * Q_i * phi_tilde'_i] and deliberately share no
code with the free-boundary solver.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from solver import constants as _cfg
from solver.errors import GridMismatch, NoConvergence, SizeError
from solver.model import UtilitySpec
from solver.transform import TransformedProblem

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CoarseProblem:
    """Strided restriction of a TransformedProblem to m nodes."""

    nodes: np.ndarray
    hbar: np.ndarray
    phi_tilde_prime: np.ndarray
    weights: np.ndarray
    spacing: float
    beta: float
    utility: UtilitySpec

    @property
    def boxes(self) -> np.ndarray:
        """Upper bounds of the increments, hbar at the left node times H."""
        return self.hbar[:-1] * self.spacing


@dataclass(frozen=True)
class Comparison:
    sup_norm: float
    mean_abs: float


def coarse_indices(n: int, m: int) -> np.ndarray:
    """Indices of the fine grid kept when restricting n nodes to m."""
    if m < 2 or m > n or (n - 1) % (m - 1):
        raise GridMismatch(f"cannot restrict {n} nodes to {m}: (n-1)/(m-1) is not an integer")
    return np.arange(0, n, (n - 1) // (m - 1))


def coarsen(tp: TransformedProblem, m: Optional[int] = None) -> CoarseProblem:
    n = tp.grid.n
    m = n if m is None else int(m)
    idx = coarse_indices(n, m)
    spacing = 1.0 / (m - 1)
    weights = np.full(m, spacing)
    weights[[0, -1]] *= 0.5
    return CoarseProblem(
        nodes=tp.p[idx],
        hbar=np.asarray(tp.hbar[idx], dtype=float),
        phi_tilde_prime=np.asarray(tp.phi_tilde_prime[idx], dtype=float),
        weights=weights,
        spacing=spacing,
        beta=tp.beta,
        utility=tp.utility,
    )


def _quantile_from_increments(c: np.ndarray, beta: float) -> np.ndarray:
    """Q_i = beta - sum_{j >= i} c_j along the last axis."""
    tails = np.cumsum(c[..., ::-1], axis=-1)[..., ::-1]
    pad = np.zeros(c.shape[:-1] + (1,))
    return beta - np.concatenate((tails, pad), axis=-1)


def _objective(q: np.ndarray, cp: CoarseProblem, lam: float) -> np.ndarray:
    integrand = cp.utility.value(q) - lam * q * cp.phi_tilde_prime
    return np.asarray(integrand @ cp.weights)


def lagrangian_value(quantile: np.ndarray, tp: TransformedProblem, lam: float) -> float:
    """Trapezoid value of the integral of u(Q) - lam * Q * phi_tilde' on tp's grid."""
    q = np.asarray(quantile, dtype=float)
    if q.shape != tp.p.shape:
        raise GridMismatch(f"expected {tp.p.size} samples, got shape {q.shape}")
    integrand = tp.utility.value(q) - lam * q * tp.phi_tilde_prime
    return float(integrate.trapezoid(integrand, dx=tp.h))


# ============================================================================
# EXHAUSTIVE ENUMERATION
# ============================================================================

def oracle_exhaustive(
    tp: TransformedProblem,
    lam: float,
    m: Optional[int] = None,
    levels: int = _cfg.DEFAULT_ORACLE_LEVELS,
) -> np.ndarray:
    """Best quantile over all increment combinations on ``levels`` values each.

    Ties go to the lexicographically largest increment vector.
    """
    cp = coarsen(tp, m)
    nodes = cp.nodes.size
    if nodes > _cfg.ORACLE_MAX_NODES or not 2 <= levels <= _cfg.ORACLE_MAX_LEVELS:
        raise SizeError(
            f"exhaustive oracle supports m <= {_cfg.ORACLE_MAX_NODES} and "
            f"2 <= levels <= {_cfg.ORACLE_MAX_LEVELS}, got m={nodes}, levels={levels}",
            levels ** (nodes - 1), _cfg.ORACLE_MAX_CANDIDATES,
        )
    dims = nodes - 1
    total = levels ** dims
    if total > _cfg.ORACLE_MAX_CANDIDATES:
        raise SizeError(f"{total} candidates exceed the limit", total, _cfg.ORACLE_MAX_CANDIDATES)

    step = cp.boxes / (levels - 1)
    shape = (levels,) * dims
    best_value = -np.inf
    best_q = np.full(nodes, cp.beta)
    for start in range(0, total, _cfg.ORACLE_CHUNK):
        idx = np.arange(start, min(start + _cfg.ORACLE_CHUNK, total))
        digits = np.stack(np.unravel_index(idx, shape), axis=1)
        q = _quantile_from_increments(digits * step, cp.beta)
        values = _objective(q, cp, lam)
        # last maximum within the chunk is the lexicographically largest
        local = values.size - 1 - int(np.argmax(values[::-1]))
        if values[local] >= best_value:
            best_value = float(values[local])
            best_q = q[local]
    logger.debug("exhaustive oracle: %d candidates, best=%.17g", total, best_value)
    return np.asarray(best_q, dtype=float)


# ============================================================================
# PROJECTED COORDINATE ASCENT
# ============================================================================

def _coordinate_step(q: np.ndarray, j: int, lo: float, hi: float,
                     cp: CoarseProblem, lam: float) -> float:
    """Exact maximiser t in [lo, hi] of the objective after Q[:j+1] -= t."""
    w = cp.weights[: j + 1]
    base = q[: j + 1]
    target = lam * cp.phi_tilde_prime[: j + 1]
    u = cp.utility

    def slope(t: float) -> float:
        return float(np.dot(w, target - u.marginal_at(base - t)))

    def curvature(t: float) -> float:
        return float(np.dot(w, u.curvature(base - t)))

    if slope(lo) <= 0.0:
        return lo
    if slope(hi) >= 0.0:
        return hi
    t = min(max(0.0, lo), hi)
    for _ in range(_cfg.INVERSION_MAX_STEPS):
        g = slope(t)
        if g > 0.0:
            lo = t
        else:
            hi = t
        trial = t - g / curvature(t)
        if not lo < trial < hi:
            trial = 0.5 * (lo + hi)
        if abs(trial - t) <= 1e-15 * (1.0 + abs(t)) or hi - lo <= 1e-15 * (1.0 + abs(t)):
            return trial
        t = trial
    return t


def _warm_start(cp: CoarseProblem, lam: float) -> np.ndarray:
    upper = cp.boxes
    start = 0.5 * upper
    if not np.any(upper > 0.0):
        return start

    def negative(c: np.ndarray) -> Tuple[float, np.ndarray]:
        q = _quantile_from_increments(c, cp.beta)
        value = float(_objective(q, cp, lam))
        pointwise = cp.weights * (cp.utility.marginal_at(q) - lam * cp.phi_tilde_prime)
        return -value, np.cumsum(pointwise)[:-1]

    result = optimize.minimize(
        negative, start, jac=True, method="L-BFGS-B",
        bounds=list(zip(np.zeros_like(upper), upper)),
        options={"maxiter": 15000, "ftol": 1e-15, "gtol": 1e-12},
    )
    logger.debug("L-BFGS-B warm start: %s (%d iterations)", result.message, result.nit)
    return np.clip(np.asarray(result.x, dtype=float), 0.0, upper)


def oracle_projected(
    tp: TransformedProblem, lam: float, m: Optional[int] = None
) -> np.ndarray:
    """Global maximiser of the concave discretised objective.

    L-BFGS-B warm start followed by cyclic exact coordinate ascent on the
    increments; stops when a full sweep improves the objective by less
    than 1e-12.
    """
    cp = coarsen(tp, m)
    upper = cp.boxes
    c = _warm_start(cp, lam)
    q = _quantile_from_increments(c, cp.beta)
    value = float(_objective(q, cp, lam))
    active = np.flatnonzero(upper > 0.0)

    for sweep in range(1, _cfg.ORACLE_MAX_SWEEPS + 1):
        before = value
        for j in active:
            t = _coordinate_step(q, int(j), -c[j], upper[j] - c[j], cp, lam)
            if t != 0.0:
                c[j] += t
                q[: j + 1] -= t
        # rebuild from increments so Q_{m-1} = beta stays exact
        c = np.clip(c, 0.0, upper)
        q = _quantile_from_increments(c, cp.beta)
        value = float(_objective(q, cp, lam))
        if value - before < _cfg.ORACLE_SWEEP_TOL:
            logger.debug("projected oracle converged after %d sweeps", sweep)
            return q
    raise NoConvergence("coordinate ascent sweep cap reached", _cfg.ORACLE_MAX_SWEEPS,
                        value - before)


def compare(q_a: np.ndarray, q_b: np.ndarray) -> Comparison:
    a = np.asarray(q_a, dtype=float)
    b = np.asarray(q_b, dtype=float)
    if a.shape != b.shape:
        raise GridMismatch(f"shapes {a.shape} and {b.shape} differ")
    diff = np.abs(a - b)
    return Comparison(sup_norm=float(np.max(diff)), mean_abs=float(np.mean(diff)))
