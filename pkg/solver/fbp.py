#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Free-boundary (complementarity) solver for the Lagrangian problem

    maximise  integral of u(Q) - lam * Q * phi_tilde'
    over      Q(1) = beta,  0 <= Q' <= hbar

On the grid Q is parameterised by its increments c_k = Q_{k+1} - Q_k in
the boxes [0, hbar_k * dp], and the objective is the trapezoid sum

    J(c) = sum_i w_i [u(Q_i) - lam * phi_tilde'_i * Q_i].

With delta the trapezoid integral of delta' = u'(Q) from 0, the prefix
sums S_k = sum_{i<=k} w_i (u'(Q_i) - lam * phi_tilde'_i) equal the
discrete delta - lam * phi_tilde at the cell k, and dJ/dc_k = -S_k. The
optimality system is therefore, per cell, one of three branches:

    ODE   c_k = hbar_k * dp   and  S_k <= 0   (delta below the obstacle)
    OBST  0 < c_k < ...       and  S_k  = 0   (delta touches the obstacle)
    FLAT  c_k = 0             and  S_k >= 0   (Q' = 0)

which is min{A, max{B, delta''}} = 0 with A = delta'' - hbar * kappa(delta')
and B = lam * phi_tilde - delta written cell by cell.

Solution: damped Newton along the log-barrier central path (tridiagonal
systems in the nodal values) gives starting branch flags, then policy
iteration over the flags with exact Newton solves of the OBST blocks
settles the discrete system. The module also provides the least concave
majorant used for the unbounded-derivative limit.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple

import numpy as np
from scipy import integrate
from scipy import linalg

from solver import constants as _cfg
from solver.errors import DomainError, InfeasibleProblem, NoConvergence
from solver.model import UtilitySpec
from solver.transform import Feasibility, Grid, TransformedProblem, feasibility_classify

logger = logging.getLogger(__name__)

ODE = _cfg.BRANCH_ODE
OBST = _cfg.BRANCH_OBST
FLAT = _cfg.BRANCH_FLAT

_EPS = float(np.finfo(float).eps)


# ============================================================================
# RESULT TYPES
# ============================================================================

@dataclass(frozen=True, eq=False)
class FbpSolution:
    """Converged grid solution of the free-boundary problem."""

    lam: float
    delta: np.ndarray
    delta_prime: np.ndarray
    quantile: np.ndarray
    branch: np.ndarray
    residual: float
    grid: Grid
    sweeps: int = 0
    newton_steps: int = 0

    @property
    def branch_tokens(self) -> List[str]:
        return [_cfg.BRANCH_TOKENS[int(b)] for b in self.branch]

    def branch_counts(self) -> dict:
        return {tok: int(np.sum(self.branch == code)) for code, tok in _cfg.BRANCH_TOKENS.items()}


@dataclass(frozen=True, eq=False)
class ResidualReport:
    max_residual: float
    mean_residual: float
    max_product: float
    max_obstacle_violation: float
    max_derivative_violation: float
    flagged_nodes: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def clean(self) -> bool:
        return not self.flagged_nodes


# ============================================================================
# GRID LAGRANGIAN
# ============================================================================

@dataclass(frozen=True, eq=False)
class _GridLagrangian:
    """Trapezoid objective of one multiplier over increments in [0, bounds]."""

    utility: UtilitySpec
    weights: np.ndarray
    price: np.ndarray
    bounds: np.ndarray
    beta: float

    @classmethod
    def build(cls, tp: TransformedProblem, lam: float) -> "_GridLagrangian":
        weights = np.full(tp.grid.n, tp.h)
        weights[[0, -1]] *= 0.5
        return cls(
            utility=tp.utility,
            weights=weights,
            price=lam * tp.phi_tilde_prime,
            bounds=tp.hbar[:-1] * tp.h,
            beta=tp.beta,
        )

    def quantile(self, c: np.ndarray) -> np.ndarray:
        """Q_i = beta - sum_{k >= i} c_k; the last node is beta exactly."""
        return self.beta - np.concatenate((np.cumsum(c[::-1])[::-1], [0.0]))

    def prefix(self, q: np.ndarray) -> np.ndarray:
        """S_k for every cell."""
        y = np.asarray(self.utility.marginal_at(q), dtype=float)
        return np.cumsum(self.weights * (y - self.price))[:-1]

    def scale(self, q: np.ndarray) -> float:
        y = np.asarray(self.utility.marginal_at(q), dtype=float)
        return float(np.sum(self.weights * (np.abs(y) + np.abs(self.price))))


def _inside(u: UtilitySpec, x: np.ndarray) -> np.ndarray:
    """Mask of wealth levels where u and its derivatives are defined."""
    lo = u.lower_bound
    ok = (x > lo) if u.open_lower else (x >= lo)
    if u.kind == "tabulated":
        ok &= x <= u.wealth[-1]
    return ok & np.isfinite(x)


# ============================================================================
# BARRIER PATH
# ============================================================================

def _barrier_path(gl: _GridLagrangian) -> Tuple[np.ndarray, int]:
    """Increments on the log-barrier central path at a small barrier weight.

    Cells with an empty box are merged into their neighbours, so the
    unknowns are the levels Z_j of the merged groups; the top group is
    pinned at beta. Each Newton system is symmetric tridiagonal.
    """
    bounds = gl.bounds
    c = np.zeros_like(bounds)
    live = np.flatnonzero(bounds > 0.0)
    if live.size == 0:
        return c, 0

    u = gl.utility
    m = live.size
    group = np.concatenate(([0], np.cumsum(bounds > 0.0)))
    mass = np.bincount(group, weights=gl.weights, minlength=m + 1)[:m]
    cost = np.bincount(group, weights=gl.weights * gl.price, minlength=m + 1)[:m]
    box = bounds[live]

    theta = 0.5
    total = float(np.sum(box))
    lo = u.lower_bound
    if np.isfinite(lo) and gl.beta - theta * total <= lo:
        theta = 0.5 * (gl.beta - lo) / total
    if not theta > 0.0:
        return c, 0
    z = gl.beta - np.cumsum((theta * box)[::-1])[::-1]

    def gaps(levels: np.ndarray) -> np.ndarray:
        return np.diff(np.append(levels, gl.beta))

    def value(levels: np.ndarray, mu: float) -> float:
        d = gaps(levels)
        if not (np.all(d > 0.0) and np.all(d < box) and np.all(_inside(u, levels))):
            return -np.inf
        barrier = np.sum(np.log(d) + np.log(box - d))
        return float(np.dot(mass, u.value(levels)) - np.dot(cost, levels) + mu * barrier)

    y0 = np.abs(np.asarray(u.marginal_at(z), dtype=float))
    mu = float(np.mean((mass * y0 + np.abs(cost)) * box))
    if not (np.isfinite(mu) and mu > 0.0):
        mu = float(np.mean(box))
    mu_end = mu * _cfg.BARRIER_MU_RTOL

    steps = 0
    current = value(z, mu)
    while True:
        for _ in range(_cfg.NEWTON_MAX_STEPS):
            d = gaps(z)
            slack = box - d
            pull = mu * (1.0 / d - 1.0 / slack)
            stiff = mu * (1.0 / d ** 2 + 1.0 / slack ** 2)
            grad = (mass * np.asarray(u.marginal_at(z), dtype=float) - cost
                    - pull + np.concatenate(([0.0], pull[:-1])))
            diag = (mass * np.asarray(u.curvature(z), dtype=float)
                    - stiff - np.concatenate(([0.0], stiff[:-1])))
            bands = np.zeros((2, m))
            bands[0, 1:] = -stiff[:-1]
            bands[1] = -diag
            try:
                step = linalg.solveh_banded(bands, grad)
            except (linalg.LinAlgError, ValueError) as exc:
                raise NoConvergence(f"barrier Newton system is singular: {exc}", steps,
                                    float(np.max(np.abs(grad)))) from exc
            decrement = float(np.dot(grad, step))
            if not np.isfinite(decrement):
                raise NoConvergence("barrier Newton step is not finite", steps, decrement)
            if 0.5 * decrement <= _cfg.NEWTON_TOL * mu:
                break

            move = np.diff(np.append(step, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                reach = np.where(move < 0.0, d / -move,
                                 np.where(move > 0.0, slack / move, np.inf))
            t = min(1.0, _cfg.BARRIER_BOUNDARY_FRACTION * float(np.min(reach)))
            accepted = False
            while t >= _cfg.DAMPING_FLOOR:
                trial = z + t * step
                trial_value = value(trial, mu)
                if trial_value >= current + _cfg.ARMIJO_SLOPE * t * decrement:
                    accepted = True
                    break
                t *= 0.5
            steps += 1
            if not accepted:
                break
            z, current = trial, trial_value
        if mu <= mu_end:
            break
        mu *= _cfg.BARRIER_MU_FACTOR
        current = value(z, mu)

    c[live] = gaps(z)
    logger.debug("barrier path: %d Newton steps down to mu=%.3e", steps, mu)
    return c, steps


# ============================================================================
# POLICY ITERATION
# ============================================================================

def _flags_from_increments(c: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """ODE at the upper end of a box, FLAT at the lower end, OBST inside."""
    rel = np.divide(c, bounds, out=np.zeros_like(c), where=bounds > 0.0)
    flags = np.full(c.shape, OBST, dtype=np.int8)
    flags[rel >= 1.0 - _cfg.FLAG_BOUND_RTOL] = ODE
    flags[rel <= _cfg.FLAG_BOUND_RTOL] = FLAT
    return flags


def _solve_blocks(
    gl: _GridLagrangian, flags: np.ndarray, guess: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Quantile for fixed flags: ODE/FLAT cells at their bounds, zero block
    gradient between consecutive OBST cells.

    Returns the quantile, the block gradients, their scales and the number
    of Newton steps. Blocks without a root keep a nonzero gradient.
    """
    u = gl.utility
    c = np.where(flags == ODE, gl.bounds, 0.0)
    free = np.flatnonzero(flags == OBST)
    if free.size == 0:
        return gl.quantile(c), np.zeros(0), np.zeros(0), 0

    c[free] = np.diff(guess)[free]
    q = gl.quantile(c)
    if not np.all(_inside(u, q)):
        c[free] = 0.0
        q = gl.quantile(c)
        if not np.all(_inside(u, q)):
            raise NoConvergence("branch flags push the quantile out of the utility domain", 0,
                                float(np.min(q)))

    top = int(free[-1]) + 1
    starts = np.concatenate(([0], free[:-1] + 1))
    owner = np.searchsorted(free, np.arange(top), side="left")
    w = gl.weights[:top]
    price = gl.price[:top]

    def gradient(levels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        y = np.asarray(u.marginal_at(levels[:top]), dtype=float)
        force = np.add.reduceat(w * (y - price), starts)
        size = np.add.reduceat(w * (np.abs(y) + np.abs(price)), starts)
        return force, size

    force, size = gradient(q)
    steps = 0
    for _ in range(_cfg.NEWTON_MAX_STEPS):
        pending = np.abs(force) > _cfg.BLOCK_RTOL * size
        if not np.any(pending):
            break
        steps += 1
        curv = np.add.reduceat(w * np.asarray(u.curvature(q[:top]), dtype=float), starts)
        step = np.where(pending, -force / curv, 0.0)
        damping = np.ones(free.size)
        remaining = pending.copy()
        progressed = False
        while np.any(remaining):
            move = np.where(remaining, damping * step, 0.0)
            trial = q.copy()
            trial[:top] += move[owner]
            inside = _inside(u, trial)
            whole = np.minimum.reduceat(inside[:top].astype(np.int8), starts).astype(bool)
            clamped = np.where(inside, trial, q)
            trial_force, _ = gradient(clamped)
            accept = remaining & whole & (np.abs(trial_force) < np.abs(force))
            if np.any(accept):
                progressed = True
                q[:top] += np.where(accept, move, 0.0)[owner]
                force = np.where(accept, trial_force, force)
            remaining &= ~accept
            damping[remaining] *= 0.5
            remaining &= damping >= _cfg.DAMPING_FLOOR
        if not progressed:
            break
        force, size = gradient(q)
    return q, force, size, steps


def _switch(
    gl: _GridLagrangian,
    flags: np.ndarray,
    q: np.ndarray,
    force: np.ndarray,
    size: np.ndarray,
) -> np.ndarray:
    """Flags after one policy-improvement step; equal to ``flags`` at a KKT point."""
    bounds = gl.bounds
    c = np.diff(q)
    s = gl.prefix(q)
    tau_s = _cfg.SWITCH_RTOL * gl.scale(q)
    tau_c = _cfg.SWITCH_RTOL * bounds + 8.0 * _EPS * (1.0 + abs(gl.beta))
    adjustable = bounds > 0.0
    updated = flags.copy()

    free = np.flatnonzero(flags == OBST)
    if free.size:
        rootless = np.abs(force) > _cfg.ROOT_RTOL * size
        updated[free[rootless & (force > 0.0)]] = FLAT
        updated[free[rootless & (force < 0.0)]] = ODE
        settled = free[~rootless]
        updated[settled[c[settled] < -tau_c[settled]]] = FLAT
        updated[settled[c[settled] > bounds[settled] + tau_c[settled]]] = ODE

    updated[(flags == ODE) & adjustable & (s > tau_s)] = OBST
    updated[(flags == FLAT) & adjustable & (s < -tau_s)] = OBST
    return updated


def _settle(gl: _GridLagrangian, flags: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Increments exactly at the bounds of fixed cells, clipped inside for OBST."""
    c = np.where(flags == ODE, gl.bounds, 0.0)
    free = flags == OBST
    c[free] = np.clip(np.diff(q)[free], 0.0, gl.bounds[free])
    return c


def _cell_branches(gl: _GridLagrangian, c: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Report flags: OBST where S vanishes inside the box, ODE at the upper
    bound (also when both ODE and OBST hold), FLAT otherwise."""
    s = gl.prefix(q)
    tau = _cfg.SWITCH_RTOL * gl.scale(q)
    touching = np.abs(s) <= tau
    flags = np.full(c.shape, FLAT, dtype=np.int8)
    flags[touching] = OBST
    flags[(s < -tau) | (touching & (c >= gl.bounds))] = ODE
    return flags


# ============================================================================
# SOLVER
# ============================================================================

def solve_fbp(
    tp: TransformedProblem,
    lam: float,
    max_sweeps: Optional[int] = None,
    check_feasibility: bool = True,
) -> FbpSolution:
    """Solve the free-boundary problem for multiplier ``lam``.

    Raises:
        InfeasibleProblem: budget below the feasibility threshold.
        NoConvergence: the sweep cap (default 200) is exceeded or a Newton
            system breaks down.
    """
    if not lam > 0 or not np.isfinite(lam):
        raise DomainError(f"multiplier must be positive and finite, got {lam!r}")
    if check_feasibility:
        verdict = feasibility_classify(tp)
        if verdict.kind is Feasibility.INFEASIBLE:
            raise InfeasibleProblem(verdict.threshold, verdict.varpi)
    cap = int(max_sweeps) if max_sweeps is not None else _cfg.MAX_POLICY_SWEEPS
    if cap < 1:
        raise NoConvergence("policy iteration sweep cap reached", 0, np.inf)

    gl = _GridLagrangian.build(tp, lam)
    start, newton_steps = _barrier_path(gl)
    flags = _flags_from_increments(start, gl.bounds)
    q = gl.quantile(start)

    seen: Set[bytes] = set()
    sweeps = 0
    settled = False
    while not settled:
        sweeps += 1
        if sweeps > cap:
            raise NoConvergence("policy iteration sweep cap reached", cap,
                                float(np.max(np.abs(gl.prefix(q)))))
        q, force, size, steps = _solve_blocks(gl, flags, q)
        newton_steps += steps
        updated = _switch(gl, flags, q, force, size)
        changed = int(np.sum(updated != flags))
        logger.debug("sweep %d: %d block Newton steps, %d switches", sweeps, steps, changed)
        if changed == 0:
            settled = True
            break
        seen.add(flags.tobytes())
        if updated.tobytes() in seen:
            logger.warning("branch flags cycle at lam=%.10g; keeping the barrier solution", lam)
            flags = _flags_from_increments(start, gl.bounds)
            q = gl.quantile(start)
            break
        flags = updated

    c = _settle(gl, flags, q)
    quantile = gl.quantile(c)
    delta_prime = np.asarray(tp.utility.marginal_at(quantile), dtype=float)
    delta = integrate.cumulative_trapezoid(delta_prime, dx=tp.h, initial=0.0)
    cells = _cell_branches(gl, c, quantile)
    branch = np.append(cells, cells[-1])

    nodal, _, _, _, _ = _diagnostics(tp, lam, delta, delta_prime, quantile)
    residual = float(np.max(nodal))
    logger.info(
        "fbp solved: lam=%.10g sweeps=%d newton=%d residual=%.3e", lam, sweeps, newton_steps, residual
    )
    return FbpSolution(
        lam=float(lam),
        delta=delta,
        delta_prime=delta_prime,
        quantile=quantile,
        branch=branch,
        residual=residual,
        grid=tp.grid,
        sweeps=sweeps,
        newton_steps=newton_steps,
    )


# ============================================================================
# DIAGNOSTICS
# ============================================================================

def _diagnostics(
    tp: TransformedProblem,
    lam: float,
    delta: np.ndarray,
    delta_prime: np.ndarray,
    quantile: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Scaled nodal residual, cell product, obstacle gap and slope violation.

    Cell k uses A = kappa (q_k - hbar_k), delta'' = kappa q_k with kappa the
    mean of u'' over the cell and B = -S_k rebuilt from delta. A cell also
    fails when delta is not the trapezoid integral of delta'.
    """
    h = tp.h
    y = np.asarray(delta_prime, dtype=float)
    q = np.asarray(quantile, dtype=float)
    slope = np.diff(q) / h
    hbar = tp.hbar[:-1]
    phi = integrate.cumulative_trapezoid(tp.phi_tilde_prime, dx=h, initial=0.0)
    gap = lam * phi - delta
    b = (gap - 0.5 * h * (y - lam * tp.phi_tilde_prime))[:-1]

    curvature = np.asarray(tp.utility.curvature(q), dtype=float)
    kappa = 0.5 * (curvature[:-1] + curvature[1:])
    a = kappa * (slope - hbar)
    d2 = kappa * slope
    scale = 1.0 + np.abs(lam * tp.phi_tilde[:-1])
    comp = np.abs(np.minimum(a, np.maximum(b, d2))) / scale
    drift = np.abs(np.diff(delta) - 0.5 * h * (y[:-1] + y[1:])) / h / scale
    cell = np.maximum(comp, drift)

    nodal = np.maximum(np.append(cell, 0.0), np.concatenate(([0.0], cell)))
    nodal[0] = max(nodal[0], abs(float(delta[0])))
    product = np.abs((slope - hbar) * np.maximum(b, 0.0) + slope * np.minimum(b, 0.0)) / scale
    obstacle = np.maximum(-gap, 0.0) / (1.0 + np.abs(lam * tp.phi_tilde))
    bound = np.maximum(np.maximum(-slope, 0.0), np.maximum(slope - hbar, 0.0))
    return nodal, product, obstacle, bound, cell


def residual_check(sol: FbpSolution, tp: TransformedProblem) -> ResidualReport:
    """Scaled complementarity residuals of ``sol`` recomputed from its delta."""
    nodal, product, obstacle, bound, _ = _diagnostics(
        tp, sol.lam, sol.delta, sol.delta_prime, sol.quantile
    )
    not_flat = sol.branch != FLAT
    touched = obstacle[not_flat]
    flagged = tuple(int(i) for i in np.flatnonzero(nodal > _cfg.RESIDUAL_FLAG_TOL))
    return ResidualReport(
        max_residual=float(np.max(nodal)),
        mean_residual=float(np.mean(nodal)),
        max_product=float(np.max(product)),
        max_obstacle_violation=float(np.max(touched)) if touched.size else 0.0,
        max_derivative_violation=float(np.max(bound)),
        flagged_nodes=flagged,
    )


def concave_envelope(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Least concave majorant of the piecewise-linear interpolant of ``values``.

    Monotone-chain upper hull over (p_i, f_i); it solves
    min{-d'', d - f} = 0, the limit of the free-boundary problem as
    hbar grows without bound. Points within a few ulps of a chord are
    dropped, so the envelope of an envelope reproduces it exactly.
    """
    f = np.asarray(values, dtype=float)
    p = grid.nodes
    if f.shape != p.shape:
        raise DomainError(f"expected {p.size} samples, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise DomainError("envelope input must be finite")

    tol = 64.0 * _EPS * max(1.0, float(np.max(np.abs(f))))
    hull: List[int] = []
    for k in range(p.size):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            chord = f[o] + (f[k] - f[o]) * (p[a] - p[o]) / (p[k] - p[o])
            if f[a] - chord <= tol:
                hull.pop()
            else:
                break
        hull.append(k)
    idx = np.asarray(hull)
    return np.interp(p, p[idx], f[idx])
