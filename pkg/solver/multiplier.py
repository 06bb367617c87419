#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Budget evaluation and calibration of the Lagrange multiplier.

The budget of the optimal quantile is non-increasing in lam, possibly
with flat stretches, so the multiplier is bracketed geometrically from
lam = 1 and then refined by plain bisection.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from solver import constants as _cfg
from solver.errors import BracketError, InfeasibleProblem
from solver.fbp import FbpSolution, solve_fbp
from solver.transform import (
    Feasibility, TransformedProblem, feasibility_classify, steepest_quantile,
)

logger = logging.getLogger(__name__)

StepCallback = Callable[[float, float], None]


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    """Outcome of the multiplier search.

    ``flat`` marks the feasibility threshold, where the budget stays at
    varpi for every large enough lam. ``jump`` holds the budgets on both
    sides of a collapsed bracket when the budget jumps over varpi there;
    the returned solution is then the one on the right, inside the budget.
    """

    lam: float
    solution: FbpSolution
    budget: float
    varpi: float
    bracket: Tuple[float, float]
    iterations: int
    flat: bool = False
    jump: Optional[Tuple[float, float]] = None

    @property
    def slackness(self) -> float:
        """lam * (budget - varpi)."""
        return self.lam * (self.budget - self.varpi)


@dataclass(frozen=True)
class LadderPoint:
    lam: float
    budget: float
    sweeps: int
    newton_steps: int


def quantile_budget(quantile: np.ndarray, tp: TransformedProblem) -> float:
    """Trapezoid value of the integral of Q * phi_tilde' over [0, 1]."""
    return float(integrate.trapezoid(np.asarray(quantile, dtype=float) * tp.phi_tilde_prime, dx=tp.h))


def budget_of(sol: FbpSolution, tp: TransformedProblem) -> float:
    return quantile_budget(sol.quantile, tp)


def calibrate_lambda(
    tp: TransformedProblem,
    max_sweeps: Optional[int] = None,
    on_step: Optional[StepCallback] = None,
) -> CalibrationResult:
    """Find lam* with budget_of(solve_fbp(tp, lam*)) = varpi.

    At the feasibility threshold the target is the budget of the steepest
    grid quantile, the only member of the discrete constraint set there.

    Raises:
        InfeasibleProblem: varpi below the feasibility threshold.
        BracketError: no crossing for lam in [2^-60, 2^60].
    """
    verdict = feasibility_classify(tp)
    if verdict.kind is Feasibility.INFEASIBLE:
        raise InfeasibleProblem(verdict.threshold, verdict.varpi)
    saturated = verdict.kind is Feasibility.UNIQUE

    varpi = tp.varpi
    target = quantile_budget(steepest_quantile(tp), tp) if saturated else varpi
    tol = _cfg.BUDGET_RTOL * (1.0 + abs(varpi))
    lam_min = 2.0 ** -_cfg.LAMBDA_EXP_RANGE
    lam_max = 2.0 ** _cfg.LAMBDA_EXP_RANGE
    iterations = 0

    def evaluate(lam: float) -> Tuple[FbpSolution, float]:
        nonlocal iterations
        iterations += 1
        sol = solve_fbp(tp, lam, max_sweeps=max_sweeps, check_feasibility=False)
        budget = budget_of(sol, tp)
        logger.debug("calibration step %d: lam=%.17g budget=%.17g", iterations, lam, budget)
        if on_step is not None:
            on_step(lam, budget)
        return sol, budget

    def done(lam: float, sol: FbpSolution, budget: float, bracket: Tuple[float, float],
             flat: bool, jump: Optional[Tuple[float, float]] = None) -> CalibrationResult:
        logger.info("calibrated lam=%.10g budget=%.10g (flat=%s, jump=%s, %d solves)",
                    lam, budget, flat, jump is not None, iterations)
        return CalibrationResult(lam=lam, solution=sol, budget=budget, varpi=varpi,
                                 bracket=bracket, iterations=iterations, flat=flat, jump=jump)

    lam = 1.0
    sol, budget = evaluate(lam)
    if abs(budget - target) <= tol:
        return done(lam, sol, budget, (lam, lam), saturated)

    # geometric bracketing: budget(lo) >= target >= budget(hi)
    if budget < target:
        hi, hi_sol, hi_budget = lam, sol, budget
        while True:
            lam *= 0.5
            if lam < lam_min:
                raise BracketError(
                    f"budget {varpi:.10g} exceeds the attainable maximum "
                    f"{budget:.10g} reached at lam={2.0 * lam:.3g}",
                    lam_min, hi,
                )
            sol, budget = evaluate(lam)
            if abs(budget - target) <= tol:
                return done(lam, sol, budget, (lam, lam), saturated)
            if budget > target:
                lo, lo_budget = lam, budget
                break
            hi, hi_sol, hi_budget = lam, sol, budget
    else:
        lo, lo_budget = lam, budget
        while True:
            lam *= 2.0
            if lam > lam_max:
                raise BracketError(
                    f"budget {varpi:.10g} is below the budget {budget:.10g} "
                    f"attained at lam={0.5 * lam:.3g}",
                    lo, lam_max,
                )
            sol, budget = evaluate(lam)
            if abs(budget - target) <= tol:
                return done(lam, sol, budget, (lam, lam), saturated)
            if budget < target:
                hi, hi_sol, hi_budget = lam, sol, budget
                break
            lo, lo_budget = lam, budget

    while hi - lo > _cfg.LAMBDA_WIDTH_RTOL * hi:
        mid = 0.5 * (lo + hi)
        sol, budget = evaluate(mid)
        if abs(budget - target) <= tol:
            return done(mid, sol, budget, (lo, hi), saturated)
        if budget > target:
            lo, lo_budget = mid, budget
        else:
            hi, hi_sol, hi_budget = mid, sol, budget

    # collapsed bracket with both ends off target: no lam meets varpi
    logger.warning(
        "budget jumps from %.17g to %.17g across lam in [%.17g, %.17g]",
        lo_budget, hi_budget, lo, hi,
    )
    return done(hi, hi_sol, hi_budget, (lo, hi), False, (lo_budget, hi_budget))


def budget_ladder(
    tp: TransformedProblem,
    lams: Sequence[float] = _cfg.DEFAULT_LAMBDA_LADDER,
    max_sweeps: Optional[int] = None,
) -> List[LadderPoint]:
    """Solve on each multiplier of ``lams`` and tabulate the budgets."""
    points = []
    for lam in sorted(float(v) for v in lams):
        sol = solve_fbp(tp, lam, max_sweeps=max_sweeps)
        points.append(LadderPoint(lam=lam, budget=budget_of(sol, tp),
                                  sweeps=sol.sweeps, newton_steps=sol.newton_steps))
    return points


def is_non_increasing(points: Sequence[LadderPoint], tol: float = 1e-8) -> bool:
    budgets = np.array([pt.budget for pt in points])
    return bool(np.all(np.diff(budgets) <= tol))
