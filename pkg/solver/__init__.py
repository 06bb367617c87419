#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Optimal insurance contracts under rank-dependent utility.

Пакет розв'язувача: модель, заміна змінних, задача з вільною межею,
калібрування множника, оракули та відновлення контракту.
"""

from solver.constants import __version__
from solver.errors import SolverError
from solver.model import LossModel, PhiSpec, ProblemSpec, UtilitySpec, WeightingSpec
from solver.transform import Feasibility, Grid, TransformedProblem, feasibility_classify, transform_problem
from solver.fbp import FbpSolution, concave_envelope, residual_check, solve_fbp
from solver.multiplier import budget_of, calibrate_lambda
from solver.recovery import recover_contract, recover_quantile, rdut_value

__all__ = [
    "__version__",
    "SolverError",
    # model
    "UtilitySpec",
    "WeightingSpec",
    "LossModel",
    "PhiSpec",
    "ProblemSpec",
    # transform
    "Grid",
    "TransformedProblem",
    "Feasibility",
    "transform_problem",
    "feasibility_classify",
    # fbp
    "FbpSolution",
    "solve_fbp",
    "residual_check",
    "concave_envelope",
    # multiplier
    "budget_of",
    "calibrate_lambda",
    # recovery
    "recover_quantile",
    "recover_contract",
    "rdut_value",
]
