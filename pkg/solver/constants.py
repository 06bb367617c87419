#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Solver constants, tolerances, and output formats.

Every numeric knob the pipeline uses lives here so that the CLI, the
config layer and the tests agree on one set of values.
"""

# ============================================================================
# МЕТАДАНІ
# ============================================================================
__version__ = "1.0.0"
__license__ = "BSD 3-Clause"
__year__ = "2026"

PROGRAM_NAME = "contractsolve"

# ============================================================================
# MODEL
# ============================================================================
INVERSION_RTOL = 1e-12
INVERSION_MAX_STEPS = 200

UTILITY_KINDS = ("cara", "crra", "log", "tabulated")
WEIGHTING_KINDS = ("identity", "power", "prelec", "tk")
LOSS_KINDS = ("uniform", "mass_at_zero", "tabulated")
PHI_KINDS = ("constant", "power", "tabulated")

# ============================================================================
# GRID AND TRANSFORM
# ============================================================================
MIN_GRID_NODES = 9
DEFAULT_GRID_NODES = 2049

# Sub-intervals per grid cell when integrating phi between consecutive nu_i
QUADRATURE_REFINE = 16

THRESHOLD_RTOL = 1e-9

# ============================================================================
# FREE-BOUNDARY SOLVER
# ============================================================================
# Barrier path: Newton decrement relative to mu, mu schedule and step rules
NEWTON_TOL = 1e-10
NEWTON_MAX_STEPS = 100
DAMPING_FLOOR = 2.0 ** -20
BARRIER_MU_FACTOR = 0.1
BARRIER_MU_RTOL = 1e-12
BARRIER_BOUNDARY_FRACTION = 0.99
ARMIJO_SLOPE = 1e-4

# Policy iteration over branch flags
MAX_POLICY_SWEEPS = 200
FLAG_BOUND_RTOL = 1e-6
BLOCK_RTOL = 1e-12
ROOT_RTOL = 1e-9
SWITCH_RTOL = 1e-10

RESIDUAL_FLAG_TOL = 1e-8

BRANCH_ODE = 0
BRANCH_OBST = 1
BRANCH_FLAT = 2
BRANCH_TOKENS = {BRANCH_ODE: "ODE", BRANCH_OBST: "OBST", BRANCH_FLAT: "FLAT"}

# ============================================================================
# MULTIPLIER CALIBRATION
# ============================================================================
BUDGET_RTOL = 1e-7
LAMBDA_WIDTH_RTOL = 1e-12
LAMBDA_EXP_RANGE = 60
DEFAULT_LAMBDA_LADDER = tuple(2.0 ** k for k in range(-4, 5))

# ============================================================================
# ORACLES
# ============================================================================
ORACLE_SWEEP_TOL = 1e-12
ORACLE_MAX_SWEEPS = 100_000
ORACLE_MAX_CANDIDATES = 20_000_000
ORACLE_MAX_NODES = 10
ORACLE_MAX_LEVELS = 8
ORACLE_CHUNK = 1 << 16
DEFAULT_ORACLE_NODES = 9
DEFAULT_ORACLE_LEVELS = 7

# sup |Q_fbp - Q_oracle| accepted by oracle-check
ORACLE_AGREEMENT_TOL = 5e-3

# ============================================================================
# RECOVERY
# ============================================================================
IC_TOL = 1e-9
CONTRACT_POINTS = 201
CONTRACT_TAIL = 1e-6
EXPECTATION_POINTS = 4097
CDF_BISECTION_STEPS = 64

# ============================================================================
# OUTPUT
# ============================================================================
FLOAT_FORMAT = ".17g"
THRESHOLD_FORMAT = ".10g"

QUANTILE_FILE = "quantile.csv"
CONTRACT_FILE = "contract.csv"
ORACLE_FILE = "oracle.csv"
ENVELOPE_FILE = "envelope.csv"
SWEEP_FILE = "sweep.csv"
SUMMARY_FILE = "summary.txt"

QUANTILE_HEADER = ("p", "delta", "delta_prime", "Q", "branch", "hbar", "phi_tilde")
CONTRACT_HEADER = ("x", "R", "I")
ORACLE_HEADER = ("p", "fbp", "projected", "abs_diff")
ENVELOPE_HEADER = ("p", "f", "envelope")
SWEEP_HEADER = ("lambda", "budget", "sweeps", "newton_steps")

# ============================================================================
# EXIT CODES
# ============================================================================
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_NO_CONVERGENCE = 3
