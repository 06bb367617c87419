#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
CLI entry point and orchestration for contractsolve.

    contractsolve <mode> --config <path> [--lambda <float>] [--grid-n <int>] [--out <dir>]

Modes: solve, feasibility, oracle-check, envelope, sweep.
Exit status: 0 success, 1 error, 2 infeasible problem, 3 no convergence.
"""

import argparse
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from modules.config import MODES, ProblemConfig, RunConfig, generate_config, load_config
from modules.solver_logger import SolverLogger, get_logger, setup_logging
from solver import constants as _cfg
from solver.errors import (
    DomainError, IncentiveViolation, InfeasibleProblem, NoConvergence, ParseError, SolverError,
    ValidationError,
)
from solver.fbp import FbpSolution, concave_envelope, residual_check, solve_fbp
from solver.io import emit_results, write_summary, write_table
from solver.model import LossModel, PhiSpec, ProblemSpec, UtilitySpec, WeightingSpec
from solver.multiplier import (
    CalibrationResult, budget_ladder, budget_of, calibrate_lambda, is_non_increasing,
)
from solver.oracle import coarse_indices, compare, oracle_exhaustive, oracle_projected
from solver.recovery import (
    ic_tolerance, recover_contract, recover_quantile, rdut_value, uninsured_value,
    validate_incentive_compatibility,
)
from solver.transform import (
    Classification, Feasibility, Grid, TransformedProblem, feasibility_classify,
    transform_problem,
)

Summary = List[Tuple[str, Any]]


# ============================================================================
# PROBLEM CONSTRUCTION
# ============================================================================

def _utility(cfg: Any) -> UtilitySpec:
    if cfg.kind == "cara":
        return UtilitySpec.cara(cfg.alpha)
    if cfg.kind == "crra":
        return UtilitySpec.crra(cfg.gamma)
    if cfg.kind == "log":
        return UtilitySpec.log()
    return UtilitySpec.tabulated(cfg.wealth, cfg.marginal)


def _weighting(cfg: Any) -> WeightingSpec:
    if cfg.kind == "identity":
        return WeightingSpec.identity()
    if cfg.kind == "power":
        return WeightingSpec.power(cfg.gamma)
    if cfg.kind == "prelec":
        return WeightingSpec.prelec(cfg.a, cfg.b)
    return WeightingSpec.tversky_kahneman(cfg.gamma)


def _loss(cfg: Any) -> LossModel:
    if cfg.kind == "uniform":
        return LossModel.uniform(cfg.b)
    if cfg.kind == "mass_at_zero":
        return LossModel.mass_at_zero(cfg.q, cfg.b)
    return LossModel.tabulated(cfg.probabilities, cfg.quantiles)


def _phi(cfg: Any) -> PhiSpec:
    if cfg.kind == "constant":
        return PhiSpec.constant(cfg.c)
    if cfg.kind == "power":
        return PhiSpec.power(cfg.c, cfg.k)
    return PhiSpec.tabulated(cfg.points, cfg.values)


def build_problem_spec(problem: ProblemConfig) -> ProblemSpec:
    """Construct the ProblemSpec described by a validated ProblemConfig.

    Parameter errors of the individual families are reported as
    ValidationError naming the section.
    """
    builders: Sequence[Tuple[str, Callable[[Any], Any], Any]] = (
        ("utility", _utility, problem.utility),
        ("weighting", _weighting, problem.weighting),
        ("loss", _loss, problem.loss),
        ("phi", _phi, problem.phi),
    )
    parts: Dict[str, Any] = {}
    for section, build, section_cfg in builders:
        try:
            parts[section] = build(section_cfg)
        except (DomainError, ValueError) as exc:
            raise ValidationError(f"{section}.{section_cfg.kind}", str(exc)) from exc
    try:
        return ProblemSpec(beta=problem.beta, premium=problem.premium,  # type: ignore[arg-type]
                           budget=problem.budget, **parts)
    except (DomainError, ValueError) as exc:
        raise ValidationError("beta", str(exc)) from exc


def _prepare(config: RunConfig) -> Tuple[ProblemSpec, TransformedProblem]:
    spec = build_problem_spec(config.problem)
    tp = transform_problem(spec, Grid(config.grid.n))
    return spec, tp


def _classify(tp: TransformedProblem, log: SolverLogger) -> Classification:
    verdict = feasibility_classify(tp)
    log.classification(verdict.kind.value, verdict.threshold, verdict.varpi)
    if verdict.kind is Feasibility.INFEASIBLE:
        raise InfeasibleProblem(verdict.threshold, verdict.varpi)
    return verdict


def _solve(config: RunConfig, tp: TransformedProblem,
           log: SolverLogger) -> Tuple[FbpSolution, Optional[CalibrationResult]]:
    """Solve at the configured multiplier, or calibrate it against the budget."""
    max_sweeps = config.solver.max_iters
    result = None
    if config.lam is not None:
        sol = solve_fbp(tp, config.lam, max_sweeps=max_sweeps, check_feasibility=False)
    else:
        result = calibrate_lambda(tp, max_sweeps=max_sweeps, on_step=log.calibration_step)
        sol = result.solution
    log.policy_sweep(sol.lam, sol.sweeps, sol.newton_steps, sol.branch_counts())
    return sol, result


def _out_dir(config: RunConfig) -> Path:
    return Path(config.output.dir)


# ============================================================================
# MODES
# ============================================================================

def _run_solve(config: RunConfig, log: SolverLogger) -> int:
    spec, tp = _prepare(config)
    verdict = _classify(tp, log)
    sol, calibration = _solve(config, tp, log)

    report = residual_check(sol, tp)
    if not report.clean:
        log.warning(f"Complementarity residual above tolerance at {len(report.flagged_nodes)} nodes",
                    {"max_residual": report.max_residual,
                     "first_nodes": list(report.flagged_nodes[:10])})

    wealth = recover_quantile(sol, spec.weighting, tp.grid)
    project = config.solver.project_contract
    contract = recover_contract(wealth, spec.loss, spec.beta, project=project)
    ic_tol = ic_tolerance(tp)
    ic = validate_incentive_compatibility(contract, tol=ic_tol)
    if not ic.compliant:
        log.ic_violation(ic.count, ic.worst_node, ic.worst_magnitude)

    budget = budget_of(sol, tp)
    counts = sol.branch_counts()
    flat = calibration is not None and calibration.flat
    jump = calibration.jump if calibration is not None else None
    summary: Summary = [
        ("mode", config.mode),
        ("lambda", sol.lam),
        ("lambda_source", "override" if calibration is None else "calibrated"),
        ("varpi", tp.varpi),
        ("budget", budget),
        ("slackness", sol.lam * (budget - tp.varpi)),
        ("threshold", verdict.threshold),
        ("classification", verdict.kind.value),
        ("budget_flat", flat),
        ("budget_jump", jump is not None),
    ]
    if jump is not None:
        summary += [("budget_left", jump[0]), ("budget_right", jump[1])]
    summary += [
        ("rdut_value", rdut_value(wealth, spec.utility, spec.weighting)),
        ("uninsured_value", uninsured_value(spec, tp.grid)),
        ("premium", contract.premium),
        ("expected_retention", contract.expected_retention),
        ("residual_max", report.max_residual),
        ("residual_mean", report.mean_residual),
        ("residual_flagged", len(report.flagged_nodes)),
        ("obstacle_violation", report.max_obstacle_violation),
        ("derivative_violation", report.max_derivative_violation),
        ("ic_compliant", ic.compliant),
        ("ic_violations", ic.count),
        ("ic_worst_excess", ic.worst_magnitude),
        ("ic_tolerance", ic_tol),
        ("ic_projected", project),
        ("ic_projection_gap", contract.projection_gap),
        ("nodes_ode", counts["ODE"]),
        ("nodes_obst", counts["OBST"]),
        ("nodes_flat", counts["FLAT"]),
        ("sweeps", sol.sweeps),
        ("newton_steps", sol.newton_steps),
    ]
    paths = emit_results(_out_dir(config), sol, tp, contract, summary)
    log.info("Results written", {name: str(path) for name, path in paths.items()})
    if not ic.compliant:
        raise IncentiveViolation(ic.count, ic.worst_node, ic.worst_magnitude)

    print(f"lambda = {sol.lam:.10g}, budget = {budget:.10g} (varpi = {tp.varpi:.10g})")
    for path in paths.values():
        print(f"  - {path}")
    return _cfg.EXIT_OK


def _run_feasibility(config: RunConfig, log: SolverLogger) -> int:
    _, tp = _prepare(config)
    verdict = feasibility_classify(tp)
    log.classification(verdict.kind.value, verdict.threshold, verdict.varpi)
    write_summary(_out_dir(config) / _cfg.SUMMARY_FILE, [
        ("mode", config.mode),
        ("classification", verdict.kind.value),
        ("threshold", verdict.threshold),
        ("varpi", verdict.varpi),
        ("tolerance", verdict.tol),
    ])
    if verdict.kind is Feasibility.INFEASIBLE:
        raise InfeasibleProblem(verdict.threshold, verdict.varpi)
    print(f"{verdict.kind.value}: threshold = {verdict.threshold:{_cfg.THRESHOLD_FORMAT}}, "
          f"varpi = {verdict.varpi:{_cfg.THRESHOLD_FORMAT}}")
    return _cfg.EXIT_OK


def _run_oracle_check(config: RunConfig, log: SolverLogger) -> int:
    _, tp = _prepare(config)
    _classify(tp, log)
    sol, _ = _solve(config, tp, log)

    projected = oracle_projected(tp, sol.lam)
    full = compare(sol.quantile, projected)
    log.oracle_report(full.sup_norm, full.mean_abs, tp.grid.n)
    write_table(
        _out_dir(config) / _cfg.ORACLE_FILE, _cfg.ORACLE_HEADER,
        zip(tp.p, sol.quantile, projected, np.abs(sol.quantile - projected)),
    )

    summary: Summary = [
        ("mode", config.mode),
        ("lambda", sol.lam),
        ("nodes", tp.grid.n),
        ("projected_sup_norm", full.sup_norm),
        ("projected_mean_abs", full.mean_abs),
    ]
    m = config.solver.oracle_nodes
    if m >= 2:
        coarse = oracle_exhaustive(tp, sol.lam, m=m, levels=config.solver.oracle_levels)
        idx = coarse_indices(tp.grid.n, m)
        gap = compare(sol.quantile[idx], coarse)
        log.oracle_report(gap.sup_norm, gap.mean_abs, m)
        summary += [
            ("exhaustive_nodes", m),
            ("exhaustive_levels", config.solver.oracle_levels),
            ("exhaustive_sup_norm", gap.sup_norm),
            ("exhaustive_mean_abs", gap.mean_abs),
        ]
    agrees = full.sup_norm <= _cfg.ORACLE_AGREEMENT_TOL
    summary.append(("agrees", agrees))
    write_summary(_out_dir(config) / _cfg.SUMMARY_FILE, summary)
    print(f"oracle check: sup |Q_fbp - Q_oracle| = {full.sup_norm:.3e} "
          f"({'agrees' if agrees else 'DISAGREES'})")
    return _cfg.EXIT_OK


def _run_envelope(config: RunConfig, log: SolverLogger) -> int:
    if config.envelope.values:
        values = np.asarray(config.envelope.values, dtype=float)
        grid = Grid(values.size)
    else:
        _, tp = _prepare(config)
        values = (config.lam if config.lam is not None else 1.0) * tp.phi_tilde
        grid = tp.grid
    envelope = concave_envelope(values, grid)
    write_table(_out_dir(config) / _cfg.ENVELOPE_FILE, _cfg.ENVELOPE_HEADER,
                zip(grid.nodes, values, envelope))
    gap = float(np.max(envelope - values))
    write_summary(_out_dir(config) / _cfg.SUMMARY_FILE, [
        ("mode", config.mode),
        ("nodes", grid.n),
        ("max_gap", gap),
    ])
    log.info("Concave envelope computed", {"nodes": grid.n, "max_gap": gap})
    print(f"envelope: {grid.n} nodes, max gap = {gap:.10g}")
    return _cfg.EXIT_OK


def _run_sweep(config: RunConfig, log: SolverLogger) -> int:
    _, tp = _prepare(config)
    _classify(tp, log)
    ladder = budget_ladder(tp, config.solver.lambda_ladder, max_sweeps=config.solver.max_iters)
    for point in ladder:
        log.policy_sweep(point.lam, point.sweeps, point.newton_steps)
    write_table(_out_dir(config) / _cfg.SWEEP_FILE, _cfg.SWEEP_HEADER,
                ((pt.lam, pt.budget, pt.sweeps, pt.newton_steps) for pt in ladder))
    monotone = is_non_increasing(ladder)
    if not monotone:
        log.warning("Budget is not non-increasing along the multiplier ladder")
    write_summary(_out_dir(config) / _cfg.SUMMARY_FILE, [
        ("mode", config.mode),
        ("points", len(ladder)),
        ("varpi", tp.varpi),
        ("non_increasing", monotone),
    ])
    print(f"sweep: {len(ladder)} multipliers, budget non-increasing = {monotone}")
    return _cfg.EXIT_OK


_MODES: Dict[str, Callable[[RunConfig, SolverLogger], int]] = {
    "solve": _run_solve,
    "feasibility": _run_feasibility,
    "oracle-check": _run_oracle_check,
    "envelope": _run_envelope,
    "sweep": _run_sweep,
}


def _exit_code(exc: SolverError) -> int:
    if isinstance(exc, InfeasibleProblem):
        return _cfg.EXIT_INFEASIBLE
    if isinstance(exc, NoConvergence):
        return _cfg.EXIT_NO_CONVERGENCE
    return _cfg.EXIT_ERROR


def run(config: RunConfig, log: Optional[SolverLogger] = None) -> int:
    """Execute ``config.mode`` and return the process exit status."""
    log = log or get_logger()
    started = time.perf_counter()
    log.start_run(config.mode, {"grid_n": config.grid.n, "lambda": config.lam,
                                "out": config.output.dir})
    try:
        code = _MODES[config.mode](config, log)
    except SolverError as exc:
        code = _exit_code(exc)
        log.error(f"{type(exc).__name__}: {exc}", exc.to_dict())
        print(f"Error: {exc}", file=sys.stderr)
    log.end_run(config.mode, code, time.perf_counter() - started)
    return code


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _build_parser() -> argparse.ArgumentParser:
    """Build and return the CLI argument parser."""
    parser = argparse.ArgumentParser(
        prog=_cfg.PROGRAM_NAME,
        description=f"Optimal insurance contract solver v{_cfg.__version__}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-V", "--version", action="version",
                        version=f"%(prog)s {_cfg.__version__}")
    parser.add_argument("mode", nargs="?", default=None, choices=MODES,
                        help="Run mode (default: from config, else solve)")
    parser.add_argument("--config", type=str, default=None,
                        help="Path to YAML configuration file")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="Fixed Lagrange multiplier (skips calibration)")
    parser.add_argument("--grid-n", type=int, default=None,
                        help=f"Grid node count (>= {_cfg.MIN_GRID_NODES})")
    parser.add_argument("--out", type=str, default=None,
                        help="Output directory")
    parser.add_argument("--init-config", action="store_true",
                        help="Generate default config.yaml (or --config path) and exit")
    parser.add_argument("--log-level", type=str, default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Logging level")
    parser.add_argument("--log-file", type=str, default=None,
                        help="Path to log file")
    parser.add_argument("--log-format", type=str, default=None,
                        choices=["console", "json"],
                        help="Log record format")
    return parser


def _cli_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "mode": args.mode,
        "lam": args.lam,
        "grid.n": args.grid_n,
        "output.dir": args.out,
        "logging.level": args.log_level,
        "logging.file": args.log_file,
        "logging.format": args.log_format,
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.init_config:
        path = generate_config(args.config or "config.yaml")
        print(f"Generated {path}")
        return _cfg.EXIT_OK

    try:
        config = load_config(args.config, _cli_overrides(args))
    except (ParseError, ValidationError) as exc:
        print(f"Config error: {exc}", file=sys.stderr)
        return _cfg.EXIT_ERROR

    try:
        log = setup_logging(level=config.logging.level, format_type=config.logging.format,
                            log_file=config.logging.file)
    except OSError as exc:
        print(f"Error: cannot open log file {config.logging.file}: {exc}", file=sys.stderr)
        return _cfg.EXIT_ERROR
    log.config_loaded(config.to_dict())
    return run(config, log)
