#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Інтеграційні тести для contractsolve.py
Тестує:
- --version / --help / --init-config
- режими solve, feasibility, oracle-check, envelope, sweep
- коди виходу (0 / 1 / 2 / 3)
- пріоритет ENV та CLI
- відтворюваність результатів
"""
import json
import re
import sys
from pathlib import Path

import numpy as np
import pytest

from solver import constants as _cfg

# Коренева директорія проекту (батьківська від tests/)
PROJECT_ROOT = Path(__file__).resolve().parent.parent

SCRIPT = str(PROJECT_ROOT / "contractsolve.py")

pytestmark = pytest.mark.integration

ORACLE_YAML = """\
problem:
  beta: 2.0
  budget: 1.6
  utility:
    kind: crra
    gamma: 2.0
  weighting:
    kind: power
    gamma: 0.5
  loss:
    kind: uniform
    b: 1.0
grid:
  n: 257
solver:
  oracle_nodes: 9
  oracle_levels: 5
"""


def _summary(path):
    """Розбирає summary.txt у словник."""
    items = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        key, value = line.split(" : ", 1)
        items[key.strip()] = value.strip()
    return items


# ============================================================================
# ТЕСТИ ВЕРСІЇ ТА ДОВІДКИ
# ============================================================================

class TestVersion:
    """Тести версії."""

    def test_version(self, run_cli):
        result = run_cli([sys.executable, SCRIPT, "--version"])
        assert result.returncode == 0
        assert _cfg.__version__ in result.stdout

    def test_version_consistent(self):
        """Версія обгортки узгоджена з пакетом (єдине джерело правди)."""
        text = (PROJECT_ROOT / "contractsolve.py").read_text(encoding="utf-8")
        assert "from solver.cli import main" in text
        assert re.match(r"^\d+\.\d+\.\d+$", _cfg.__version__)

    def test_help(self, run_cli):
        result = run_cli([sys.executable, SCRIPT, "--help"])
        assert result.returncode == 0
        for option in ("--config", "--lambda", "--grid-n", "--out", "--init-config"):
            assert option in result.stdout

    def test_module_entry(self, run_cli):
        result = run_cli([sys.executable, ".", "--version"])
        assert result.returncode == 0


# ============================================================================
# ТЕСТИ --init-config
# ============================================================================

class TestInitConfig:
    def test_generates_file(self, run_cli, temp_dir):
        target = temp_dir / "generated.yaml"
        result = run_cli([sys.executable, SCRIPT, "--init-config", "--config", str(target)])
        assert result.returncode == 0
        assert target.exists()
        assert "Generated" in result.stdout

    def test_generated_file_runs(self, run_cli, temp_dir):
        target = temp_dir / "generated.yaml"
        run_cli([sys.executable, SCRIPT, "--init-config", "--config", str(target)])
        result = run_cli([sys.executable, SCRIPT, "feasibility", "--config", str(target),
                          "--grid-n", "65", "--out", str(temp_dir / "out")])
        assert result.returncode == 0, result.stderr
        assert result.stdout.startswith("feasible")


# ============================================================================
# ТЕСТИ РЕЖИМУ solve
# ============================================================================

class TestSolve:
    """Аналітичний CARA випадок: бюджет 1.6 між порогом 1.5 та максимумом 2."""

    def test_calibrated(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(budget=1.6, n=129))
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(config), "--out", str(out)])
        assert result.returncode == 0, result.stderr
        summary = _summary(out / _cfg.SUMMARY_FILE)
        assert summary["lambda_source"] == "calibrated"
        assert summary["classification"] == "feasible"
        assert float(summary["budget"]) == pytest.approx(1.6, abs=1e-6)
        assert float(summary["lambda"]) == pytest.approx(0.2352, rel=2e-2)
        assert summary["ic_compliant"] == "true"
        assert summary["ic_projected"] == "false"
        assert float(summary["ic_projection_gap"]) == 0.0
        assert summary["budget_flat"] == "false"
        assert summary["budget_jump"] == "false"
        assert (out / _cfg.QUANTILE_FILE).exists()
        assert (out / _cfg.CONTRACT_FILE).exists()

    def test_fixed_lambda(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(n=129))
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "--config", str(config), "--lambda", "1.0",
                          "--out", str(out)])
        assert result.returncode == 0, result.stderr
        summary = _summary(out / _cfg.SUMMARY_FILE)
        assert summary["lambda_source"] == "override"
        assert float(summary["budget"]) == pytest.approx(1.5, abs=1e-6)
        assert summary["nodes_ode"] == "129"

    def test_threshold_budget(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(budget=1.5, n=129))
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(config), "--out", str(out)])
        assert result.returncode == 0, result.stderr
        summary = _summary(out / _cfg.SUMMARY_FILE)
        assert summary["classification"] == "unique"
        assert summary["budget_flat"] == "true"
        assert float(summary["budget"]) == pytest.approx(1.5, abs=1e-9)

    def test_small_grid_rows(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(n=9))
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(config), "--out", str(out)])
        assert result.returncode == 0, result.stderr
        lines = (out / _cfg.QUANTILE_FILE).read_text(encoding="utf-8").splitlines()
        assert len(lines) == 10
        assert lines[0] == ",".join(_cfg.QUANTILE_HEADER)

    def test_infeasible_exit_code(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(budget=1.4, n=129))
        result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(config),
                          "--out", str(temp_dir / "out")])
        assert result.returncode == _cfg.EXIT_INFEASIBLE
        assert "1.5" in result.stderr

    def test_byte_identical_reruns(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(n=65))
        for name in ("a", "b"):
            result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(config),
                              "--out", str(temp_dir / name)])
            assert result.returncode == 0, result.stderr
        for file_name in (_cfg.QUANTILE_FILE, _cfg.CONTRACT_FILE, _cfg.SUMMARY_FILE):
            first = (temp_dir / "a" / file_name).read_bytes()
            assert first == (temp_dir / "b" / file_name).read_bytes()


# ============================================================================
# ТЕСТИ ІНШИХ РЕЖИМІВ
# ============================================================================

class TestModes:
    def test_feasibility_unique(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(budget=1.5, n=65))
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "feasibility", "--config", str(config),
                          "--out", str(out)])
        assert result.returncode == 0, result.stderr
        assert _summary(out / _cfg.SUMMARY_FILE)["classification"] == "unique"

    def test_feasibility_infeasible_writes_summary(self, run_cli, analytic_yaml, write_config,
                                                   temp_dir):
        config = write_config(analytic_yaml(budget=1.4, n=65))
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "feasibility", "--config", str(config),
                          "--out", str(out)])
        assert result.returncode == _cfg.EXIT_INFEASIBLE
        summary = _summary(out / _cfg.SUMMARY_FILE)
        assert summary["classification"] == "infeasible"
        assert float(summary["threshold"]) == pytest.approx(1.5)

    @pytest.mark.slow
    def test_oracle_check(self, run_cli, write_config, temp_dir):
        config = write_config(ORACLE_YAML)
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "oracle-check", "--config", str(config),
                          "--lambda", "3", "--out", str(out)])
        assert result.returncode == 0, result.stderr
        summary = _summary(out / _cfg.SUMMARY_FILE)
        assert float(summary["projected_sup_norm"]) <= 5e-3
        assert summary["agrees"] == "true"
        assert summary["exhaustive_nodes"] == "9"
        lines = (out / _cfg.ORACLE_FILE).read_text(encoding="utf-8").splitlines()
        assert len(lines) == 258

    def test_envelope_of_values(self, run_cli, write_config, temp_dir):
        values = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]
        config = write_config(f"mode: envelope\nenvelope:\n  values: {values}\n")
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "--config", str(config), "--out", str(out)])
        assert result.returncode == 0, result.stderr
        rows = (out / _cfg.ENVELOPE_FILE).read_text(encoding="utf-8").splitlines()[1:]
        assert len(rows) == 9
        assert float(rows[4].split(",")[2]) == pytest.approx(1.0)
        assert float(_summary(out / _cfg.SUMMARY_FILE)["max_gap"]) == pytest.approx(1.0)

    def test_sweep(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(n=65))
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "sweep", "--config", str(config), "--out", str(out)])
        assert result.returncode == 0, result.stderr
        assert _summary(out / _cfg.SUMMARY_FILE)["non_increasing"] == "true"
        rows = (out / _cfg.SWEEP_FILE).read_text(encoding="utf-8").splitlines()
        assert len(rows) == 1 + len(_cfg.DEFAULT_LAMBDA_LADDER)


# ============================================================================
# ТЕСТИ КОНФІГУРАЦІЇ ТА ЛОГУВАННЯ
# ============================================================================

class TestConfigHandling:
    def test_missing_config(self, run_cli, temp_dir):
        result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(temp_dir / "absent.yaml")])
        assert result.returncode == _cfg.EXIT_ERROR
        assert "Config error" in result.stderr

    def test_invalid_grid(self, run_cli, analytic_yaml, write_config):
        config = write_config(analytic_yaml(n=5))
        result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(config)])
        assert result.returncode == _cfg.EXIT_ERROR
        assert "grid.n >= 9" in result.stderr

    def test_env_grid_override(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(n=129))
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(config), "--out", str(out)],
                         extra_env={"CONTRACTSOLVE_GRID_N": "17"})
        assert result.returncode == 0, result.stderr
        lines = (out / _cfg.QUANTILE_FILE).read_text(encoding="utf-8").splitlines()
        assert len(lines) == 18

    def test_cli_beats_env(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(n=129))
        out = temp_dir / "out"
        result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(config), "--out", str(out),
                          "--grid-n", "9"], extra_env={"CONTRACTSOLVE_GRID_N": "17"})
        assert result.returncode == 0, result.stderr
        assert len((out / _cfg.QUANTILE_FILE).read_text(encoding="utf-8").splitlines()) == 10

    def test_json_log_file(self, run_cli, analytic_yaml, write_config, temp_dir):
        config = write_config(analytic_yaml(n=33))
        log_file = temp_dir / "run.log"
        result = run_cli([sys.executable, SCRIPT, "solve", "--config", str(config),
                          "--out", str(temp_dir / "out"), "--log-format", "json",
                          "--log-file", str(log_file), "--log-level", "DEBUG"])
        assert result.returncode == 0, result.stderr
        entries = [json.loads(line) for line in log_file.read_text(encoding="utf-8").splitlines()]
        messages = [entry["message"] for entry in entries]
        assert "Starting run: solve" in messages
        assert "Finished run: solve" in messages
        assert entries[-1]["data"]["exit_code"] == 0
        assert any(entry["message"] == "Calibration step" for entry in entries)


# ============================================================================
# ТЕСТИ main() В ПРОЦЕСІ
# ============================================================================

class TestMainInProcess:
    """main() повертає код виходу без запуску підпроцесу."""

    @pytest.fixture(autouse=True)
    def _reset_logger(self):
        yield
        import modules.solver_logger as solver_logger
        if solver_logger._logger is not None:
            solver_logger._logger.close()
        solver_logger._logger = None

    def test_feasibility(self, analytic_yaml, write_config, temp_dir, clean_env, capsys):
        from solver.cli import main
        config = write_config(analytic_yaml(n=33))
        code = main(["feasibility", "--config", str(config), "--out", str(temp_dir / "out")])
        assert code == 0
        assert capsys.readouterr().out.startswith("feasible")

    def test_infeasible(self, analytic_yaml, write_config, temp_dir, clean_env, capsys):
        from solver.cli import main
        config = write_config(analytic_yaml(budget=1.2, n=33))
        code = main(["solve", "--config", str(config), "--out", str(temp_dir / "out")])
        assert code == _cfg.EXIT_INFEASIBLE
        assert "threshold 1.5" in capsys.readouterr().err

    def test_no_convergence_exit_code(self, analytic_yaml, write_config, temp_dir, clean_env,
                                      monkeypatch, capsys):
        """Вичерпаний ліміт ітерацій дає код виходу 3."""
        import solver.cli as cli
        from solver.fbp import solve_fbp

        monkeypatch.setattr(cli, "solve_fbp",
                            lambda tp, lam, **kwargs: solve_fbp(tp, lam, max_sweeps=0))
        config = write_config(analytic_yaml(n=33))
        code = cli.main(["solve", "--config", str(config), "--lambda", "1.0",
                         "--out", str(temp_dir / "out")])
        assert code == _cfg.EXIT_NO_CONVERGENCE
        assert "sweep cap" in capsys.readouterr().err

    @staticmethod
    def _steep_wealth(sol, weighting, grid):
        # slope 10 on [0.9, 1] while hbar = 1
        return np.maximum(1.0, 2.0 - 10.0 * (1.0 - grid.nodes))

    def test_incentive_violation_fails_run(self, analytic_yaml, write_config, temp_dir,
                                           clean_env, monkeypatch, capsys):
        import solver.cli as cli

        monkeypatch.setattr(cli, "recover_quantile", self._steep_wealth)
        out = temp_dir / "out"
        config = write_config(analytic_yaml(n=65))
        code = cli.main(["solve", "--config", str(config), "--lambda", "1.0", "--out", str(out)])
        assert code == _cfg.EXIT_ERROR
        assert "not incentive compatible" in capsys.readouterr().err
        summary = _summary(out / _cfg.SUMMARY_FILE)
        assert summary["ic_compliant"] == "false"
        assert int(summary["ic_violations"]) > 0
        assert (out / _cfg.CONTRACT_FILE).exists()

    def test_projection_repairs_contract(self, analytic_yaml, write_config, temp_dir,
                                         clean_env, monkeypatch):
        import solver.cli as cli

        monkeypatch.setattr(cli, "recover_quantile", self._steep_wealth)
        out = temp_dir / "out"
        config = write_config(analytic_yaml(n=65, extra="solver:\n  project_contract: true\n"))
        code = cli.main(["solve", "--config", str(config), "--lambda", "1.0", "--out", str(out)])
        assert code == _cfg.EXIT_OK
        summary = _summary(out / _cfg.SUMMARY_FILE)
        assert summary["ic_projected"] == "true"
        assert summary["ic_compliant"] == "true"
        assert float(summary["ic_projection_gap"]) > 0.0


# ============================================================================
# ТЕСТИ МАТРИЦІ КОНФІГУРАЦІЙ
# ============================================================================

class TestMatrixRuns:
    """Calibrated solve of every matrix configuration through run()."""

    def test_solve(self, matrix_case, temp_dir):
        from modules.config import RunConfig, validate
        from modules.solver_logger import SolverLogger
        from solver.cli import run

        utility, weighting, loss = matrix_case.split("-")
        data = {
            "beta": 2.0, "budget": 1.9, "grid.n": 129, "output.dir": str(temp_dir / "out"),
            "utility.kind": {"cara": "cara", "crra2": "crra", "log": "log"}[utility],
            "weighting.kind": {"identity": "identity", "power": "power",
                               "prelec": "prelec"}[weighting],
            "loss.kind": {"uniform": "uniform", "mass": "mass_at_zero"}[loss],
            "utility.alpha": 1.0, "utility.gamma": 2.0,
            "weighting.gamma": 0.5, "weighting.a": 0.65, "weighting.b": 1.0,
            "loss.q": 0.3, "loss.b": 1.0,
        }
        config = validate(RunConfig.from_dict(data))
        code = run(config, SolverLogger(name="test_matrix_run"))
        assert code == _cfg.EXIT_OK
        summary = _summary(temp_dir / "out" / _cfg.SUMMARY_FILE)
        assert float(summary["budget"]) == pytest.approx(1.9, abs=1e-6)
        assert summary["ic_compliant"] == "true"
        assert float(summary["residual_max"]) <= 1e-8
