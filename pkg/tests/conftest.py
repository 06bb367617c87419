# -*- coding: utf-8 -*-
"""
Pytest configuration and fixtures for contractsolve tests
"""
import os
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Коренева директорія проекту (батьківська від tests/)
PROJECT_ROOT = Path(__file__).resolve().parent.parent

sys.path.insert(0, str(PROJECT_ROOT))

# Force UTF-8 for subprocess on Windows (fixes cp1251 UnicodeDecodeError)
if sys.platform == "win32":
    os.environ.setdefault("PYTHONIOENCODING", "utf-8")

from solver.fbp import solve_fbp  # noqa: E402
from solver.model import LossModel, PhiSpec, ProblemSpec, UtilitySpec, WeightingSpec  # noqa: E402
from solver.transform import Grid, TransformedProblem, transform_problem  # noqa: E402

ENV_PREFIX = "CONTRACTSOLVE_"


# ============================================================================
# AUTOUSE FIXTURES
# ============================================================================

@pytest.fixture(autouse=True)
def cleanup_config_yaml():
    """Автоматично видаляє config.yaml з кореня проекту після тесту."""
    yield
    config_path = PROJECT_ROOT / "config.yaml"
    if config_path.exists():
        try:
            config_path.unlink()
        except OSError:
            pass


@pytest.fixture(autouse=True)
def cleanup_solver_env():
    """Автоматично очищає змінні оточення CONTRACTSOLVE_* після тесту."""
    yield
    for key in [k for k in os.environ if k.startswith(ENV_PREFIX)]:
        os.environ.pop(key, None)


# ============================================================================
# GENERAL FIXTURES
# ============================================================================

@pytest.fixture
def run_cli():
    """Run a CLI command with UTF-8 encoding (cross-platform).

    Usage:
        result = run_cli([sys.executable, "contractsolve.py", "solve", "--config", path])
        assert result.returncode == 0
    """
    def _run(cmd, **kwargs):
        kwargs.setdefault("encoding", "utf-8")
        kwargs.setdefault("errors", "replace")
        kwargs.setdefault("capture_output", True)
        kwargs.setdefault("cwd", str(PROJECT_ROOT))
        env = {k: v for k, v in os.environ.items() if not k.startswith(ENV_PREFIX)}
        env.update(kwargs.pop("extra_env", {}))
        kwargs.setdefault("env", env)
        return subprocess.run(cmd, **kwargs)
    return _run


@pytest.fixture
def temp_dir():
    """Тимчасова директорія, що автоматично видаляється."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def clean_env():
    """Чисте оточення без CONTRACTSOLVE_* змінних.

    Зберігає поточний стан змінних оточення і відновлює після тесту.
    """
    saved = {k: v for k, v in os.environ.items() if k.startswith(ENV_PREFIX)}
    for key in saved:
        del os.environ[key]
    yield
    for key in list(os.environ):
        if key.startswith(ENV_PREFIX):
            del os.environ[key]
    os.environ.update(saved)


# ============================================================================
# PROBLEM FIXTURES
# ============================================================================

@pytest.fixture
def cara_spec():
    """Аналітичний випадок: CARA(1), beta=2, X ~ U(0, 1), w = identity, phi = 1."""
    return ProblemSpec(
        beta=2.0,
        utility=UtilitySpec.cara(1.0),
        weighting=WeightingSpec.identity(),
        loss=LossModel.uniform(1.0),
        phi=PhiSpec.constant(1.0),
        budget=1.6,
    )


@pytest.fixture
def make_transformed():
    """Factory for a TransformedProblem with hbar = 1, phi_tilde = p on n nodes."""
    def _make(n=1025, varpi=1.6, beta=2.0, utility=None, hbar=None):
        grid = Grid(n)
        p = grid.nodes
        return TransformedProblem(
            grid=grid,
            hbar=np.ones(n) if hbar is None else np.asarray(hbar, dtype=float),
            phi_tilde=p.copy(),
            phi_tilde_prime=np.ones(n),
            beta=beta,
            varpi=varpi,
            utility=utility or UtilitySpec.cara(1.0),
        )
    return _make


@pytest.fixture
def analytic_tp(make_transformed):
    """CARA(1) problem on 1025 nodes with hbar = 1 and phi_tilde = p."""
    return make_transformed(n=1025)


@pytest.fixture
def crra_power_spec():
    """CRRA(2), concave power weighting, uniform loss: bounded hbar."""
    def _make(budget=1.6):
        return ProblemSpec(
            beta=2.0,
            utility=UtilitySpec.crra(2.0),
            weighting=WeightingSpec.power(0.5),
            loss=LossModel.uniform(1.0),
            budget=budget,
        )
    return _make


@pytest.fixture
def transform_spec():
    """Transform any ProblemSpec onto an n-node grid."""
    def _transform(spec, n=257):
        return transform_problem(spec, Grid(n))
    return _transform


# ============================================================================
# CONFIGURATION MATRIX
# ============================================================================

_MATRIX = {
    "cara-identity-uniform": lambda: (UtilitySpec.cara(1.0), WeightingSpec.identity(),
                                      LossModel.uniform(1.0)),
    "crra2-power-uniform": lambda: (UtilitySpec.crra(2.0), WeightingSpec.power(0.5),
                                    LossModel.uniform(1.0)),
    "crra2-prelec-uniform": lambda: (UtilitySpec.crra(2.0), WeightingSpec.prelec(0.65, 1.0),
                                     LossModel.uniform(1.0)),
    "log-power-mass": lambda: (UtilitySpec.log(), WeightingSpec.power(0.5),
                               LossModel.mass_at_zero(0.3, 1.0)),
    "log-prelec-uniform": lambda: (UtilitySpec.log(), WeightingSpec.prelec(0.65, 1.0),
                                   LossModel.uniform(1.0)),
    "cara-power-mass": lambda: (UtilitySpec.cara(1.0), WeightingSpec.power(0.5),
                                LossModel.mass_at_zero(0.3, 1.0)),
    "cara-prelec-mass": lambda: (UtilitySpec.cara(1.0), WeightingSpec.prelec(0.65, 1.0),
                                 LossModel.mass_at_zero(0.3, 1.0)),
}

_TRANSFORMS: dict = {}
_SOLUTIONS: dict = {}


@pytest.fixture(params=list(_MATRIX), ids=list(_MATRIX))
def matrix_case(request):
    """Назва конфігурації з матриці utility x weighting x loss."""
    return request.param


@pytest.fixture(params=[0.2, 1.0, 3.0], ids=lambda lam: f"lam={lam:g}")
def matrix_lambda(request):
    return request.param


@pytest.fixture
def matrix_spec(matrix_case):
    utility, weighting, loss = _MATRIX[matrix_case]()
    return ProblemSpec(beta=2.0, utility=utility, weighting=weighting, loss=loss, budget=1.9)


@pytest.fixture
def matrix_tp(matrix_case, matrix_spec):
    """Cached transform of the matrix configuration on n nodes."""
    def _transform(n=257):
        key = (matrix_case, n)
        if key not in _TRANSFORMS:
            _TRANSFORMS[key] = transform_problem(matrix_spec, Grid(n))
        return _TRANSFORMS[key]
    return _transform


@pytest.fixture
def matrix_solution(matrix_case, matrix_tp):
    """Cached (tp, solve_fbp(tp, lam)) for the matrix configuration."""
    def _solve(lam, n=257):
        key = (matrix_case, n, lam)
        if key not in _SOLUTIONS:
            tp = matrix_tp(n)
            _SOLUTIONS[key] = (tp, solve_fbp(tp, lam, check_feasibility=False))
        return _SOLUTIONS[key]
    return _solve


# ============================================================================
# CONFIG FIXTURES
# ============================================================================

@pytest.fixture
def analytic_yaml():
    """Вміст YAML конфігурації для аналітичного CARA випадку."""
    def _make(budget=1.6, n=129, extra=""):
        return f"""\
problem:
  beta: 2.0
  budget: {budget}
  utility:
    kind: cara
    alpha: 1.0
  weighting:
    kind: identity
  loss:
    kind: uniform
    b: 1.0
grid:
  n: {n}
{extra}"""
    return _make


@pytest.fixture
def write_config(temp_dir):
    """Write YAML text into temp_dir and return the path."""
    def _write(text, name="config.yaml"):
        path = temp_dir / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write
