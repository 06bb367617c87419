#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Configuration Module v1.0.0 for contractsolve

Provides YAML + ENV + CLI configuration loading with priority resolution:
    CLI > ENV > config.yaml > Default

The YAML file may use nested sections or flat dotted keys
(``utility.kind: cara``); problem keys may omit the ``problem.`` prefix.
Loaded configurations are validated before they are returned.
"""

__version__ = "1.0.0"

import logging
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from solver import constants as _cfg
from solver.errors import ParseError, ValidationError

# ---------------------------------------------------------------------------
# YAML availability check
# ---------------------------------------------------------------------------
try:
    import yaml
    YAML_AVAILABLE = True
except ImportError:
    yaml = None  # type: ignore[assignment]
    YAML_AVAILABLE = False

logger = logging.getLogger(__name__)

MODES = ("solve", "feasibility", "oracle-check", "envelope", "sweep")
LOG_FORMATS = ("console", "json")

_PROBLEM_KEYS = ("beta", "premium", "budget")
_PROBLEM_SECTIONS = ("utility", "weighting", "loss", "phi")
_ALIASES = {"lambda": "lam"}


# ===========================================================================
# Dataclass definitions
# ===========================================================================

@dataclass
class UtilityConfig:
    """Utility family: cara(alpha) | crra(gamma) | log | tabulated(wealth, marginal)."""
    kind: str = "cara"
    alpha: float = 1.0
    gamma: float = 2.0
    wealth: List[float] = field(default_factory=list)
    marginal: List[float] = field(default_factory=list)


@dataclass
class WeightingConfig:
    """Probability weighting: identity | power(gamma) | prelec(a, b) | tk(gamma)."""
    kind: str = "identity"
    gamma: float = 1.0
    a: float = 1.0
    b: float = 1.0


@dataclass
class LossConfig:
    """Loss model: uniform(b) | mass_at_zero(q, b) | tabulated(probabilities, quantiles)."""
    kind: str = "uniform"
    b: float = 1.0
    q: float = 0.0
    probabilities: List[float] = field(default_factory=list)
    quantiles: List[float] = field(default_factory=list)


@dataclass
class PhiConfig:
    """Budget weight phi: constant(c) | power(c, k) | tabulated(points, values)."""
    kind: str = "constant"
    c: float = 1.0
    k: float = 0.0
    points: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)


@dataclass
class ProblemConfig:
    """Problem data; give exactly one of premium and budget."""
    beta: Optional[float] = None
    premium: Optional[float] = None
    budget: Optional[float] = None
    utility: UtilityConfig = field(default_factory=UtilityConfig)
    weighting: WeightingConfig = field(default_factory=WeightingConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    phi: PhiConfig = field(default_factory=PhiConfig)


@dataclass
class GridConfig:
    n: int = _cfg.DEFAULT_GRID_NODES


@dataclass
class SolverConfig:
    """Iteration caps and oracle / sweep settings."""
    max_iters: int = _cfg.MAX_POLICY_SWEEPS
    oracle_nodes: int = _cfg.DEFAULT_ORACLE_NODES
    oracle_levels: int = _cfg.DEFAULT_ORACLE_LEVELS
    lambda_ladder: List[float] = field(
        default_factory=lambda: list(_cfg.DEFAULT_LAMBDA_LADDER)
    )
    project_contract: bool = False


@dataclass
class EnvelopeConfig:
    """Samples for envelope mode; empty means use phi_tilde of the problem."""
    values: List[float] = field(default_factory=list)


@dataclass
class OutputConfig:
    dir: str = "results"


@dataclass
class LoggingConfig:
    """Logging configuration."""
    level: str = "INFO"
    file: Optional[str] = None
    format: str = "console"


@dataclass
class RunConfig:
    """Top-level run configuration.

    Supports serialisation to/from plain dicts for YAML interchange.
    """
    mode: str = "solve"
    lam: Optional[float] = None
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    # ----- serialisation helpers -----

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Create a RunConfig from a nested or dotted-key dictionary.

        Unknown keys are logged and ignored.
        """
        cfg = cls()
        for dotted, value in flatten_keys(data).items():
            if not set_dotted(cfg, normalise_key(dotted), value):
                logger.warning("Unknown config key %r ignored", dotted)
        return cfg

    def to_dict(self) -> Dict[str, Any]:
        """Serialise the full configuration tree to a plain dictionary."""
        return asdict(self)


# ===========================================================================
# Dotted-key helpers
# ===========================================================================

def flatten_keys(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Flatten nested mappings into ``section.attr`` keys."""
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten_keys(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def normalise_key(dotted: str) -> str:
    head = dotted.split(".", 1)[0]
    if head in _PROBLEM_KEYS or head in _PROBLEM_SECTIONS:
        dotted = f"problem.{dotted}"
    return _ALIASES.get(dotted, dotted)


def set_dotted(cfg: Any, dotted: str, value: Any) -> bool:
    """Assign ``value`` at a dotted path; False if the path does not exist."""
    *parents, attr = dotted.split(".")
    target = cfg
    for part in parents:
        target = getattr(target, part, None)
        if target is None or not is_dataclass(target):
            return False
    if not hasattr(target, attr) or is_dataclass(getattr(target, attr)):
        return False
    setattr(target, attr, value)
    return True


# ===========================================================================
# Validation
# ===========================================================================

def _number(value: Any, name: str, optional: bool = False) -> Optional[float]:
    if value is None:
        if optional:
            return None
        raise ValidationError(name, "required")
    if isinstance(value, bool):
        raise ValidationError(name, "must be a number")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ValidationError(name, "must be a number") from None
    if not math.isfinite(number):
        raise ValidationError(name, "must be finite")
    return number


def _integer(value: Any, name: str) -> int:
    number = _number(value, name)
    if number is None or number != int(number):
        raise ValidationError(name, "must be an integer")
    return int(number)


def _numbers(values: Any, name: str) -> List[float]:
    if values is None:
        return []
    if not isinstance(values, (list, tuple)):
        raise ValidationError(name, "must be a list of numbers")
    return [float(_number(v, name)) for v in values]  # type: ignore[arg-type]


def _boolean(value: Any, name: str) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "yes", "on", "1"):
        return True
    if text in ("false", "no", "off", "0"):
        return False
    raise ValidationError(name, "must be true or false")


def _kind(value: Any, name: str, allowed: Tuple[str, ...]) -> str:
    kind = str(value).lower()
    if kind not in allowed:
        raise ValidationError(name, f"must be one of {', '.join(allowed)}")
    return kind


def validate(cfg: RunConfig) -> RunConfig:
    """Coerce types in place and raise ValidationError naming the bad field."""
    cfg.mode = _kind(cfg.mode, "mode", MODES)
    if cfg.lam is not None:
        cfg.lam = _number(cfg.lam, "lambda")
        if not cfg.lam > 0:  # type: ignore[operator]
            raise ValidationError("lambda", "must be > 0")

    n = _integer(cfg.grid.n, "grid.n")
    if n < _cfg.MIN_GRID_NODES:
        raise ValidationError(f"grid.n >= {_cfg.MIN_GRID_NODES}", f"got {n}")
    cfg.grid.n = n

    cfg.solver.max_iters = _integer(cfg.solver.max_iters, "solver.max_iters")
    if cfg.solver.max_iters < 1:
        raise ValidationError("solver.max_iters", "must be >= 1")
    cfg.solver.oracle_nodes = _integer(cfg.solver.oracle_nodes, "solver.oracle_nodes")
    cfg.solver.oracle_levels = _integer(cfg.solver.oracle_levels, "solver.oracle_levels")
    cfg.solver.lambda_ladder = _numbers(cfg.solver.lambda_ladder, "solver.lambda_ladder")
    if any(v <= 0 for v in cfg.solver.lambda_ladder):
        raise ValidationError("solver.lambda_ladder", "multipliers must be > 0")
    cfg.solver.project_contract = _boolean(cfg.solver.project_contract, "solver.project_contract")
    cfg.envelope.values = _numbers(cfg.envelope.values, "envelope.values")

    cfg.logging.format = _kind(cfg.logging.format, "logging.format", LOG_FORMATS)
    cfg.logging.level = str(cfg.logging.level).upper()

    if cfg.mode == "envelope" and cfg.envelope.values:
        if len(cfg.envelope.values) < _cfg.MIN_GRID_NODES:
            raise ValidationError(f"envelope.values >= {_cfg.MIN_GRID_NODES}",
                                  f"got {len(cfg.envelope.values)}")
        return cfg
    _validate_problem(cfg.problem)
    return cfg


def _validate_problem(problem: ProblemConfig) -> None:
    problem.beta = _number(problem.beta, "beta")
    problem.premium = _number(problem.premium, "premium", optional=True)
    problem.budget = _number(problem.budget, "budget", optional=True)
    if (problem.premium is None) == (problem.budget is None):
        raise ValidationError("budget", "give exactly one of premium and budget")

    u = problem.utility
    u.kind = _kind(u.kind, "utility.kind", _cfg.UTILITY_KINDS)
    u.alpha = float(_number(u.alpha, "utility.alpha"))  # type: ignore[arg-type]
    u.gamma = float(_number(u.gamma, "utility.gamma"))  # type: ignore[arg-type]
    u.wealth = _numbers(u.wealth, "utility.wealth")
    u.marginal = _numbers(u.marginal, "utility.marginal")

    w = problem.weighting
    w.kind = _kind(w.kind, "weighting.kind", _cfg.WEIGHTING_KINDS)
    for name in ("gamma", "a", "b"):
        setattr(w, name, float(_number(getattr(w, name), f"weighting.{name}")))  # type: ignore[arg-type]

    loss = problem.loss
    loss.kind = _kind(loss.kind, "loss.kind", _cfg.LOSS_KINDS)
    loss.b = float(_number(loss.b, "loss.b"))  # type: ignore[arg-type]
    loss.q = float(_number(loss.q, "loss.q"))  # type: ignore[arg-type]
    loss.probabilities = _numbers(loss.probabilities, "loss.probabilities")
    loss.quantiles = _numbers(loss.quantiles, "loss.quantiles")

    phi = problem.phi
    phi.kind = _kind(phi.kind, "phi.kind", _cfg.PHI_KINDS)
    phi.c = float(_number(phi.c, "phi.c"))  # type: ignore[arg-type]
    phi.k = float(_number(phi.k, "phi.k"))  # type: ignore[arg-type]
    phi.points = _numbers(phi.points, "phi.points")
    phi.values = _numbers(phi.values, "phi.values")


# ===========================================================================
# ConfigLoader: priority-based configuration resolver
# ===========================================================================

class ConfigLoader:
    """Load configuration with the following priority (highest wins):

        1. CLI arguments   (--lambda, --grid-n, --out, ...)
        2. ENV variables   (CONTRACTSOLVE_MAX_ITERS, ...)
        3. YAML file       (--config)
        4. Defaults        (dataclass defaults)
    """

    # Mapping: ENV variable name -> (dotted config key, type)
    ENV_MAPPING: Dict[str, tuple] = {
        "CONTRACTSOLVE_MAX_ITERS": ("solver.max_iters", int),
        "CONTRACTSOLVE_GRID_N": ("grid.n", int),
        "CONTRACTSOLVE_OUT_DIR": ("output.dir", str),
        "CONTRACTSOLVE_LOG_LEVEL": ("logging.level", str),
        "CONTRACTSOLVE_LOG_FILE": ("logging.file", str),
        "CONTRACTSOLVE_LOG_FORMAT": ("logging.format", str),
    }

    def __init__(
        self,
        config_path: Optional[str] = None,
        cli_args: Optional[Dict[str, Any]] = None,
        environ: Optional[Dict[str, str]] = None,
    ):
        self._config = RunConfig()
        self._config_path = config_path
        self._cli_args = cli_args or {}
        self._environ = environ

    @property
    def config(self) -> RunConfig:
        """Return the resolved configuration object."""
        return self._config

    # ----- YAML loading -----

    def _load_yaml(self, path: str) -> Dict[str, Any]:
        """Parse the YAML file; ParseError carries the line of a syntax error."""
        if not YAML_AVAILABLE:
            raise ParseError("PyYAML is required to read config files")

        filepath = Path(path)
        if not filepath.is_file():
            raise ParseError(f"config file not found: {filepath}")

        try:
            with open(filepath, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh)  # type: ignore[union-attr]
        except yaml.YAMLError as exc:  # type: ignore[union-attr]
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            problem = getattr(exc, "problem", None) or str(exc)
            raise ParseError(f"malformed config {filepath}: {problem}", line=line) from exc
        except OSError as exc:
            raise ParseError(f"cannot read config {filepath}: {exc}") from exc

        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ParseError(f"config {filepath} must be a mapping of keys to values", line=1)
        logger.info("Loaded YAML config from %s", filepath)
        return data

    # ----- ENV variable overlay -----

    def _apply_env(self) -> None:
        """Apply environment variable overrides to the current config."""
        import os

        env = self._environ if self._environ is not None else os.environ
        for env_var, (dotted, typ) in self.ENV_MAPPING.items():
            raw = env.get(env_var)
            if raw is None:
                continue

            value: Any
            if typ is int:
                try:
                    value = int(raw)
                except ValueError:
                    logger.warning("Invalid int for %s=%r — skipped", env_var, raw)
                    continue
            else:
                value = raw

            set_dotted(self._config, dotted, value)
            logger.debug("ENV override: %s = %r", dotted, value)

    # ----- CLI argument overlay -----

    def _apply_cli(self) -> None:
        """Apply CLI argument overrides (highest priority).

        ``cli_args`` uses dotted keys (``grid.n``) or top-level names
        (``mode``, ``lam``); ``None`` values are skipped.
        """
        for key, value in self._cli_args.items():
            if value is None:
                continue
            if set_dotted(self._config, normalise_key(key), value):
                logger.debug("CLI override: %s = %r", key, value)
            else:
                logger.warning("Unknown CLI override %r ignored", key)

    # ----- Main load method -----

    def load(self, validate_result: bool = True) -> RunConfig:
        """Load configuration using the priority chain and validate it."""
        if self._config_path:
            self._config = RunConfig.from_dict(self._load_yaml(self._config_path))

        self._apply_env()
        self._apply_cli()

        if validate_result:
            validate(self._config)
        return self._config

    # ----- Default config generation -----

    @staticmethod
    def generate_default_config(output_path: str = "config.yaml") -> str:
        """Generate a default YAML configuration file with comments.

        Returns the path to the generated file.
        """
        template = """\
# ==========================================================================
# contractsolve configuration v{version}
#
# Priority: CLI > ENV > config.yaml > Default
# Keys may be nested (as below) or flat and dotted (utility.kind: cara).
# ==========================================================================

# Mode: solve | feasibility | oracle-check | envelope | sweep
mode: solve

# Fixed multiplier; omit to calibrate it against the budget
# lambda: 1.0

# --------------------------------------------------------------------------
# Problem
# --------------------------------------------------------------------------
problem:
  # No-loss wealth; must exceed the largest possible loss
  beta: 2.0

  # Either a premium bound (budget = beta + premium - E[X]) or the budget
  budget: 1.6
  # premium: 0.1

  utility:
    # cara (alpha) | crra (gamma != 1) | log | tabulated (wealth, marginal)
    kind: cara
    alpha: 1.0

  weighting:
    # identity | power (gamma) | prelec (a, b) | tk (gamma)
    kind: identity

  loss:
    # uniform (b) | mass_at_zero (q, b) | tabulated (probabilities, quantiles)
    kind: uniform
    b: 1.0

  phi:
    # constant (c) | power (c, k) | tabulated (points, values)
    kind: constant
    c: 1.0

# --------------------------------------------------------------------------
# Discretisation and solver
# --------------------------------------------------------------------------
grid:
  n: {grid_n}

solver:
  # Policy-iteration sweep cap (ENV: CONTRACTSOLVE_MAX_ITERS)
  max_iters: {max_iters}
  oracle_nodes: {oracle_nodes}
  oracle_levels: {oracle_levels}
  lambda_ladder: [0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
  # Replace a retention that leaves 0 <= R' <= 1 by its projection
  # instead of failing the run
  project_contract: false

# --------------------------------------------------------------------------
# Output and logging
# --------------------------------------------------------------------------
output:
  dir: results

logging:
  # DEBUG | INFO | WARNING | ERROR | CRITICAL
  level: INFO
  file: null
  # console | json
  format: console
""".format(
            version=__version__,
            grid_n=_cfg.DEFAULT_GRID_NODES,
            max_iters=_cfg.MAX_POLICY_SWEEPS,
            oracle_nodes=_cfg.DEFAULT_ORACLE_NODES,
            oracle_levels=_cfg.DEFAULT_ORACLE_LEVELS,
        )

        output = Path(output_path)
        output.write_text(template, encoding="utf-8")
        logger.info("Generated default config: %s", output)
        return str(output.resolve())


# ===========================================================================
# Convenience functions
# ===========================================================================

def load_config(
    config_path: Optional[str] = None,
    cli_args: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Load, validate and return the run configuration::

        from modules.config import load_config
        cfg = load_config("config.yaml")
        print(cfg.grid.n)
    """
    loader = ConfigLoader(config_path=config_path, cli_args=cli_args)
    return loader.load()


def generate_config(output_path: str = "config.yaml") -> str:
    """Generate a default YAML configuration file.

    Returns the absolute path of the generated file.
    """
    return ConfigLoader.generate_default_config(output_path)


def is_yaml_available() -> bool:
    """Return True if PyYAML is installed and importable."""
    return YAML_AVAILABLE
