#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Logging Module v1.0.0 for contractsolve

Provides structured logging with JSON and colored console output for
solver runs. Handlers are attached to the ``solver`` logger, so records
emitted by the numerical modules (``solver.fbp``, ``solver.multiplier``,
...) share the same output.
"""

import copy
import json
import logging
import sys
import traceback
from datetime import datetime, timezone
from typing import Any, Dict, Optional


__version__ = "1.0.0"

LOGGER_NAME = "solver"


class JsonFormatter(logging.Formatter):
    """Formatter that outputs log records as JSON strings."""

    def format(self, record: logging.LogRecord) -> str:
        log_entry: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        if getattr(record, "data", None) is not None:
            log_entry["data"] = record.data  # type: ignore[attr-defined]

        if record.exc_info and record.exc_info[0] is not None:
            log_entry["exception"] = {
                "type": record.exc_info[0].__name__,
                "message": str(record.exc_info[1]),
                "traceback": traceback.format_exception(*record.exc_info),
            }

        return json.dumps(log_entry, ensure_ascii=False, default=str)


class ConsoleFormatter(logging.Formatter):
    """Formatter that outputs colored log messages to the console."""

    COLORS: Dict[str, str] = {
        "DEBUG": "\033[36m",      # cyan
        "INFO": "\033[32m",       # green
        "WARNING": "\033[33m",    # yellow
        "ERROR": "\033[31m",      # red
        "CRITICAL": "\033[35m",   # magenta
    }
    RESET = "\033[0m"

    def __init__(self, use_color: Optional[bool] = None) -> None:
        super().__init__()
        self.use_color = sys.stderr.isatty() if use_color is None else use_color

    def format(self, record: logging.LogRecord) -> str:
        if self.use_color:
            color = self.COLORS.get(record.levelname, self.RESET)
            levelname = f"{color}{record.levelname:<8}{self.RESET}"
        else:
            levelname = f"{record.levelname:<8}"

        timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
        formatted = f"{timestamp} {levelname} {record.name} - {record.getMessage()}"

        if getattr(record, "data", None) is not None:
            formatted += f" | {record.data}"  # type: ignore[attr-defined]

        if record.exc_info and record.exc_info[0] is not None:
            formatted += "\n" + "".join(traceback.format_exception(*record.exc_info))

        return formatted


class SolverLogger:
    """Structured logger for solver runs.

    Event methods attach a ``data`` dict to each record and bump the
    counters returned by :meth:`get_stats`.
    """

    def __init__(
        self,
        name: str = LOGGER_NAME,
        level: str = "INFO",
        format_type: str = "console",
        log_file: Optional[str] = None,
    ) -> None:
        """
        Args:
            name: Logger name.
            level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL).
            format_type: 'console' for colored output or 'json'.
            log_file: Optional path to a log file.
        """
        self.logger = logging.getLogger(name)
        self.logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
        self.format_type = format_type

        self._stats: Dict[str, int] = {
            "runs": 0,
            "solves": 0,
            "policy_sweeps": 0,
            "calibration_steps": 0,
            "oracle_checks": 0,
            "ic_violations": 0,
        }

        if not self.logger.handlers:
            self._setup_handlers(format_type, log_file)

    def _setup_handlers(self, format_type: str, log_file: Optional[str]) -> None:
        formatter: logging.Formatter
        if format_type == "json":
            formatter = JsonFormatter()
        else:
            formatter = ConsoleFormatter()

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

        if log_file:
            file_formatter: logging.Formatter
            if format_type == "json":
                file_formatter = JsonFormatter()
            else:
                file_formatter = logging.Formatter(
                    "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
                )
            file_handler = logging.FileHandler(log_file, encoding="utf-8")
            file_handler.setFormatter(file_formatter)
            self.logger.addHandler(file_handler)

    def close(self) -> None:
        """Detach and close every handler of the underlying logger."""
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
            handler.close()

    def _log_with_data(
        self,
        level: int,
        message: str,
        data: Optional[Dict[str, Any]] = None,
        exc_info: bool = False,
    ) -> None:
        self.logger.log(level, message, extra={"data": data}, exc_info=exc_info)

    # ---- Standard log level methods ----

    def debug(self, message: str, data: Optional[Dict[str, Any]] = None) -> None:
        self._log_with_data(logging.DEBUG, message, data)

    def info(self, message: str, data: Optional[Dict[str, Any]] = None) -> None:
        self._log_with_data(logging.INFO, message, data)

    def warning(self, message: str, data: Optional[Dict[str, Any]] = None) -> None:
        self._log_with_data(logging.WARNING, message, data)

    def error(
        self,
        message: str,
        data: Optional[Dict[str, Any]] = None,
        exc_info: bool = False,
    ) -> None:
        self._log_with_data(logging.ERROR, message, data, exc_info=exc_info)

    # ---- Solver events ----

    def start_run(self, mode: str, options: Optional[Dict[str, Any]] = None) -> None:
        """Log the start of a run in ``mode``."""
        self._stats["runs"] += 1
        data: Dict[str, Any] = {"mode": mode}
        if options:
            data["options"] = options
        self.info(f"Starting run: {mode}", data)

    def end_run(self, mode: str, exit_code: int = 0, elapsed: float = 0.0) -> None:
        data = {
            "mode": mode,
            "exit_code": exit_code,
            "elapsed_seconds": round(elapsed, 3),
        }
        self.info(f"Finished run: {mode}", data)

    def classification(self, kind: str, threshold: float, varpi: float) -> None:
        """Log the feasibility verdict."""
        data = {"kind": kind, "threshold": threshold, "varpi": varpi}
        self.info(f"Feasibility: {kind}", data)

    def policy_sweep(self, lam: float, sweeps: int, newton_steps: int,
                     branch_counts: Optional[Dict[str, int]] = None) -> None:
        """Log one completed free-boundary solve."""
        self._stats["solves"] += 1
        self._stats["policy_sweeps"] += sweeps
        data: Dict[str, Any] = {"lam": lam, "sweeps": sweeps, "newton_steps": newton_steps}
        if branch_counts:
            data["branches"] = branch_counts
        self.debug(f"Solved at lam={lam:.10g}", data)

    def calibration_step(self, lam: float, budget: float) -> None:
        self._stats["calibration_steps"] += 1
        self.debug("Calibration step", {"lam": lam, "budget": budget})

    def oracle_report(self, sup_norm: float, mean_abs: float, nodes: int) -> None:
        """Log an oracle comparison."""
        self._stats["oracle_checks"] += 1
        data = {"sup_norm": sup_norm, "mean_abs": mean_abs, "nodes": nodes}
        self.info(f"Oracle check: sup |diff| = {sup_norm:.3e}", data)

    def ic_violation(self, count: int, worst_node: Optional[int], magnitude: float) -> None:
        """Log incentive-compatibility violations found in a contract."""
        self._stats["ic_violations"] += count
        data = {"count": count, "worst_node": worst_node, "worst_magnitude": magnitude}
        self.warning(f"Incentive compatibility violated at {count} nodes", data)

    def config_loaded(self, config: Dict[str, Any]) -> None:
        self.info("Configuration loaded", {"config": config})

    def get_stats(self) -> Dict[str, int]:
        """Return a copy of the internal statistics counters."""
        return copy.copy(self._stats)


# ---- Module-level singleton and factory functions ----

_logger: Optional[SolverLogger] = None


def get_logger(
    level: str = "INFO",
    format_type: str = "console",
    log_file: Optional[str] = None,
    reinit: bool = False,
) -> SolverLogger:
    """Get or create the global SolverLogger instance.

    With ``reinit`` the handlers of the previous instance are closed and
    replaced.
    """
    global _logger
    if _logger is None or reinit:
        if _logger is not None:
            _logger.close()
        _logger = SolverLogger(
            name=LOGGER_NAME,
            level=level,
            format_type=format_type,
            log_file=log_file,
        )
    return _logger


def setup_logging(
    level: str = "INFO",
    format_type: str = "console",
    log_file: Optional[str] = None,
) -> SolverLogger:
    """Configure logging for a run and return the SolverLogger."""
    return get_logger(level=level, format_type=format_type, log_file=log_file, reinit=True)
