#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
contractsolve Modules Package v1.0.0

Допоміжні модулі: конфігурація та структуроване логування.
"""

from .config import RunConfig, ConfigLoader, load_config, generate_config
from .solver_logger import setup_logging, get_logger, SolverLogger

__all__ = [
    # config
    "RunConfig",
    "ConfigLoader",
    "load_config",
    "generate_config",
    # solver_logger
    "setup_logging",
    "get_logger",
    "SolverLogger",
]
