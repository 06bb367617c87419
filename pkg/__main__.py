#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Entry point for running contractsolve as a module.

Usage:
    python . solve --config config.yaml [--lambda L] [--grid-n N] [--out DIR]
    python . feasibility --config config.yaml
    python . --version

If no mode is given, the mode from the config file is used (default 'solve').
"""

import sys


def main() -> int:
    from solver.cli import main as cli_main
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
