#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
contractsolve v1.0.0
Оптимальні страхові контракти для RDU-страхувальника.

Тонка обгортка над пакетом solver/ (model, transform, fbp, multiplier,
oracle, recovery, io, cli); запуск з кореня репо — python . solve
або python contractsolve.py solve --config config.yaml

License: BSD 3-Clause "New" or "Revised" License
"""

import sys

from solver.cli import main

if __name__ == "__main__":
    sys.exit(main())
