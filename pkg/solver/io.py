#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Result emission: CSV tables with 17 significant digits and a plain-text
summary. Nothing time-dependent is written, so identical runs produce
byte-identical artifacts.
"""

import csv
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from solver import constants as _cfg
from solver.errors import IoError
from solver.fbp import FbpSolution
from solver.recovery import Contract
from solver.transform import TransformedProblem

SummaryItems = Sequence[Tuple[str, Any]]


def format_value(value: Any) -> str:
    """Текстове представлення значення для CSV та summary."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), _cfg.FLOAT_FORMAT)
    if value is None:
        return "none"
    return str(value)


def _ensure_dir(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out_dir}: {exc}", str(out_dir)) from exc


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Записує CSV таблицю; IoError якщо шлях недоступний для запису."""
    path = Path(path)
    _ensure_dir(path.parent)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}", str(path)) from exc
    return path


def write_summary(path: Path, items: SummaryItems) -> Path:
    path = Path(path)
    _ensure_dir(path.parent)
    width = max((len(key) for key, _ in items), default=0)
    lines = [f"{key:<{width}} : {format_value(value)}" for key, value in items]
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}", str(path)) from exc
    return path


def quantile_rows(sol: FbpSolution, tp: TransformedProblem) -> List[Tuple[Any, ...]]:
    tokens = sol.branch_tokens
    return [
        (tp.p[i], sol.delta[i], sol.delta_prime[i], sol.quantile[i], tokens[i],
         tp.hbar[i], tp.phi_tilde[i])
        for i in range(tp.grid.n)
    ]


def contract_rows(contract: Contract) -> List[Tuple[Any, ...]]:
    return list(zip(contract.x, contract.retention, contract.indemnity))


def emit_results(
    out_dir: Path,
    sol: FbpSolution,
    tp: TransformedProblem,
    contract: Optional[Contract],
    summary: SummaryItems,
) -> Dict[str, Path]:
    """Write quantile.csv, contract.csv and summary.txt into ``out_dir``."""
    out = Path(out_dir)
    paths = {
        "quantile": write_table(out / _cfg.QUANTILE_FILE, _cfg.QUANTILE_HEADER,
                                quantile_rows(sol, tp)),
    }
    if contract is not None:
        paths["contract"] = write_table(out / _cfg.CONTRACT_FILE, _cfg.CONTRACT_HEADER,
                                        contract_rows(contract))
    paths["summary"] = write_summary(out / _cfg.SUMMARY_FILE, summary)
    return paths
