"""Parameter files and CSV/JSON writers used by the command line."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .model import ModelParams

__all__ = [
    "SCHEMA_VERSION",
    "DIGITS",
    "BRANCH_HEADER",
    "load_params",
    "fmt",
    "rounded",
    "dumps",
    "branch_rows_csv",
]

SCHEMA_VERSION = "1"
DIGITS = 12
BRANCH_HEADER = (
    "param,R0,dfe_class,S1,I1,U1,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3,e1_class,d0_sign"
)


def load_params(path: str | Path) -> ModelParams:
    """Read a single JSON object with the model parameters.

    ``OSError`` and ``json.JSONDecodeError`` propagate for unreadable files;
    bad keys or values raise ``ParameterError``.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise json.JSONDecodeError("parameter file must hold a JSON object", "", 0)
    return ModelParams.from_dict(data)


def fmt(x) -> str:
    """Number formatted to 12 significant digits; empty for ``None``."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if x == 0:
        return "0"
    return format(x, f".{DIGITS}g")


def rounded(obj):
    """Copy of a JSON-like object with every float cut to 12 significant digits."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(format(x, f".{DIGITS}g")) if x != 0 else 0.0
    if isinstance(obj, complex):
        return [rounded(obj.real), rounded(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [rounded(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(doc: dict) -> str:
    """Deterministic JSON text for a report; adds ``schema_version``."""
    doc = {"schema_version": SCHEMA_VERSION, **{k: v for k, v in doc.items() if k != "schema_version"}}
    return json.dumps(rounded(doc), indent=2, sort_keys=False) + "\n"


def write_csv_row(fh: IO[str], values: Sequence) -> None:
    fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in values) + "\n")


def branch_rows_csv(rows: Iterable, fh: IO[str]) -> None:
    fh.write(BRANCH_HEADER + "\n")
    for r in rows:
        eq = r.endemic
        if eq is not None:
            ev = list(eq.eigenvalues)
            e_cells = [eq.coords.S, eq.coords.I, eq.coords.U]
            for z in ev:
                e_cells += [z.real, z.imag]
            e_cells.append(eq.stability)
        else:
            e_cells = [None] * 10
        write_csv_row(fh, [r.value, r.R0, r.dfe_class or "", *e_cells, r.d0_sign])
