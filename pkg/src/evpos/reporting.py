"""Byte-stable CSV and JSON writers for run artifacts."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

TRAJECTORY_HEADER = ("t", "margin", "min_masked_value", "tail_certified")
RESOLVENT_HEADER = ("lambda", "side", "margin_raw", "margin_scaled")
SPECTRUM_HEADER = ("re", "im", "alg_mult", "is_peripheral")

__all__ = ["RESOLVENT_HEADER", "SPECTRUM_HEADER", "TRAJECTORY_HEADER", "cell", "json_safe", "write_csv", "write_json"]


def cell(v) -> str:
    """Shortest round-trip text for a scalar; booleans as ``true``/``false``."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([cell(v) for v in row])
    return path


def json_safe(v):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf`` and ``nan``."""
    if isinstance(v, dict):
        return {str(k): json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [json_safe(x) for x in v]
    if isinstance(v, np.ndarray):
        return json_safe(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, complex):
        return [json_safe(v.real), json_safe(v.imag)]
    return v


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(json_safe(payload), indent=2, sort_keys=True) + "\n")
    return path
