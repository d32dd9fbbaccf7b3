"""CSV and JSON export with fixed 17-significant-digit floats."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows) -> Path:
    """Write a header row and data rows; floats use 17 significant digits."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_value(v) for v in r])
    return p


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    """Header and rows parsed as floats (round trip of :func:`write_csv` for numeric tables)."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [[float(v) for v in row] for row in r]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    return v


def write_json(path, data) -> Path:
    """Deterministic JSON (sorted keys); non-finite floats become the strings ``inf``/``-inf``/``nan``."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return p


# --------------------------------------------------------------------------
# row builders
# --------------------------------------------------------------------------

PATH_HEADER = ("path", "t", "value", "phase")
OVERSHOOT_HEADER = ("path", "level", "passage_time", "overshoot", "phase", "crept")
CURVE_HEADER = ("t", "value", "se")
LAW_HEADER = ("phase", "lo", "hi", "mass")


def path_rows(path, path_id: int = 0):
    """Knots of a MAP path: start, left limit and value at each jump, end."""
    return [(path_id, t, v, ph) for t, v, ph in path.knots()]


def overshoot_rows(batch):
    rows = []
    for p in range(batch.overshoot.shape[0]):
        for k, lev in enumerate(batch.levels):
            rows.append((p, float(lev), float(batch.passage_time[p, k]), float(batch.overshoot[p, k]),
                         int(batch.phase[p, k]), bool(batch.crept[p, k])))
    return rows


def curve_rows(curve):
    return [(p.t, p.value, p.se) for p in curve]
