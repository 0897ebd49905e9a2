"""CSV and JSON writers with fixed column orders.

Every CSV starts with a header row. Floats are written with ``repr`` so
reruns produce byte-identical files; NaN and missing values are empty cells.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

TRACE_SCALAR_COLUMNS = ("k", "lambda", "alpha", "gamma", "q_norm", "guard_exact", "guard_proxy")
HEXAGON_COLUMNS = ("k", "x", "barrier_err", "euclidean_err", "barrier_gap", "euclidean_gap",
                   "barrier_f", "euclidean_f", "center_f", "center_0", "center_1",
                   "barrier_0", "barrier_1", "euclidean_0", "euclidean_1")
BENCH_COLUMNS = ("n", "seed", "tau", "method", "iterations", "final_normalized_gap",
                 "wall_time_ms", "seconds_per_update", "F_orig", "F_ref", "status")
CERTIFY_COLUMNS = ("check", "condition", "result", "first_violation", "margin")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def write_csv(path: str, header, rows) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path: str):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: str, doc) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def trace_header(dim_x: int, dim_y: int):
    return (TRACE_SCALAR_COLUMNS + tuple(f"x_{i}" for i in range(dim_x))
            + tuple(f"y_{i}" for i in range(dim_y)) + tuple(f"z_{i}" for i in range(dim_y)))


def trace_rows(trace):
    for r in trace.records:
        yield ((r.k, r.lam, r.alpha, r.gamma, r.q_norm, r.guard_exact, r.guard_proxy)
               + tuple(np.atleast_1d(r.x)) + tuple(r.y) + tuple(r.z))


def write_trace(out_dir: str, trace) -> dict:
    """``trace.json`` and ``trace.csv`` (one row per record)."""
    r0 = trace.records[0]
    paths = {
        "trace_json": write_json(os.path.join(out_dir, "trace.json"), trace.to_dict()),
        "trace_csv": write_csv(os.path.join(out_dir, "trace.csv"),
                               trace_header(np.atleast_1d(r0.x).size, r0.y.size), trace_rows(trace)),
    }
    return paths


def load_trace(path: str):
    from .bmfo import RunTrace
    with open(path) as fh:
        return RunTrace.from_dict(json.load(fh))
