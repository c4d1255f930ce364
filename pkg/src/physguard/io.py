"""CSV/JSON emission with canonical float formatting and provenance hashes.

Floats are written with ``repr`` (shortest string that round-trips a 64-bit
float), integers and flags as plain integers. Every file starts with the
hash of the config that produced it: CSV and text files as a
``# config_sha256=<hex>`` comment line, JSON as a leading
``"config_sha256"`` key.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError
from .sim import SimTrace

TRACE_HEADER = "k,t,x_true,u_valve,u_pump,y,y_attacked,attack_active,saturated"
DETECTION_HEADER = "k,r,stat_baddata,alarm_baddata,stat_cusum,alarm_cusum"
HASH_PREFIX = "# config_sha256="


def fmt(value: float) -> str:
    return repr(float(value))


def _write_lines(path, config_hash, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{HASH_PREFIX}{config_hash}\n{header}\n")
        for row in rows:
            fh.write(row)
            fh.write("\n")


def write_trace(path, trace: SimTrace, config_hash: str):
    if trace.x_true.shape[1] != 1 or trace.y.shape[1] != 1:
        raise InvalidParameterError("trace CSV holds single-state, single-sensor traces only")
    x, y, ya = trace.x_true[:, 0], trace.y[:, 0], trace.y_attacked[:, 0]
    rows = (
        f"{k},{fmt(trace.t[k])},{fmt(x[k])},{int(trace.u[k, 0])},{int(trace.u[k, 1])},"
        f"{fmt(y[k])},{fmt(ya[k])},{int(trace.attack_active[k])},{int(trace.saturated[k])}"
        for k in range(len(trace))
    )
    _write_lines(path, config_hash, TRACE_HEADER, rows)


def _read_table(path, header):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    config_hash = None
    if lines and lines[0].startswith(HASH_PREFIX):
        config_hash = lines.pop(0)[len(HASH_PREFIX):]
    if not lines or lines[0] != header:
        raise InvalidParameterError(f"{path}: expected header {header!r}")
    body = [ln.split(",") for ln in lines[1:] if ln]
    width = header.count(",") + 1
    for i, row in enumerate(body):
        if len(row) != width:
            raise InvalidParameterError(f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
    return body, config_hash


def read_trace(path):
    """Returns ``(SimTrace, config_hash)``."""
    body, config_hash = _read_table(path, TRACE_HEADER)
    cols = list(zip(*body)) if body else [()] * 9
    if body and [int(k) for k in cols[0]] != list(range(len(body))):
        raise InvalidParameterError(f"{path}: k column must count 0, 1, 2, ...")
    f = lambda c: np.array([float(v) for v in c], dtype=np.float64)
    b = lambda c: np.array([int(v) != 0 for v in c], dtype=np.bool_)
    u = np.column_stack([f(cols[3]), f(cols[4])]) if body else np.zeros((0, 2))
    trace = SimTrace(
        t=f(cols[1]), x_true=f(cols[2]).reshape(-1, 1), u=u,
        y=f(cols[5]).reshape(-1, 1), y_attacked=f(cols[6]).reshape(-1, 1),
        attack_active=b(cols[7]), saturated=b(cols[8]),
        nonfinite=~np.isfinite(f(cols[6])),
    )
    return trace, config_hash


def write_detection(path, result, config_hash: str):
    rows = (
        f"{k},{fmt(result.r[k])},{fmt(result.stat_baddata[k])},{int(result.alarm_baddata[k])},"
        f"{fmt(result.stat_cusum[k])},{int(result.alarm_cusum[k])}"
        for k in range(len(result.r))
    )
    _write_lines(path, config_hash, DETECTION_HEADER, rows)


def read_detection(path):
    body, config_hash = _read_table(path, DETECTION_HEADER)
    cols = list(zip(*body)) if body else [()] * 6
    out = {
        "k": np.array([int(v) for v in cols[0]], dtype=np.int64),
        "r": np.array([float(v) for v in cols[1]]),
        "stat_baddata": np.array([float(v) for v in cols[2]]),
        "alarm_baddata": np.array([int(v) != 0 for v in cols[3]]),
        "stat_cusum": np.array([float(v) for v in cols[4]]),
        "alarm_cusum": np.array([int(v) != 0 for v in cols[5]]),
    }
    return out, config_hash


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def dumps_json(payload: dict, config_hash: str) -> str:
    body = {"config_sha256": config_hash, **_clean(payload)}
    return json.dumps(body, indent=2, allow_nan=False) + "\n"


def write_json(path, payload: dict, config_hash: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(payload, config_hash))


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_text(path, text: str, config_hash: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{HASH_PREFIX}{config_hash}\n{text}")
