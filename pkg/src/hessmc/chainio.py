"""CSV/JSON persistence for chains, fields and diagnostics."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .samplers import Chain


def _num(v):
    return repr(float(v))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_chain(path, chain: Chain):
    """Chain CSV plus a ``.json`` metadata sidecar next to it."""
    path = Path(path)
    dim = chain.samples.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "accepted", "logJ"] + [f"psi_{i}" for i in range(dim)])
        for step, x, J in zip(chain.steps, chain.samples, chain.logJ):
            w.writerow([int(step), int(chain.accepted[step - 1]), _num(J)] + [_num(v) for v in x])
    write_json(path.with_suffix(".json"), chain.metadata())
    return path


def read_chain(path):
    """Return ``(samples, logJ, accepted_flags, metadata)``; metadata is ``{}`` without a sidecar."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read chain {path}: {exc}") from exc
    if not rows or rows[0][:3] != ["step", "accepted", "logJ"]:
        raise ConfigError(f"{path}:1: not a chain file (expected header step,accepted,logJ,psi_...)")
    width = len(rows[0])
    if width < 4:
        raise ConfigError(f"{path}:1: chain file has no parameter columns")
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ConfigError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        try:
            body.append([float(v) for v in row])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    if not body:
        raise ConfigError(f"{path}: chain file has no samples")
    data = np.array(body)
    meta_path = path.with_suffix(".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return data[:, 3:], data[:, 2], data[:, 1].astype(bool), meta


def write_field(path, coords, values, header=("node", "x", "y", "value")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, ((x, y), v) in enumerate(zip(coords, values)):
            w.writerow([i, _num(x), _num(y), _num(v)])


def read_field(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return np.array([float(r["value"]) for r in rows])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read field {path}: {exc}") from exc


def write_intervals(path, nodes, coords, mean, lo, hi):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y", "mean", "lo", "hi"])
        for j in nodes:
            w.writerow([int(j), _num(coords[j, 0]), _num(coords[j, 1]), _num(mean[j]), _num(lo[j]), _num(hi[j])])


def write_columns(path, columns: dict):
    names = list(columns)
    n = len(next(iter(columns.values())))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(n):
            w.writerow([columns[k][i] if isinstance(columns[k][i], (int, np.integer)) else _num(columns[k][i]) for k in names])
