"""Deterministic CSV / JSON / JSONL writers stamped with the config hash.

CSV files start with ``# config_hash=<hash>`` followed by a header row.
JSON documents carry ``config_hash`` as their first key; JSONL streams
start with a ``{"config_hash": ...}`` record.  Floats are written with
``repr`` so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

# column conventions
PROFILE_COLUMNS = ("time", "x_left", "x_right", "value")
SERIES_COLUMNS = ("time", "l1", "linf", "tv", "mass", "front_count", "min_plateau_width")
PLATEAU_COLUMNS = ("time", "kind", "x_left", "x_right", "value")
FIELD_COLUMNS = ("eps", "delta", "n_cells", "time", "x_center", "value")
LADDER_COLUMNS = ("nu", "distance", "ratio", "order", "apriori", "estimate", "max_fronts")
VISCOUS_COLUMNS = ("eps", "delta", "n_cells", "time", "distance")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _plain(obj):
    """Numpy scalars and arrays to JSON-native values; non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


class OutputDir:
    """Writes files under ``root``; every file is stamped with ``config_hash``."""

    def __init__(self, root, config_hash: str):
        self.root = Path(root)
        self.config_hash = config_hash
        self.written: list[str] = []

    def _path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        self.written.append(name)
        return self.root / name

    def csv(self, name: str, columns, rows):
        with open(self._path(name), "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# config_hash={self.config_hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_cell(v) for v in row])

    def json(self, name: str, obj: dict):
        doc = {"config_hash": self.config_hash}
        doc.update(_plain(obj))
        with open(self._path(name), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    def jsonl(self, name: str, records):
        with open(self._path(name), "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"config_hash": self.config_hash}) + "\n")
            for rec in records:
                fh.write(json.dumps(_plain(rec)) + "\n")


def read_csv(path):
    """``(config_hash, columns, rows)`` of a file written by :class:`OutputDir`."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("# config_hash="):
            raise ValueError(f"{os.fspath(path)} lacks a config hash header")
        rows = list(csv.reader(fh))
    return first.split("=", 1)[1], rows[0], rows[1:]


def profile_rows(t: float, p):
    lo, hi, v = p.cells()
    for a, b, val in zip(lo, hi, v):
        yield (t, a, b, val)
