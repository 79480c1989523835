"""CSV and JSON writers shared by the CLI and acceptance runs.

Floats are written with ``repr`` so reruns with identical inputs produce
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import FieldGrid

RUNTIME_KEYS = ("runtime_ms", "runtime_s")


def _plain(obj):
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
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        if math.isnan(val) or math.isinf(val):
            return str(val)
        return val
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")
    return path


def strip_runtime(payload):
    """Copy of a JSON payload with every runtime field removed (for determinism checks)."""
    if isinstance(payload, dict):
        return {k: strip_runtime(v) for k, v in payload.items() if k not in RUNTIME_KEYS}
    if isinstance(payload, list):
        return [strip_runtime(v) for v in payload]
    return payload


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_field(path, grid: FieldGrid, extra_meta: dict | None = None) -> Path:
    """FieldGrid as CSV rows (phi1, phi2, tau, value) plus a JSON header file."""
    path = Path(path)
    P1, P2, T = grid.mesh()
    rows = zip(P1.ravel(), P2.ravel(), T.ravel(), np.asarray(grid.values).ravel())
    write_csv(path, ("phi1", "phi2", "tau", "value"), rows)
    header = {"shape": list(grid.values.shape), "time_stamp": grid.time_stamp,
              "phi1": {"start": grid.phi1[0], "n": grid.phi1.size},
              "phi2": {"start": grid.phi2[0], "n": grid.phi2.size},
              "tau": {"start": grid.tau[0], "stop": grid.tau[-1], "n": grid.tau.size},
              "meta": grid.meta}
    if extra_meta:
        header.update(extra_meta)
    write_json(Path(str(path) + ".json"), header)
    return path


def read_field(path) -> FieldGrid:
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    shape = tuple(header["shape"])
    values = data[:, 3].reshape(shape)
    phi1 = data[:, 0].reshape(shape)[:, 0, 0]
    phi2 = data[:, 1].reshape(shape)[0, :, 0]
    tau = data[:, 2].reshape(shape)[0, 0, :]
    return FieldGrid(values, phi1, phi2, tau, header["time_stamp"], header.get("meta", {}))
