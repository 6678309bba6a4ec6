"""Ledger and snapshot files.

Floats are written with ``repr`` so a CSV round trip is bit-exact.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .mesh import Mesh

LEDGER_COLUMNS = ["i", "t", "tau", "I_eps", "A", "A_star", "gap", "mass", "flux", "slack"]
LEDGER_EXTRA = ["A_endpoint", "iterations", "method"]
_INT_COLUMNS = {"i", "iterations"}
_STR_COLUMNS = {"method"}


def ledger_rows(ledger) -> list[dict]:
    """Row 0 holds the initial energy and mass; row ``i`` the ``i``-th step."""
    rows = [{"i": 0, "t": 0.0, "tau": 0.0, "I_eps": ledger.initial_energy, "A": 0.0, "A_star": 0.0,
             "gap": 0.0, "mass": ledger.initial_mass, "flux": 0.0, "slack": 0.0,
             "A_endpoint": 0.0, "iterations": 0, "method": "initial"}]
    for k, rec in enumerate(ledger.records, start=1):
        r = rec.row()
        r["i"] = k
        rows.append({c: r[c] for c in LEDGER_COLUMNS + LEDGER_EXTRA})
    return rows


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_ledger(path: str | Path, ledger) -> Path:
    path = Path(path)
    rows = ledger_rows(ledger) if hasattr(ledger, "records") else list(ledger)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LEDGER_COLUMNS + LEDGER_EXTRA)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in LEDGER_COLUMNS + LEDGER_EXTRA])
    return path


def read_ledger(path: str | Path) -> list[dict]:
    """Rows as dicts of floats (``i``/``iterations`` as ints, ``method`` as str)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(LEDGER_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"ledger {path} lacks columns {sorted(missing)}")
        rows = []
        for line, raw in enumerate(reader, start=2):
            row = {}
            for k, v in raw.items():
                if k in _STR_COLUMNS:
                    row[k] = v
                elif v == "" or v is None:
                    continue
                else:
                    try:
                        row[k] = int(v) if k in _INT_COLUMNS else float(v)
                    except ValueError as exc:
                        raise ValueError(f"{path}:{line}: bad value {v!r} in column {k}") from exc
            rows.append(row)
    return rows


def write_snapshot(directory: str | Path, name: str, mesh: Mesh, t: float, c: np.ndarray,
                   mu: np.ndarray | None = None, meta: dict | None = None) -> Path:
    """``<name>.csv`` with one row per node plus a ``<name>.json`` sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    coord_names = ["x", "y"][: mesh.dimension]
    path = directory / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", *coord_names, "c"] + (["mu"] if mu is not None else []))
        X = mesh.coordinates
        for i in range(mesh.num_nodes):
            extra = [repr(float(mu[i]))] if mu is not None else []
            w.writerow([i, *(repr(float(v)) for v in X[i]), repr(float(c[i])), *extra])
    sidecar = {"mesh": mesh.descriptor(), "t": float(t), **(meta or {})}
    (directory / f"{name}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def read_snapshot(path: str | Path):
    """Return ``(mesh, t, c, mu_or_None, meta)`` for a snapshot CSV and its sidecar."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    mesh = Mesh.from_descriptor(meta["mesh"])
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    if len(data) != mesh.num_nodes:
        raise ValueError(f"{path}: {len(data)} rows for a mesh of {mesh.num_nodes} nodes")
    order = np.argsort(data["index"])
    c = np.asarray(data["c"], dtype=float)[order]
    mu = np.asarray(data["mu"], dtype=float)[order] if "mu" in data.dtype.names else None
    return mesh, float(meta["t"]), c, mu, meta


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float))
    return path
