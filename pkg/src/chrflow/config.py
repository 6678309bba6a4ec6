"""Flat ``key = value`` run configuration with dotted sections.

Example::

    # 1D droplet
    mesh.dimension = 1
    mesh.nodes = 513
    material.epsilon = 0.05
    initial.kind = interval
    initial.a = 0.4
    initial.b = 0.6
    time.tau = 1e-4
    time.T = 0.05

A ``[section]`` header prefixes the keys that follow it.  Values are JSON
scalars or lists; anything that is not valid JSON is taken as a bare string.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .mesh import SIDES

FLOAT, INT, STR = "float", "int", "str"
FLOATS, STRS, FLOAT_OR_LIST, INT_OR_LIST = "list[float]", "list[str]", "float|list", "int|list"


@dataclass(frozen=True)
class Key:
    kind: str
    default: Any = None
    required: bool = False
    choices: tuple = ()
    doc: str = ""


SCHEMA: dict[str, Key] = {
    "mesh.dimension": Key(INT, 1, choices=(1, 2), doc="1 (interval) or 2 (rectangle)"),
    "mesh.extents": Key(FLOATS, None, doc="side lengths; default 1 per axis"),
    "mesh.nodes": Key(INT_OR_LIST, None, doc="nodes per axis (list: one per ladder member)"),
    "mesh.reactive_sides": Key(STRS, list(SIDES), doc="box sides carrying the reaction law"),
    "mesh.max_nodes": Key(INT, 2_000_000, doc="memory budget in total nodes"),
    "material.variant": Key(STR, "affine", choices=("affine", "butler_volmer")),
    "material.epsilon": Key(FLOAT_OR_LIST, required=True, doc="interface width (list: ladder)"),
    "material.k": Key(FLOAT, 0.0),
    "material.beta": Key(FLOAT, 1.0),
    "material.i0": Key(FLOAT, 1.0),
    "material.alpha": Key(FLOAT, 0.5),
    "material.w_max": Key(FLOAT, 4.0),
    "initial.kind": Key(STR, "constant", choices=("constant", "front", "interval", "disk", "file")),
    "initial.value": Key(FLOAT, 0.5),
    "initial.x0": Key(FLOAT, 0.5),
    "initial.a": Key(FLOAT, 0.4),
    "initial.b": Key(FLOAT, 0.6),
    "initial.center": Key(FLOATS, [0.5, 0.5]),
    "initial.radius": Key(FLOAT, 0.25),
    "initial.path": Key(STR, ""),
    "time.tau": Key(FLOAT_OR_LIST, required=True),
    "time.T": Key(FLOAT, required=True),
    "time.snapshot_every": Key(INT, 10),
    "stepper.rule": Key(STR, "interpolant", choices=("interpolant", "endpoint")),
    "tol.diss": Key(FLOAT, 1e-9),
    "tol.mass": Key(FLOAT, 1e-10),
    "tol.gap": Key(FLOAT, 1e-7),
    "tol.newton": Key(FLOAT, 1e-13),
    "tol.max_halvings": Key(INT, 8),
    "output.dir": Key(STR, "out"),
    "seed": Key(INT, 0),
    "ladder.geometry": Key(STR, "planar", choices=("planar", "disk", "quarter_disk")),
    "ladder.rho0": Key(FLOAT, 0.15),
    "ladder.points_per_epsilon": Key(FLOAT, 0.0, doc="if > 0, nodes = extent * this / epsilon + 1"),
    "ladder.R_out": Key(FLOAT, 0.0, doc="oracle outer radius; 0 means the area-equivalent disk"),
    "ladder.geometry_floor": Key(FLOAT, 0.05),
    "ladder.max_relative_error": Key(FLOAT, 0.10),
}


class ConfigError(ValueError):
    """Collects every problem found in a configuration, one per line."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(kind: str, v: Any):
    """Return the coerced value or raise ``TypeError``."""
    if kind == FLOAT:
        if _is_num(v):
            return float(v)
    elif kind == INT:
        if _is_num(v) and float(v).is_integer():
            return int(v)
    elif kind == STR:
        if isinstance(v, str):
            return v
    elif kind == FLOATS:
        if isinstance(v, list) and all(_is_num(x) for x in v):
            return [float(x) for x in v]
    elif kind == STRS:
        if isinstance(v, list) and all(isinstance(x, str) for x in v):
            return list(v)
        if isinstance(v, str):
            return [s.strip() for s in v.split(",") if s.strip()]
    elif kind == FLOAT_OR_LIST:
        if _is_num(v):
            return float(v)
        if isinstance(v, list) and v and all(_is_num(x) for x in v):
            return [float(x) for x in v]
    elif kind == INT_OR_LIST:
        if _is_num(v) and float(v).is_integer():
            return int(v)
        if isinstance(v, list) and v and all(_is_num(x) and float(x).is_integer() for x in v):
            return [int(x) for x in v]
    raise TypeError(f"expected {kind}, got {v!r}")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``values`` maps every schema key to a value."""

    values: dict = field(default_factory=dict)
    base_dir: str = "."

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    @property
    def is_ladder(self) -> bool:
        return isinstance(self["material.epsilon"], list)

    @property
    def extents(self) -> list[float]:
        ext = self["mesh.extents"]
        return ext if ext is not None else [1.0] * self["mesh.dimension"]

    def replace(self, **updates) -> "RunConfig":
        vals = dict(self.values)
        for k, v in updates.items():
            vals[k.replace("__", ".")] = v
        return RunConfig(vals, self.base_dir)

    def children(self) -> list["RunConfig"]:
        """Expand a ladder into one scalar-epsilon config per member.

        ``mesh.nodes`` and ``time.tau`` may be lists of the same length
        (zipped with the epsilons); ``ladder.points_per_epsilon > 0`` derives
        matched meshes instead.
        """
        eps = self["material.epsilon"]
        scalar = not isinstance(eps, list)
        if scalar and not (self["ladder.points_per_epsilon"] > 0 and self["mesh.nodes"] is None):
            return [self]
        out = []
        for i, e in enumerate([eps] if scalar else eps):
            vals = dict(self.values)
            vals["material.epsilon"] = e
            for key in ("mesh.nodes", "time.tau"):
                if isinstance(vals[key], list):
                    vals[key] = vals[key][i]
            ppe = self["ladder.points_per_epsilon"]
            if ppe > 0:
                vals["mesh.nodes"] = int(round(max(self.extents) * ppe / e)) + 1
            out.append(RunConfig(vals, self.base_dir))
        return out

    def serialize(self) -> str:
        lines = []
        for key in SCHEMA:
            v = self.values.get(key)
            if v is None:
                continue
            lines.append(f"{key} = {json.dumps(v) if not isinstance(v, str) else v}")
        return "\n".join(lines) + "\n"


def _validate(vals: dict, lines: dict, base_dir: str) -> list[str]:
    errs = []

    def at(key):
        return f"line {lines[key]}: " if key in lines else ""

    def check(key, ok: bool, msg: str):
        if not ok:
            errs.append(f"{at(key)}{msg}")

    dim = vals["mesh.dimension"]
    eps = vals["material.epsilon"]
    eps_list = eps if isinstance(eps, list) else [eps]
    n_members = len(eps_list)
    check("material.epsilon", all(e > 0 for e in eps_list), "epsilon must be positive")
    for key in ("mesh.nodes", "time.tau"):
        v = vals[key]
        if isinstance(v, list):
            check(key, n_members > 1 and len(v) == n_members,
                  f"{key} list must match the epsilon ladder length")
    taus = vals["time.tau"] if isinstance(vals["time.tau"], list) else [vals["time.tau"]]
    check("time.tau", all(t > 0 for t in taus), "tau must be positive")
    check("time.T", vals["time.T"] >= 0, "T must be nonnegative")
    check("time.snapshot_every", vals["time.snapshot_every"] >= 1, "snapshot_every must be at least 1")
    if vals["mesh.extents"] is not None:
        check("mesh.extents", len(vals["mesh.extents"]) == dim, "extents must have one entry per dimension")
        check("mesh.extents", all(x > 0 for x in vals["mesh.extents"]), "extents must be positive")
    bad = set(vals["mesh.reactive_sides"]) - set(SIDES)
    check("mesh.reactive_sides", not bad, f"unknown sides {sorted(bad)}")
    nodes = vals["mesh.nodes"]
    if nodes is None:
        check("mesh.nodes", vals["ladder.points_per_epsilon"] > 0, "missing required key mesh.nodes")
    else:
        node_list = nodes if isinstance(nodes, list) else [nodes]
        check("mesh.nodes", all(n >= 3 for n in node_list), "mesh.nodes must be at least 3")
        check("mesh.nodes", all(n**dim <= vals["mesh.max_nodes"] for n in node_list),
              "mesh exceeds the node budget mesh.max_nodes")
    if vals["ladder.points_per_epsilon"] > 0:
        ext = max(vals["mesh.extents"] or [1.0])
        big = max(int(round(ext * vals["ladder.points_per_epsilon"] / e)) + 1 for e in eps_list)
        check("ladder.points_per_epsilon", big**dim <= vals["mesh.max_nodes"],
              "ladder mesh exceeds the node budget mesh.max_nodes")
    check("material.beta", vals["material.beta"] > 0, "beta must be positive")
    check("material.k", vals["material.k"] >= 0, "k must be nonnegative")
    check("material.alpha", 0 < vals["material.alpha"] < 1, "alpha must lie in (0, 1)")
    kind = vals["initial.kind"]
    if kind == "disk":
        check("initial.kind", dim == 2, "disk initial data needs mesh.dimension = 2")
    if kind == "file":
        path = Path(vals["initial.path"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        check("initial.path", bool(vals["initial.path"]) and path.is_file(),
              f"initial file {vals['initial.path']!r} does not exist")
    for key in ("tol.diss", "tol.mass", "tol.gap", "tol.newton"):
        check(key, vals[key] > 0, f"{key} must be positive")
    check("tol.max_halvings", vals["tol.max_halvings"] >= 0, "tol.max_halvings must be nonnegative")
    return errs


def parse_text(text: str, base_dir: str = ".", overrides: dict | None = None) -> RunConfig:
    errs: list[str] = []
    raw: dict[str, Any] = {}
    lines: dict[str, int] = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            continue
        if "=" not in s:
            errs.append(f"line {lineno}: expected 'key = value', got {s!r}")
            continue
        key, val = (p.strip() for p in s.split("=", 1))
        if section:
            key = f"{section}.{key}"
        if key not in SCHEMA:
            errs.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in raw:
            errs.append(f"line {lineno}: duplicate key {key!r} (first on line {lines[key]})")
            continue
        raw[key] = _parse_value(val)
        lines[key] = lineno
    for key, val in (overrides or {}).items():
        if key not in SCHEMA:
            errs.append(f"override: unknown key {key!r}")
            continue
        raw[key] = val
        lines.pop(key, None)

    vals: dict[str, Any] = {}
    for key, spec in SCHEMA.items():
        if key not in raw:
            if spec.required:
                errs.append(f"missing required key {key!r}")
            vals[key] = spec.default
            continue
        try:
            v = _coerce(spec.kind, raw[key])
        except TypeError as exc:
            where = f"line {lines[key]}: " if key in lines else ""
            errs.append(f"{where}type mismatch for {key!r}: {exc}")
            vals[key] = spec.default
            continue
        if spec.choices and v not in spec.choices:
            errs.append(f"line {lines.get(key, '?')}: {key} must be one of {list(spec.choices)}")
        vals[key] = v
    if not errs:
        errs = _validate(vals, lines, base_dir)
    if errs:
        raise ConfigError(errs)
    return RunConfig(vals, base_dir)


def parse_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    return parse_text(path.read_text(), base_dir=str(path.parent), overrides=overrides)


def schema_table() -> str:
    """Markdown table of all keys, types and defaults (used in the README)."""
    rows = ["| key | type | default | notes |", "|---|---|---|---|"]
    for key, spec in SCHEMA.items():
        default = "required" if spec.required else json.dumps(spec.default)
        rows.append(f"| `{key}` | {spec.kind} | {default} | {spec.doc} |")
    return "\n".join(rows)
