"""Build meshes, laws and initial data from a :class:`RunConfig` and run them."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import initial
from .config import RunConfig
from .diagnostics import Certificate, certify
from .io import read_snapshot, write_json, write_ledger, write_snapshot
from .materials import MaterialLaw, make_law, surface_tension
from .mesh import FormSet, Mesh, assemble_forms
from .stepper import RunResult, Tolerances, simulate

log = logging.getLogger(__name__)


def build_mesh(cfg: RunConfig) -> Mesh:
    ext = cfg.extents
    n = cfg["mesh.nodes"]
    if isinstance(n, list):
        raise ValueError("mesh.nodes is a list; expand the ladder first")
    if cfg["mesh.dimension"] == 1:
        return Mesh.interval(ext[0], n)
    return Mesh.rectangle(ext[0], ext[1], n, n, tuple(cfg["mesh.reactive_sides"]))


def build_law(cfg: RunConfig) -> MaterialLaw:
    eps = cfg["material.epsilon"]
    if isinstance(eps, list):
        raise ValueError("material.epsilon is a list; expand the ladder first")
    if cfg["material.variant"] == "affine":
        return make_law("affine", eps, k=cfg["material.k"], beta=cfg["material.beta"])
    return make_law("butler_volmer", eps, i0=cfg["material.i0"], alpha=cfg["material.alpha"],
                    w_max=cfg["material.w_max"])


def build_initial(cfg: RunConfig, mesh: Mesh, law: MaterialLaw) -> np.ndarray:
    kind = cfg["initial.kind"]
    eps = law.epsilon
    if kind == "constant":
        return initial.constant(mesh, cfg["initial.value"])
    if kind == "front":
        return initial.front(mesh, cfg["initial.x0"], eps)
    if kind == "interval":
        return initial.interval_droplet(mesh, cfg["initial.a"], cfg["initial.b"], eps)
    if kind == "disk":
        return initial.disk_droplet(mesh, tuple(cfg["initial.center"]), cfg["initial.radius"], eps)
    if kind == "file":
        path = Path(cfg["initial.path"])
        if not path.is_absolute():
            path = Path(cfg.base_dir) / path
        snap_mesh, _, c, _, _ = read_snapshot(path)
        if snap_mesh.descriptor() != mesh.descriptor():
            raise ValueError(f"initial file {path} was written on a different mesh")
        return c
    raise ValueError(f"unknown initial kind {kind!r}")


def build_tolerances(cfg: RunConfig) -> Tolerances:
    return Tolerances(newton_tol=cfg["tol.newton"], diss=cfg["tol.diss"], mass=cfg["tol.mass"],
                      gap=cfg["tol.gap"], max_halvings=cfg["tol.max_halvings"])


@dataclass
class RunOutcome:
    config: RunConfig
    mesh: Mesh
    forms: FormSet
    law: MaterialLaw
    result: RunResult
    certificate: Certificate
    seconds: float

    @property
    def passed(self) -> bool:
        return self.result.completed and self.certificate.passed


def run(cfg: RunConfig, out_dir: str | Path | None = None, keep_fields: bool = False) -> RunOutcome:
    """March the configured problem, certify its ledger and optionally persist it.

    With ``out_dir`` the directory receives ``ledger.csv``,
    ``snapshots/snap_<step>.csv`` (+ ``.json``) and ``summary.json``.
    """
    mesh = build_mesh(cfg)
    law = build_law(cfg)
    forms = assemble_forms(mesh)
    c0 = build_initial(cfg, mesh, law)
    tol = build_tolerances(cfg)
    tau = cfg["time.tau"]
    t0 = time.perf_counter()
    result = simulate(forms, law, c0, tau, cfg["time.T"], snapshot_every=cfg["time.snapshot_every"],
                      tol=tol, keep_fields=keep_fields, rule=cfg["stepper.rule"])
    seconds = time.perf_counter() - t0
    cert = certify(result.ledger, tol_diss=tol.diss, tol_mass=tol.mass, tol_gap=tol.gap)
    outcome = RunOutcome(cfg, mesh, forms, law, result, cert, seconds)
    if out_dir is not None:
        persist(outcome, out_dir)
    return outcome


def persist(outcome: RunOutcome, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg, res = outcome.config, outcome.result
    write_ledger(out / "ledger.csv", res.ledger)
    meta = {"epsilon": outcome.law.epsilon, "variant": outcome.law.variant, "params": outcome.law.params}
    for snap in res.snapshots:
        step = int(round(snap.t / cfg["time.tau"]))
        write_snapshot(out / "snapshots", f"snap_{step:06d}", outcome.mesh, snap.t, snap.c, snap.mu, meta)
    (out / "config.txt").write_text(cfg.serialize())
    write_json(out / "summary.json", {
        "completed": res.completed,
        "failure": res.failure,
        "steps": res.ledger.steps,
        "initial_energy": res.ledger.initial_energy,
        "final_energy": res.ledger.final_energy,
        "cumulative_dissipation": res.ledger.cumulative_dissipation,
        "slack": outcome.certificate.slack,
        "certificate": outcome.certificate.summary(),
        "passed": outcome.passed,
        "sigma": surface_tension(outcome.law),
        "seconds": outcome.seconds,
    })
    return out
