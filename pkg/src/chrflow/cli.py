"""Command-line entry point: ``chrflow {run, ladder, validate-material, certify, oracle}``.

Exit codes: 0 all certificates pass, 1 a certificate fails, 2 bad input,
3 the simulation could not be completed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


def _failure(command: str, **info) -> None:
    """Machine-readable failure record on stderr."""
    print(json.dumps({"status": "FAIL", "command": command, **info}, default=str), file=sys.stderr)


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "tol_diss", None) is not None:
        out["tol.diss"] = args.tol_diss
    if getattr(args, "out", None) is not None:
        out["output.dir"] = str(args.out)
    return out


def _load(args):
    from .config import parse_config
    return parse_config(args.config, overrides=_overrides(args))


def cmd_run(args) -> int:
    from .workflow import run
    cfg = _load(args)
    if cfg.is_ladder:
        _failure("run", reason="config defines an epsilon ladder; use the ladder command")
        return EXIT_INPUT
    out = Path(cfg["output.dir"])
    outcome = run(cfg, out_dir=out)
    print(outcome.certificate.summary())
    if not outcome.result.completed:
        _failure("run", reason=outcome.result.failure, steps=outcome.result.ledger.steps)
        return EXIT_SOLVER
    if not outcome.certificate.passed:
        _failure("run", failing_step=outcome.certificate.failing_step, reason=outcome.certificate.reason)
        return EXIT_FAIL
    return EXIT_OK


def cmd_ladder(args) -> int:
    from .sharp_interface import eps_continuation
    cfg = _load(args)
    report = eps_continuation(cfg, out_dir=cfg["output.dir"], threads=args.threads)
    for r in report.rows:
        print(f"epsilon={r.epsilon:g} mesh={r.mesh} max_radius_error={r.max_radius_error:.4e} "
              f"final_relative_error={r.final_relative_error:.4e} energy_ratio={r.energy_ratio:.6f} "
              f"certified={r.certified}")
    for note in report.notes:
        print(f"note: {note}")
    print(report.summary())
    if not report.passed:
        _failure("ladder", error_trend=report.error_trend, errors=report.errors,
                 uncertified=[r.epsilon for r in report.rows if not r.certified])
        return EXIT_FAIL
    return EXIT_OK


def cmd_validate(args) -> int:
    from .duality import DualityContext, coercivity_probe
    from .materials import SOBOLEV_EXPONENT, make_law, validate
    from .mesh import Mesh, assemble_forms

    if args.config:
        from .workflow import build_law
        cfg = _load(args)
        eps = cfg["material.epsilon"]
        cfg = cfg.replace(**{"material.epsilon": eps[-1] if isinstance(eps, list) else eps})
        law = build_law(cfg)
        seed = cfg["seed"] if args.seed is None else args.seed
    else:
        variant = {"quartic_affine": "affine"}.get(args.variant, args.variant)
        try:
            law = make_law(variant, args.epsilon)
        except ValueError as exc:
            _failure("validate-material", reason=str(exc))
            return EXIT_FAIL
        seed = args.seed or 0
    report = validate(law)
    for check in report.checks:
        status = "ok" if check.passed else "FAIL"
        print(f"{check.name}: {status} constant={check.constant:.6g} ({check.description})")
    print(f"constant C = {report.constant:.6g}, Sobolev exponent = {SOBOLEV_EXPONENT:g}")
    mesh = Mesh.interval(1.0, 65)
    ctx = DualityContext.from_field(assemble_forms(mesh), law, np.full(mesh.num_nodes, 0.5))
    probe = coercivity_probe(ctx, samples=args.samples, rng=seed)
    print(f"coercivity constant C_alpha = {probe.constant:.6g} over {args.samples} loads")
    ok = report.passed and probe.satisfied
    print(f"VALIDATE: {'PASS' if ok else 'FAIL'}")
    if not ok:
        _failure("validate-material", first_failure=report.first_failure)
        return EXIT_FAIL
    return EXIT_OK


def cmd_certify(args) -> int:
    from .diagnostics import certify
    from .io import read_ledger
    path = Path(args.ledger) if args.ledger else Path(args.out) / "ledger.csv"
    try:
        rows = read_ledger(path)
    except (OSError, ValueError) as exc:
        _failure("certify", reason=str(exc))
        return EXIT_INPUT
    tol = 1e-9 if args.tol_diss is None else args.tol_diss
    cert = certify(rows, tol_diss=tol, require_monotone=args.monotone)
    print(cert.summary())
    if not cert.passed:
        _failure("certify", failing_step=cert.failing_step, reason=cert.reason, ledger=str(path))
        return EXIT_FAIL
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .sharp_interface import _oracle_for
    from .workflow import build_law
    cfg = _load(args)
    eps = cfg["material.epsilon"]
    cfg = cfg.replace(**{"material.epsilon": eps[-1] if isinstance(eps, list) else eps})
    law = build_law(cfg)
    n = max(1, int(round(cfg["time.T"] / cfg["time.tau"] / cfg["time.snapshot_every"])))
    times = np.linspace(0.0, cfg["time.T"], n + 1) if cfg["time.T"] > 0 else [0.0]
    traj, R_out = _oracle_for(cfg, law, times)
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "rho"])
        for t, r in zip(traj.t, traj.rho):
            w.writerow([repr(float(t)), repr(float(r))])
    print(f"ORACLE: geometry={cfg['ladder.geometry']} R_out={R_out:.6g} samples={len(traj.t)} "
          f"rho_final={traj.rho[-1]:.8g} event={traj.event}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chrflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="key = value configuration file")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="seed for randomised probes")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for ladders")
        sp.add_argument("--tol-diss", type=float, dest="tol_diss", help="per-step dissipation tolerance")

    common(sub.add_parser("run", help="single simulation with ledger and snapshots"))
    common(sub.add_parser("ladder", help="epsilon continuation against the sharp-interface oracle"))
    v = sub.add_parser("validate-material", help="check the material-law assumptions")
    common(v, config_required=False)
    v.add_argument("--variant", default="affine", help="law variant when no config is given")
    v.add_argument("--epsilon", type=float, default=0.05)
    v.add_argument("--samples", type=int, default=200)
    c = sub.add_parser("certify", help="re-check a stored ledger")
    common(c, config_required=False)
    c.add_argument("--ledger", help="ledger CSV (default: <out>/ledger.csv)")
    c.add_argument("--monotone", action="store_true", help="also require non-increasing energy")
    common(sub.add_parser("oracle", help="radial sharp-interface trajectory"))
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    from .config import ConfigError
    handlers = {"run": cmd_run, "ladder": cmd_ladder, "validate-material": cmd_validate,
                "certify": cmd_certify, "oracle": cmd_oracle}
    if args.command == "certify" and not (args.ledger or args.out):
        print("certify needs --ledger or --out", file=sys.stderr)
        return EXIT_INPUT
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        _failure(args.command, reason="invalid configuration", errors=exc.errors)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        _failure(args.command, reason=str(exc))
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
