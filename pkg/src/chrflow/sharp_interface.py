"""Radially symmetric Mullins-Sekerka reaction oracle and the epsilon ladder.

The sharp-interface limit of the CHR model is quasi-static: the chemical
potential is harmonic off the interface, equals ``sigma * H`` on it, and
satisfies the reaction law ``d_n mu = R(0, mu)`` on the outer boundary.  For
a droplet of the ``c = 1`` phase the geometry reduces to one unknown, the
radius ``rho``, and mass balance

    d/dt |droplet| = int_{outer boundary} R(0, mu)

closes the ODE.  Two geometries are provided: a disk of radius ``rho`` in an
annulus of outer radius ``R_out`` (2D), and a centred slab ``|x - L/2| < rho``
in an interval of length ``L`` (1D, flat interfaces so ``H = 0``).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .materials import MaterialLaw, surface_tension

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MSRRadialState:
    """Quasi-static potential ``mu(r) = A + B ln r`` on ``(rho, R_out)``.

    Inside the droplet ``mu`` is the constant ``mu_inner = sigma / rho``.
    """

    rho: float
    R_out: float
    sigma: float
    beta: float
    k: float
    mu_inner: float
    A: float
    B: float

    def mu(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.rho, self.mu_inner, self.A + self.B * np.log(np.maximum(r, self.rho)))

    @property
    def mu_outer(self) -> float:
        return self.A + self.B * math.log(self.R_out)

    @property
    def outer_flux(self) -> float:
        """``int_{|x| = R_out} R(0, mu)``, the rate of change of the droplet area."""
        return 2.0 * math.pi * self.B

    @property
    def velocity(self) -> float:
        return self.B / self.rho


def _affine_params(law: MaterialLaw | None, beta: float | None, k: float | None):
    if law is not None:
        if law.variant == "affine":
            return law.beta, law.k
        return None, None
    if beta is None or k is None:
        raise ValueError("give either a material law or both beta and k")
    if not beta > 0 or not k >= 0:
        raise ValueError("need beta > 0 and k >= 0")
    return float(beta), float(k)


def _solve_robin(g_of_B: Callable[[float], float], scale: float) -> float:
    """Root of the strictly increasing ``g_of_B`` by bracket expansion and Brent's method."""
    lo, hi = -scale, scale
    for _ in range(200):
        if g_of_B(lo) <= 0 <= g_of_B(hi):
            break
        lo, hi = 2 * lo, 2 * hi
    else:
        raise ValueError("could not bracket the Robin closure")
    return brentq(g_of_B, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def radial_state(rho: float, R_out: float, sigma: float, law: MaterialLaw | None = None,
                 beta: float | None = None, k: float | None = None) -> MSRRadialState:
    """Potential of a disk droplet of radius ``rho`` in the annulus ``(rho, R_out)``.

    Affine laws ``R(0, w) = k - beta w`` have the closed form

        B = (k - beta sigma / rho) / (1 / R_out + beta ln(R_out / rho)),

    other laws solve ``B / R_out = R(0, sigma / rho + B ln(R_out / rho))``
    (monotone in ``B`` because ``R`` decreases in ``w``).
    """
    if not 0 < rho < R_out:
        raise ValueError(f"rho={rho} outside (0, R_out={R_out})")
    b, kk = _affine_params(law, beta, k)
    L = math.log(R_out / rho)
    mu_in = sigma / rho
    if b is not None:
        B = (kk - b * mu_in) / (1.0 / R_out + b * L)
    else:
        B = _solve_robin(lambda B: B / R_out - float(law.R(0.0, mu_in + B * L)),
                         scale=1.0 + abs(float(law.R(0.0, mu_in))) * R_out)
        b = float(-law.dR_dw(0.0, mu_in))
        kk = float(law.R(0.0, 0.0))
    A = mu_in - B * math.log(rho)
    return MSRRadialState(rho, R_out, sigma, b, kk, mu_in, A, B)


def msr_radial_rhs(state: MSRRadialState) -> float:
    """``d rho / dt`` from ``2 pi rho rho' = 2 pi R_out R(0, mu(R_out)) = 2 pi B``."""
    return state.velocity


def planar_rhs(rho: float, length: float, law: MaterialLaw | None = None,
               beta: float | None = None, k: float | None = None) -> float:
    """Half-width velocity of the slab ``|x - length/2| < rho`` in ``(0, length)``.

    With flat interfaces ``mu = 0`` there, ``mu`` is linear outside, and the
    wall flux ``B = R(0, B d)`` with ``d = length/2 - rho`` feeds each side.
    """
    d = 0.5 * length - rho
    if not 0 < rho < 0.5 * length:
        raise ValueError(f"rho={rho} outside (0, {0.5 * length})")
    b, kk = _affine_params(law, beta, k)
    if b is not None:
        return kk / (1.0 + b * d)
    return _solve_robin(lambda B: B - float(law.R(0.0, B * d)),
                        scale=1.0 + abs(float(law.R(0.0, 0.0))))


@dataclass
class Trajectory:
    t: np.ndarray
    rho: np.ndarray
    event: str | None = None  # "extinction" or "merger" when rho leaves the admissible band
    steps: int = 0
    rejected: int = 0


def _rk4(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h * k1 / 2)
    k3 = f(t + h / 2, y + h * k2 / 2)
    k4 = f(t + h, y + h * k3)
    return y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6


def integrate_radius(rhs: Callable[[float], float], rho0: float, T: float, upper: float,
                     dt: float = 1e-3, h_min: float = 1e-3, rtol: float = 1e-8,
                     sample_times: Sequence[float] | None = None) -> Trajectory:
    """Classical RK4 with step-doubling error control.

    A step is accepted when one full step and two half steps agree to
    ``rtol * |rho|``; the two-half-step value is kept.  Integration stops,
    flagging the event, once ``rho`` leaves ``(h_min, upper - h_min)``.
    The returned trajectory holds the ``sample_times`` (default: the
    accepted step times).
    """
    if not 0 < rho0 < upper:
        raise ValueError("rho0 out of range")
    if T < 0 or not dt > 0:
        raise ValueError("need T >= 0 and dt > 0")
    targets = None if sample_times is None else np.asarray(sorted(sample_times), dtype=float)
    if targets is not None and (targets[0] < 0 or targets[-1] > T * (1 + 1e-12)):
        raise ValueError("sample times must lie in [0, T]")

    def f(_t, y):
        return rhs(y)

    def admissible(y):
        return h_min < y < upper - h_min

    t, y, h = 0.0, float(rho0), float(dt)
    ts, ys = [0.0], [y]
    stops = list(targets[targets > 0]) if targets is not None else []
    if T > 0 and (not stops or stops[-1] < T):
        stops.append(T)
    steps = rejected = 0
    event = None
    for stop in stops:
        while t < stop * (1 - 1e-15) and event is None:
            hh = min(h, stop - t)
            try:
                full = _rk4(f, t, y, hh)
                half = _rk4(f, t + hh / 2, _rk4(f, t, y, hh / 2), hh / 2)
            except ValueError:  # stage left the admissible range
                full, half = np.nan, np.nan
            err = abs(half - full) / 15.0
            if not np.isfinite(half) or err > rtol * max(abs(half), 1e-300):
                if hh < 1e-14 * max(1.0, T):
                    event = "extinction" if y < 0.5 * upper else "merger"
                    break
                h = hh / 2
                rejected += 1
                continue
            t, y = t + hh, float(half)
            steps += 1
            if targets is None:
                ts.append(t)
                ys.append(y)
            if not admissible(y):
                event = "extinction" if y <= h_min else "merger"
                break
            if err < rtol / 64:
                h = min(2 * h, 16 * dt)
        if event is not None:
            break
        if targets is not None and stop in set(targets.tolist()):
            ts.append(t)
            ys.append(y)
    if targets is not None and event is not None and ts[-1] < t:
        ts.append(t)
        ys.append(y)
    return Trajectory(np.array(ts), np.array(ys), event, steps, rejected)


def msr_radial_evolve(rho0: float, T: float, dt: float = 1e-3, R_out: float = 1.0 / math.sqrt(math.pi),
                      sigma: float | None = None, law: MaterialLaw | None = None,
                      beta: float | None = None, k: float | None = None, h_min: float = 1e-3,
                      rtol: float = 1e-8, sample_times: Sequence[float] | None = None) -> Trajectory:
    """Radius of the disk droplet over ``[0, T]``; see :func:`integrate_radius`."""
    if sigma is None:
        sigma = surface_tension(law) if law is not None else math.sqrt(2.0) / 6.0

    def rhs(rho):
        if not 0 < rho < R_out:
            raise ValueError("rho left the annulus")
        return msr_radial_rhs(radial_state(rho, R_out, sigma, law, beta, k))

    return integrate_radius(rhs, rho0, T, R_out, dt, h_min, rtol, sample_times)


def planar_evolve(rho0: float, T: float, length: float = 1.0, dt: float = 1e-3,
                  law: MaterialLaw | None = None, beta: float | None = None, k: float | None = None,
                  h_min: float = 1e-3, rtol: float = 1e-8,
                  sample_times: Sequence[float] | None = None) -> Trajectory:
    """Half-width of the 1D slab droplet over ``[0, T]``."""
    def rhs(rho):
        if not 0 < rho < 0.5 * length:
            raise ValueError("rho left the interval")
        return planar_rhs(rho, length, law, beta, k)

    return integrate_radius(rhs, rho0, T, 0.5 * length, dt, h_min, rtol, sample_times)


# ---------------------------------------------------------------------------
# epsilon continuation
# ---------------------------------------------------------------------------

@dataclass
class LadderRow:
    epsilon: float
    mesh: str
    max_radius_error: float
    final_radius_error: float
    final_relative_error: float
    energy_ratio: float
    steps: int
    seconds: float
    certified: bool
    times: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    radii: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    oracle: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    interface_mu: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))


@dataclass
class ConvergenceReport:
    rows: list[LadderRow]
    error_trend: str  # "monotone", "not monotone", "insufficient data"
    energy_trend: str
    geometry_floor: float
    notes: list[str] = field(default_factory=list)
    max_relative_error: float = 0.10

    @property
    def errors(self) -> list[float]:
        return [r.max_radius_error for r in self.rows]

    @property
    def empirical_orders(self) -> list[float]:
        out = []
        for a, b in zip(self.rows, self.rows[1:]):
            if a.max_radius_error > 0 and b.max_radius_error > 0:
                out.append(math.log(a.max_radius_error / b.max_radius_error) / math.log(a.epsilon / b.epsilon))
            else:
                out.append(float("nan"))
        return out

    @property
    def passed(self) -> bool:
        return (self.error_trend == "monotone" and all(r.certified for r in self.rows)
                and self.rows[-1].final_relative_error < self.max_relative_error)

    def summary(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        errs = ", ".join(f"{e:.3e}" for e in self.errors)
        return (f"LADDER: {word} errors=[{errs}] error_trend={self.error_trend} "
                f"energy_trend={self.energy_trend}")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "mesh", "max_radius_error", "final_radius_error", "energy_ratio"])
            for r in self.rows:
                w.writerow([repr(r.epsilon), r.mesh, repr(r.max_radius_error),
                            repr(r.final_radius_error), repr(r.energy_ratio)])


def trend(values: Sequence[float], rtol: float = 1e-12) -> str:
    """``"monotone"`` if the sequence never increases (relative slack ``rtol``)."""
    if len(values) < 2:
        return "insufficient data"
    ok = all(b <= a * (1 + rtol) for a, b in zip(values, values[1:]))
    return "monotone" if ok else "not monotone"


def _oracle_for(cfg, law, times):
    geom = cfg["ladder.geometry"]
    rho0 = cfg["ladder.rho0"]
    T = cfg["time.T"]
    ext = cfg.extents
    if geom == "planar":
        return planar_evolve(rho0, T, length=ext[0], law=law, sample_times=times), 0.0
    area = ext[0] * ext[1] * (4.0 if geom == "quarter_disk" else 1.0)
    R_out = cfg["ladder.R_out"] or math.sqrt(area / math.pi)
    return msr_radial_evolve(rho0, T, R_out=R_out, law=law, sample_times=times), R_out


def ladder_member_config(cfg):
    """Initial data and boundary layout implied by ``ladder.geometry``."""
    geom = cfg["ladder.geometry"]
    rho0 = cfg["ladder.rho0"]
    ext = cfg.extents
    if geom == "planar":
        if cfg["mesh.dimension"] != 1:
            raise ValueError("planar ladders need mesh.dimension = 1")
        return cfg.replace(**{"initial.kind": "interval", "initial.a": 0.5 * ext[0] - rho0,
                              "initial.b": 0.5 * ext[0] + rho0})
    if cfg["mesh.dimension"] != 2:
        raise ValueError(f"{geom} ladders need mesh.dimension = 2")
    if geom == "disk":
        return cfg.replace(**{"initial.kind": "disk", "initial.radius": rho0,
                              "initial.center": [0.5 * ext[0], 0.5 * ext[1]]})
    return cfg.replace(**{"initial.kind": "disk", "initial.radius": rho0, "initial.center": [0.0, 0.0],
                          "mesh.reactive_sides": ["right", "top"]})


def measured_radius(mesh, c, geometry: str) -> float:
    from .diagnostics import equivalent_radius, superlevel_measure
    if geometry == "planar":
        return 0.5 * superlevel_measure(mesh, c)
    return equivalent_radius(mesh, c, quarter=geometry == "quarter_disk")


def interface_potential(c: np.ndarray, mu: np.ndarray, band: float = 0.1) -> float:
    """Mean of ``mu`` over nodes with ``|c - 1/2| < band`` (nan if none)."""
    sel = np.abs(np.asarray(c) - 0.5) < band
    return float(np.mean(np.asarray(mu)[sel])) if np.any(sel) else float("nan")


def _run_member(child, out_dir):
    from .workflow import run
    return run(child, out_dir=out_dir)


def eps_continuation(cfg, out_dir: str | Path | None = None, threads: int = 1) -> ConvergenceReport:
    """Run every ladder member and compare its radius with the sharp-interface oracle.

    For each epsilon: the CHR radius ``rho_eps(t)`` (area-equivalent) at the
    snapshot times, the oracle ``rho(t)`` at the same times, the maximal and
    final errors, the energy ratio of the time-integrated ``I_eps`` and
    ``I_0``, and the interface potential error ``|<mu>_band - sigma H|``.
    """
    from .diagnostics import EnergySeries, energy_convergence_report, perimeter_I0
    from .stepper import energy_I_eps

    geom = cfg["ladder.geometry"]
    children = [ladder_member_config(c) for c in cfg.children()]
    out = Path(out_dir) if out_dir is not None else None
    dirs = [None if out is None else out / f"eps_{c['material.epsilon']:.6g}" for c in children]
    if threads > 1 and len(children) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_member, children, dirs))
    else:
        outcomes = [_run_member(c, d) for c, d in zip(children, dirs)]

    rows, series, notes = [], [], []
    for child, oc in zip(children, outcomes):
        mesh, law, snaps = oc.mesh, oc.law, oc.result.snapshots
        sigma = surface_tension(law)
        times = [s.t for s in snaps]
        radii = np.array([measured_radius(mesh, s.c, geom) for s in snaps])
        traj, _ = _oracle_for(child, law, times)
        n = min(len(traj.rho), len(radii))
        if traj.event is not None:
            notes.append(f"epsilon={law.epsilon}: oracle {traj.event} before T")
        err = np.abs(radii[:n] - traj.rho[:n])
        if n < len(radii):  # oracle stopped early: compare the remainder against 0
            err = np.concatenate([err, radii[n:]])
        ref = traj.rho[n - 1]
        mu_if = []
        for s, r in zip(snaps, radii):
            target = 0.0 if geom == "planar" else (sigma / r if r > 0 else float("nan"))
            mu_if.append(abs(interface_potential(s.c, s.mu) - target))
        energies = np.array([energy_I_eps(oc.forms, law, s.c) for s in snaps])
        perims = np.array([perimeter_I0(mesh, s.c, sigma) for s in snaps])
        series.append(EnergySeries(law.epsilon, np.array(times), energies, perims))
        mesh_label = "x".join(str(v) for v in mesh.nodes_per_axis)
        rows.append(LadderRow(
            epsilon=law.epsilon, mesh=mesh_label, max_radius_error=float(err.max()),
            final_radius_error=float(err[-1]), final_relative_error=float(err[-1] / ref),
            energy_ratio=float("nan"), steps=oc.result.ledger.steps, seconds=oc.seconds,
            certified=oc.passed, times=np.array(times), radii=radii, oracle=traj.rho[:n],
            interface_mu=np.array(mu_if),
        ))
    energy = energy_convergence_report(series)
    by_eps = {r.epsilon: r.ratio for r in energy.rows}
    for r in rows:
        r.energy_ratio = by_eps[r.epsilon]
    rows.sort(key=lambda r: -r.epsilon)
    floor = 0.0 if geom == "planar" else cfg["ladder.geometry_floor"]
    if floor:
        notes.append(f"square domain compared with a circular oracle: modelling floor {floor:.0%} "
                     "of relative radius error")
    err_trend = trend([r.max_radius_error for r in rows]) if len(rows) >= 3 else "insufficient data"
    report = ConvergenceReport(rows, err_trend, energy.trend, floor, notes, cfg["ladder.max_relative_error"])
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        report.write_csv(out / "report.csv")
        (out / "summary.txt").write_text(report.summary() + "\n" + "\n".join(notes) + "\n")
    return report
