"""Minimizing-movements time stepping for the Cahn-Hilliard reaction model.

Each step minimises

    Phi(c) = I_eps[c] + tau * A*_{c_prev}(-(c - c_prev) / tau)

with the reaction argument frozen at the previous trace.  Stationarity of
``Phi`` is the coupled system

    M (c - c_prev) / tau = -K mu + Mb R(c_prev, mu),
    M mu = eps K c + M f'(c) / eps,

solved by Newton's method on ``(c, mu)``.  When Newton's critical point does
not lower ``Phi`` below its value at ``c_prev`` a preconditioned descent on
``Phi`` takes over.  Every accepted step is audited: dissipation slack, mass
balance and the Fenchel gap of ``(mu, -(c - c_prev)/tau)`` are recorded.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .duality import DualityContext, eval_A, eval_A_star, invert_B
from .materials import MaterialLaw
from .mesh import FormSet, SolverError

log = logging.getLogger(__name__)


class StepFailure(SolverError):
    """Neither Newton nor the descent fallback produced an admissible step."""


@dataclass(frozen=True)
class Tolerances:
    newton_max_iter: int = 30
    newton_tol: float = 1e-13
    diss: float = 1e-9
    mass: float = 1e-10
    gap: float = 1e-7
    descent_max_iter: int = 500
    max_halvings: int = 8


def energy_I_eps(forms: FormSet, law: MaterialLaw, c: np.ndarray) -> float:
    c = np.asarray(c, dtype=float)
    eps = law.epsilon
    return float(np.dot(forms.mass, law.f(c)) / eps + 0.5 * eps * c @ (forms.stiffness @ c))


def chemical_potential(forms: FormSet, law: MaterialLaw, c: np.ndarray) -> np.ndarray:
    """Lumped solve of ``int mu xi = int eps grad c . grad xi + f'(c) xi / eps``."""
    c = np.asarray(c, dtype=float)
    eps = law.epsilon
    return eps * (forms.stiffness @ c) / forms.mass + law.df(c) / eps


@dataclass
class StepRecord:
    index: int
    t: float
    tau: float
    I_eps_prev: float
    I_eps_next: float
    A_value: float
    A_star_value: float
    fenchel_gap: float
    mass_prev: float
    mass_next: float
    boundary_flux: float
    iterations: int
    method: str = "newton"
    chain_defect: float = float("nan")
    A_endpoint: float = float("nan")
    c_prev: np.ndarray | None = field(default=None, repr=False)
    c_next: np.ndarray | None = field(default=None, repr=False)
    mu: np.ndarray | None = field(default=None, repr=False)

    @property
    def dissipation(self) -> float:
        return self.tau * (self.A_value + self.A_star_value)

    @property
    def slack(self) -> float:
        return self.I_eps_prev - self.I_eps_next - self.dissipation

    @property
    def mass_defect(self) -> float:
        return self.mass_next - self.mass_prev - self.tau * self.boundary_flux

    def row(self) -> dict:
        return {
            "i": self.index, "t": self.t, "tau": self.tau, "I_eps": self.I_eps_next,
            "A": self.A_value, "A_star": self.A_star_value, "gap": self.fenchel_gap,
            "mass": self.mass_next, "flux": self.boundary_flux, "slack": self.slack,
            "I_eps_prev": self.I_eps_prev, "mass_prev": self.mass_prev,
            "iterations": self.iterations, "method": self.method,
            "chain_defect": self.chain_defect, "A_endpoint": self.A_endpoint,
        }


@dataclass
class DissipationLedger:
    initial_energy: float
    initial_mass: float
    records: list[StepRecord] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.records)

    @property
    def cumulative_dissipation(self) -> float:
        return math.fsum(r.dissipation for r in self.records)

    @property
    def final_energy(self) -> float:
        return self.records[-1].I_eps_next if self.records else self.initial_energy

    def telescoped_slack(self, upto: int | None = None) -> float:
        recs = self.records if upto is None else self.records[:upto]
        final = recs[-1].I_eps_next if recs else self.initial_energy
        return math.fsum([self.initial_energy, -final] + [-r.dissipation for r in recs])


def _residual(forms, law, ctx, c_prev, tau, c, mu):
    M, K = forms.mass, forms.stiffness
    nodes, wb = forms.mesh.boundary_nodes, forms.mesh.boundary_weights
    r1 = M * (c - c_prev) + tau * (K @ mu)
    r1[nodes] -= tau * wb * law.R(ctx.c_trace, mu[nodes])
    r2 = M * mu - law.epsilon * (K @ c) - M * law.df(c) / law.epsilon
    return r1, r2


class _SchurPattern:
    """Fixed sparsity of ``M + tau A M^-1 B`` with vectorised value updates."""

    def __init__(self, forms: FormSet, eps: float, tau: float):
        n = forms.mesh.num_nodes
        K = forms.stiffness.tocsc()
        K.sort_indices()
        KMK = (K @ sp.diags(1.0 / forms.mass) @ K).tocsc()
        P = (abs(KMK) + abs(K) + sp.identity(n, format="csc")).tocsc()
        P.sort_indices()
        cols = np.repeat(np.arange(n), np.diff(P.indptr))
        keys = cols.astype(np.int64) * n + P.indices

        def locate(A):
            A = A.tocsc()
            A.sort_indices()
            c = np.repeat(np.arange(n), np.diff(A.indptr))
            return np.searchsorted(keys, c.astype(np.int64) * n + A.indices), A

        kmk_pos, KMK = locate(KMK)
        self.k_pos, K = locate(K)
        self.k_data = K.data
        self.k_rows = K.indices
        self.k_cols = np.repeat(np.arange(n), np.diff(K.indptr))
        self.diag_pos = np.searchsorted(keys, np.arange(n, dtype=np.int64) * (n + 1))
        self.base = np.zeros(len(keys))
        np.add.at(self.base, kmk_pos, tau * eps * KMK.data)
        self.base[self.diag_pos] += forms.mass
        self.P = P
        self.mass = forms.mass
        self.eps = eps
        self.tau = tau

    def matrix(self, dR: np.ndarray, q: np.ndarray) -> sp.csc_matrix:
        data = self.base.copy()
        kd = self.k_data * (q[self.k_cols] + self.eps * (dR / self.mass)[self.k_rows])
        data[self.k_pos] += self.tau * kd
        data[self.diag_pos] += self.tau * dR * q
        return sp.csc_matrix((data, self.P.indices, self.P.indptr), shape=self.P.shape)


def _schur_pattern(forms: FormSet, eps: float, tau: float) -> _SchurPattern:
    key = ("schur", eps, tau)
    if key not in forms._cache:
        stale = [k for k in forms._cache if k[0] == "schur"]
        if len(stale) > 16:
            for k in stale:
                del forms._cache[k]
        forms._cache[key] = _SchurPattern(forms, eps, tau)
    return forms._cache[key]


def _newton(forms, law, ctx, c_prev, tau, c0, mu0, tol: Tolerances):
    """Newton on the coupled residual, with ``mu`` eliminated by its lumped mass.

    Writing the Jacobian as ``[[M, tau A], [-B, M]]`` with ``A = K + D_R``
    (Robin linearisation) and ``B = eps K + M diag(f''/eps)``, the update
    solves ``(M + tau A M^-1 B) dc = -r1 + tau A M^-1 r2`` and then
    ``dmu = M^-1 (B dc - r2)``.
    """
    n = forms.mesh.num_nodes
    M = forms.mass
    K = forms.stiffness
    nodes, wb = forms.mesh.boundary_nodes, forms.mesh.boundary_weights
    eps = law.epsilon
    pattern = _schur_pattern(forms, eps, tau)
    c, mu = c0.copy(), mu0.copy()
    scale = 1.0 + np.max(np.abs(c_prev))
    for it in range(1, tol.newton_max_iter + 1):
        r1, r2 = _residual(forms, law, ctx, c_prev, tau, c, mu)
        dR = np.zeros(n)
        dR[nodes] = -wb * law.dR_dw(ctx.c_trace, mu[nodes])
        q = law.d2f(c) / eps
        S = pattern.matrix(dR, q)
        m_inv_r2 = r2 / M
        rhs = -r1 + tau * (K @ m_inv_r2 + dR * m_inv_r2)
        try:
            dc = spla.splu(S, permc_spec="MMD_AT_PLUS_A").solve(rhs)
        except RuntimeError as exc:
            raise StepFailure(f"singular Newton system: {exc}",
                              float(np.linalg.norm(np.concatenate([r1, r2])))) from exc
        dmu = (eps * (K @ dc) + M * q * dc - r2) / M
        if not (np.all(np.isfinite(dc)) and np.all(np.isfinite(dmu))):
            raise StepFailure("Newton update not finite")
        c += dc
        mu += dmu
        if np.max(np.abs(dc)) <= tol.newton_tol * scale and \
                np.max(np.abs(dmu)) <= tol.newton_tol * (1.0 + np.max(np.abs(mu))):
            return c, mu, it
    r1, r2 = _residual(forms, law, ctx, c_prev, tau, c, mu)
    res = float(np.max(np.abs(np.concatenate([r1, r2]))))
    if res < 1e-12 * scale:
        return c, mu, tol.newton_max_iter
    raise StepFailure("coupled Newton did not converge", res)


def step_objective(forms, law, ctx, c_prev, tau, c, v0=None):
    """``Phi(c)`` together with the conjugate maximiser at ``-(c - c_prev)/tau``."""
    load = forms.mass * (c_prev - c) / tau
    a_star, vbar = eval_A_star(ctx, load, v0=v0)
    return energy_I_eps(forms, law, c) + tau * a_star, vbar


def _descent(forms, law, ctx, c_prev, tau, c0, tol: Tolerances):
    """Armijo descent on ``Phi`` with H1-Riesz preconditioning."""
    c = c0.copy()
    phi, vbar = step_objective(forms, law, ctx, c_prev, tau, c)
    lu = forms.h1_factor()
    it = 0
    for it in range(1, tol.descent_max_iter + 1):
        grad = forms.mass * (chemical_potential(forms, law, c) - vbar)
        d = -lu.solve(grad)
        slope = float(grad @ d)
        if -slope <= 1e-26 * (1 + abs(phi)):
            break
        step = 1.0
        while step > 2.0**-30:
            trial = c + step * d
            phi_t, v_t = step_objective(forms, law, ctx, c_prev, tau, trial, v0=vbar)
            if phi_t <= phi + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            break
        c, phi, vbar = trial, phi_t, v_t
    return c, vbar, it, phi


DISSIPATION_RULES = ("interpolant", "endpoint")
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(3)


def _solve(forms, law, ctx, c_prev, tau, c0, tol: Tolerances, force_descent=False):
    """Critical point of ``Phi``; Newton first, descent when it does not lower ``Phi``."""
    phi_prev, _ = step_objective(forms, law, ctx, c_prev, tau, c_prev)
    method = "newton"
    c = mu = None
    iters = 0
    if not force_descent:
        try:
            c, mu, iters = _newton(forms, law, ctx, c_prev, tau, c0, chemical_potential(forms, law, c0), tol)
        except StepFailure:
            c = None
    phi_tol = tol.diss * (1.0 + abs(phi_prev))
    if c is not None:
        phi_new, _ = step_objective(forms, law, ctx, c_prev, tau, c, v0=mu)
    if c is None or phi_new > phi_prev + phi_tol:
        c_d, _, iters_d, phi_d = _descent(forms, law, ctx, c_prev, tau, c_prev, tol)
        if c is None or phi_d < phi_new:
            c, mu, iters, method = c_d, chemical_potential(forms, law, c_d), iters_d, "descent"
    return c, mu, iters, method


def interpolant_dissipation(forms: FormSet, law: MaterialLaw, ctx: DualityContext, c_prev: np.ndarray,
                            tau: float, c_next: np.ndarray, tol: Tolerances = Tolerances()) -> float:
    """Mean of ``A(mu_tilde)`` over the step by 3-point Gauss-Legendre quadrature.

    ``mu_tilde(s)`` is the potential of the minimiser with step ``s``, which
    solves the same frozen-trace system; the linear interpolation between the
    endpoints warm-starts each solve.
    """
    total = 0.0
    for x, w in zip(0.5 * (_GAUSS_NODES + 1.0), 0.5 * _GAUSS_WEIGHTS):
        c0 = c_prev + x * (c_next - c_prev)
        _, mu, _, _ = _solve(forms, law, ctx, c_prev, x * tau, c0, tol)
        total += w * eval_A(ctx, mu)
    return float(total)


def minmove_step(forms: FormSet, law: MaterialLaw, c_prev: np.ndarray, tau: float,
                 tol: Tolerances = Tolerances(), warm_start: np.ndarray | None = None,
                 index: int = 0, t: float = 0.0, force_descent: bool = False,
                 rule: str = "interpolant") -> StepRecord:
    """One implicit variational step from ``c_prev`` with step size ``tau``.

    ``rule`` selects how the primal dissipation ``A`` over the step is
    measured: ``"endpoint"`` uses ``A(mu_next)``, ``"interpolant"`` averages
    ``A`` along the variational interpolation, which makes the per-step
    energy inequality hold even where ``I_eps`` is not convex.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if rule not in DISSIPATION_RULES:
        raise ValueError(f"rule must be one of {DISSIPATION_RULES}")
    c_prev = np.asarray(c_prev, dtype=float)
    if not np.all(np.isfinite(c_prev)):
        raise ValueError("c_prev must be finite")
    ctx = DualityContext.from_field(forms, law, c_prev)
    mu_prev = chemical_potential(forms, law, c_prev)
    c0 = c_prev if warm_start is None else np.asarray(warm_start, dtype=float)
    c, mu, iters, method = _solve(forms, law, ctx, c_prev, tau, c0, tol, force_descent)

    load = forms.mass * (c_prev - c) / tau
    A_end = eval_A(ctx, mu)
    A_star, _ = eval_A_star(ctx, load, v0=mu)
    gap = A_end + A_star - float(np.dot(load, mu))
    A_val = A_end if rule == "endpoint" else interpolant_dissipation(forms, law, ctx, c_prev, tau, c, tol)
    I_prev = energy_I_eps(forms, law, c_prev)
    I_next = energy_I_eps(forms, law, c)
    chain = abs((I_next - I_prev) - float(np.dot(forms.mass * (c - c_prev), 0.5 * (mu_prev + mu))))
    rec = StepRecord(
        index=index, t=t + tau, tau=tau, I_eps_prev=I_prev, I_eps_next=I_next,
        A_value=A_val, A_star_value=A_star, fenchel_gap=gap,
        mass_prev=float(np.dot(forms.mass, c_prev)), mass_next=float(np.dot(forms.mass, c)),
        boundary_flux=ctx.boundary_flux(mu), iterations=iters, method=method, chain_defect=chain,
        A_endpoint=A_end, c_prev=c_prev.copy(), c_next=c, mu=mu,
    )
    _audit(rec, tol)
    return rec


def _audit(rec: StepRecord, tol: Tolerances) -> None:
    if rec.slack < -tol.diss:
        raise StepFailure(f"dissipation slack {rec.slack:.3e} below tolerance", -rec.slack)
    if abs(rec.mass_defect) > tol.mass * (1.0 + abs(rec.mass_prev)):
        raise StepFailure("mass balance violated", abs(rec.mass_defect))
    a_end = rec.A_value if math.isnan(rec.A_endpoint) else rec.A_endpoint
    if rec.fenchel_gap > tol.gap * (1.0 + abs(a_end) + abs(rec.A_star_value)) or rec.fenchel_gap < -1e-9:
        raise StepFailure("Fenchel gap too large", rec.fenchel_gap)


def variational_interpolant(forms: FormSet, law: MaterialLaw, c_prev: np.ndarray, tau: float,
                            t_frac: float, warm_start: np.ndarray | None = None,
                            tol: Tolerances = Tolerances()) -> tuple[np.ndarray, np.ndarray]:
    """Minimiser at the intermediate time ``t_frac * tau`` and its potential.

    The potential is the interpolating chemical potential
    ``B^{-1}_{c_prev}(-(c - c_prev) / (t_frac tau))``.
    """
    if not 0 < t_frac <= 1:
        raise ValueError("t_frac must lie in (0, 1]")
    s = t_frac * tau
    ctx = DualityContext.from_field(forms, law, c_prev)
    c0 = c_prev if warm_start is None else np.asarray(warm_start, dtype=float)
    c, _, _, _ = _solve(forms, law, ctx, c_prev, s, c0, tol)
    mu_tilde = invert_B(ctx, forms.mass * (c_prev - c) / s)
    return c, mu_tilde


@dataclass
class Snapshot:
    t: float
    c: np.ndarray
    mu: np.ndarray


@dataclass
class RunResult:
    ledger: DissipationLedger
    snapshots: list[Snapshot]
    completed: bool = True
    failure: str | None = None


def simulate(forms: FormSet, law: MaterialLaw, c0: np.ndarray, tau: float, T: float,
             snapshot_every: int = 1, tol: Tolerances = Tolerances(), keep_fields: bool = False,
             on_step: Callable[[StepRecord], None] | None = None,
             rule: str = "interpolant") -> RunResult:
    """March from ``c0`` to time ``T`` with nominal step ``tau``.

    A failing step is retried as two half steps, recursively, at most
    ``tol.max_halvings`` levels deep; the nominal sample times are unchanged.
    Snapshots are taken at every ``snapshot_every``-th nominal step and at 0.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    c = np.asarray(c0, dtype=float).copy()
    ledger = DissipationLedger(energy_I_eps(forms, law, c), float(np.dot(forms.mass, c)))
    snaps = [Snapshot(0.0, c.copy(), chemical_potential(forms, law, c))]
    n_steps = int(round(T / tau))
    if n_steps * tau < T * (1 - 1e-12):
        n_steps += 1
    counter = [0]

    def advance(c, t, dt, depth):
        try:
            rec = minmove_step(forms, law, c, dt, tol=tol, index=counter[0], t=t, rule=rule)
        except StepFailure as exc:
            if depth >= tol.max_halvings:
                raise
            log.info("step at t=%.6g failed (%s); halving to %.3g", t, exc, dt / 2)
            c_half = advance(c, t, dt / 2, depth + 1)
            return advance(c_half, t + dt / 2, dt / 2, depth + 1)
        counter[0] += 1
        if on_step is not None:
            on_step(rec)
        c_next = rec.c_next
        if not keep_fields:
            rec.c_prev = rec.c_next = rec.mu = None
        ledger.records.append(rec)
        return c_next

    t = 0.0
    for i in range(1, n_steps + 1):
        dt = min(tau, T - t) if i == n_steps else tau
        try:
            c = advance(c, t, dt, 0)
        except StepFailure as exc:
            log.error("unrecoverable step failure at t=%.6g: %s", t, exc)
            return RunResult(ledger, snaps, completed=False, failure=str(exc))
        t = i * tau if i < n_steps else T
        if i % snapshot_every == 0 or i == n_steps:
            snaps.append(Snapshot(t, c.copy(), chemical_potential(forms, law, c)))
    return RunResult(ledger, snaps)
