"""Dissipation potential, its derivative operator, inverse and convex conjugate.

For a frozen boundary trace ``c`` the dissipation potential of a potential
field ``v`` is

    A_c(v) = 1/2 int |grad v|^2 - int_dOmega G(c, v),

its derivative is the operator ``B_c(v) = K v - Mb R(c, v)`` (a dual load),
and the conjugate ``A*_c(v*) = sup_v <v*, v> - A_c(v)`` is evaluated through
its unique maximiser ``v = B_c^{-1}(v*)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .materials import MaterialLaw
from .mesh import FormSet, SolverError, h1_dual_norm, solve_spd


@dataclass(frozen=True)
class DualityContext:
    forms: FormSet
    law: MaterialLaw
    c_trace: np.ndarray
    max_iter: int = 50
    rtol: float = 1e-11
    method: str = "direct"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        trace = np.asarray(self.c_trace, dtype=float)
        if trace.shape != self.mesh.boundary_nodes.shape:
            raise ValueError("c_trace must have one value per boundary node")
        if not np.all(np.isfinite(trace)):
            raise ValueError("c_trace must be finite")
        object.__setattr__(self, "c_trace", trace)

    @classmethod
    def from_field(cls, forms: FormSet, law: MaterialLaw, c: np.ndarray, **kw) -> "DualityContext":
        return cls(forms, law, np.asarray(c, dtype=float)[forms.mesh.boundary_nodes], **kw)

    @property
    def mesh(self):
        return self.forms.mesh

    def reaction(self, v: np.ndarray) -> np.ndarray:
        """``R(c, v)`` at the boundary nodes."""
        return self.law.R(self.c_trace, np.asarray(v)[self.mesh.boundary_nodes])

    def boundary_flux(self, v: np.ndarray) -> float:
        """``int_dOmega R(c, v)``: rate of mass entering through the boundary."""
        return float(np.dot(self.mesh.boundary_weights, self.reaction(v)))


def eval_A(ctx: DualityContext, v: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    nodes, w = ctx.mesh.boundary_nodes, ctx.mesh.boundary_weights
    return float(0.5 * v @ (ctx.forms.stiffness @ v) - np.dot(w, ctx.law.G(ctx.c_trace, v[nodes])))


def apply_B(ctx: DualityContext, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    load = ctx.forms.stiffness @ v
    load[ctx.mesh.boundary_nodes] -= ctx.mesh.boundary_weights * ctx.reaction(v)
    return load


def _jacobian(ctx: DualityContext, v: np.ndarray) -> sp.csc_matrix:
    nodes = ctx.mesh.boundary_nodes
    diag = np.zeros(ctx.mesh.num_nodes)
    diag[nodes] = -ctx.mesh.boundary_weights * ctx.law.dR_dw(ctx.c_trace, v[nodes])
    return (ctx.forms.stiffness + sp.diags(diag)).tocsc()


def _robin_operator(forms: FormSet, beta: float, factorize: bool):
    """``K + beta Mb`` and its factorisation, cached on the form set."""
    key = ("robin", beta)
    if key not in forms._cache:
        A = (forms.stiffness + beta * sp.diags(forms.boundary_mass)).tocsc()
        forms._cache[key] = (A, spla.splu(A))
    A, lu = forms._cache[key]
    return A, (lu if factorize else None)


def invert_B(ctx: DualityContext, load: np.ndarray, v0: np.ndarray | None = None,
             return_info: bool = False):
    """Solve ``B_c(v) = load`` for ``v``.

    Affine laws take one linear solve.  Otherwise Newton's method with a
    backtracking line search on the dual norm of the residual is used.
    """
    load = np.asarray(load, dtype=float)
    scale = 1.0 + h1_dual_norm(ctx.forms, load)
    tol = ctx.rtol * scale

    if ctx.law.variant == "affine":
        beta, k = ctx.law.beta, ctx.law.k
        rhs = load.copy()
        nodes = ctx.mesh.boundary_nodes
        rhs[nodes] += ctx.mesh.boundary_weights * k * (1.0 - np.clip(ctx.c_trace, 0.0, 1.0))
        A, lu = _robin_operator(ctx.forms, beta, ctx.method == "direct")
        v = solve_spd(A, rhs, method=ctx.method, factor=lu)
        res = h1_dual_norm(ctx.forms, apply_B(ctx, v) - load)
        if res > tol:
            raise SolverError("affine Robin solve missed tolerance", res)
        return (v, {"iterations": 1, "residual": res}) if return_info else v

    v = np.zeros(ctx.mesh.num_nodes) if v0 is None else np.array(v0, dtype=float)
    F = apply_B(ctx, v) - load
    res = h1_dual_norm(ctx.forms, F)
    it = 0
    while res > tol:
        if it >= ctx.max_iter:
            raise SolverError(f"Newton did not converge in {ctx.max_iter} iterations", res)
        J = _jacobian(ctx, v)
        try:
            dv = spla.splu(J).solve(-F)
        except RuntimeError as exc:  # singular factorisation
            raise SolverError(f"singular Newton linearisation: {exc}", res) from exc
        step = 1.0
        while True:
            trial = v + step * dv
            F_trial = apply_B(ctx, trial) - load
            res_trial = h1_dual_norm(ctx.forms, F_trial)
            if res_trial < res or step <= 2.0**-20:
                break
            step *= 0.5
        if res_trial >= res:
            raise SolverError("line search stalled", res)
        v, F, res = trial, F_trial, res_trial
        it += 1
    return (v, {"iterations": it, "residual": res}) if return_info else v


def eval_A_star(ctx: DualityContext, load: np.ndarray, v0: np.ndarray | None = None):
    """Conjugate value at ``load`` and its maximiser ``B_c^{-1}(load)``."""
    v = invert_B(ctx, load, v0=v0)
    return float(np.dot(load, v) - eval_A(ctx, v)), v


def fenchel_gap(ctx: DualityContext, v: np.ndarray, load: np.ndarray,
                a_star: float | None = None) -> float:
    """``A_c(v) + A*_c(load) - <load, v>``; nonnegative, zero iff ``load = B_c(v)``."""
    if a_star is None:
        a_star, _ = eval_A_star(ctx, load, v0=v)
    return float(eval_A(ctx, v) + a_star - np.dot(load, v))


@dataclass
class ProbeReport:
    constant: float
    norms: np.ndarray
    values: np.ndarray
    scales: np.ndarray

    @property
    def satisfied(self) -> bool:
        C = self.constant
        return bool(np.all(self.values >= self.norms**2 / C - C - 1e-12 * (1 + np.abs(self.values))))


def coercivity_probe(ctx: DualityContext, samples: int = 200, decades: float = 4.0,
                     rng: np.random.Generator | int | None = 0) -> ProbeReport:
    """Smallest ``C`` with ``A*(v*) >= |v*|^2_{H1*} / C - C`` over random loads.

    Loads are Gaussian nodal vectors rescaled to dual norms spread
    log-uniformly over ``decades`` orders of magnitude around 1.
    """
    rng = np.random.default_rng(rng)
    n = ctx.mesh.num_nodes
    norms = np.empty(samples)
    values = np.empty(samples)
    scales = 10.0 ** rng.uniform(-decades / 2, decades / 2, samples)
    for i in range(samples):
        load = rng.standard_normal(n)
        load *= scales[i] / h1_dual_norm(ctx.forms, load)
        norms[i] = h1_dual_norm(ctx.forms, load)
        values[i], _ = eval_A_star(ctx, load)
    # per-sample threshold: positive root of C^2 + A C - |v*|^2 = 0
    needed = 0.5 * (-values + np.sqrt(values**2 + 4 * norms**2))
    return ProbeReport(float(max(needed.max(), 1e-300)), norms, values, scales)
