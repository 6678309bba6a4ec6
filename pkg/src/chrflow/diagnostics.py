"""Post-hoc certificates: dissipation slack, Gibbs-Thomson stress identity,
equipartition, perimeter and energy-convergence measurements.

Everything here operates on plain arrays (snapshots, ledger rows) so it can
be recomputed from persisted artifacts without re-running a simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .materials import MaterialLaw
from .mesh import Mesh

# 1D element quadrature (2-point Gauss on the reference segment)
_G1_X = 0.5 * (1.0 + np.array([-1.0, 1.0]) / np.sqrt(3.0))
_G1_W = np.array([0.5, 0.5])
# edge quadrature for divergence-theorem averages (5-point Gauss-Legendre)
_GE_X, _GE_W = np.polynomial.legendre.leggauss(5)
_GE_X = 0.5 * (_GE_X + 1.0)
_GE_W = 0.5 * _GE_W


# ---------------------------------------------------------------------------
# Gibbs-Thomson test fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GTTestField:
    """Analytic vector field ``Psi`` with ``Psi . n = 0`` on the box boundary.

    ``value(x)`` maps points ``(m, d)`` to ``(m, d)`` and ``gradient(x)`` to
    ``(m, d, d)`` with ``gradient[:, i, j] = d Psi_i / d x_j``.
    """

    family: str
    dim: int
    params: dict
    value: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    gradient: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def descriptor(self) -> dict:
        return {"family": self.family, **self.params}

    def normal_component(self, mesh: Mesh) -> np.ndarray:
        """``|Psi . n|`` at every outer boundary node (corners use both normals)."""
        x = mesh.coordinates
        psi = self.value(x)
        worst = np.zeros(mesh.num_nodes)
        for d, L in enumerate(mesh.extents):
            on = np.isclose(x[:, d], 0.0) | np.isclose(x[:, d], L)
            worst[on] = np.maximum(worst[on], np.abs(psi[on, d]))
        return worst[mesh.outer_boundary_nodes]

    def check_tangential(self, mesh: Mesh, tol: float = 1e-12) -> None:
        if mesh.dimension != self.dim:
            raise ValueError("test field dimension does not match the mesh")
        bad = self.normal_component(mesh)
        if bad.size and bad.max() > tol:
            raise ValueError(f"test field is not tangential: |Psi.n| = {bad.max():.3e} on the boundary")


def _poly_bump(r: np.ndarray):
    """``(1 - r^2)^3`` on ``|r| < 1`` and its derivative in ``r``."""
    inside = np.abs(r) < 1.0
    q = np.where(inside, 1.0 - r * r, 0.0)
    return q**3, np.where(inside, -6.0 * r * q * q, 0.0)


def affine_field(A, b) -> GTTestField:
    """``Psi(x) = A x + b``.  On a box only the zero field is tangential."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = b.size
    if A.shape != (d, d):
        raise ValueError("A must be a square matrix matching b")

    def value(x):
        return np.asarray(x, dtype=float) @ A.T + b

    def gradient(x):
        return np.broadcast_to(A, (len(x), d, d)).copy()

    return GTTestField("affine", d, {"A": A.tolist(), "b": b.tolist()}, value, gradient)


def bump_field(center, width, direction) -> GTTestField:
    """Compactly supported ``b(x) e``, ``b`` a tensor product of ``(1 - r^2)^3``."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    width = np.broadcast_to(np.asarray(width, dtype=float), center.shape).copy()
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    d = center.size
    if direction.size != d:
        raise ValueError("direction must match the dimension of center")
    if np.any(width <= 0):
        raise ValueError("width must be positive")

    def parts(x):
        r = (np.asarray(x, dtype=float) - center) / width
        vals, ders = _poly_bump(r)
        return vals, ders / width

    def value(x):
        vals, _ = parts(x)
        return np.prod(vals, axis=1)[:, None] * direction

    def gradient(x):
        vals, ders = parts(x)
        g = np.empty((len(vals), d))
        for j in range(d):
            others = np.prod(np.delete(vals, j, axis=1), axis=1) if d > 1 else 1.0
            g[:, j] = ders[:, j] * others
        return direction[None, :, None] * g[:, None, :]

    return GTTestField("bump", d, {"center": center.tolist(), "width": width.tolist(),
                                   "direction": direction.tolist()}, value, gradient)


def rotational_field(extents, amplitude: float = 1.0) -> GTTestField:
    """Divergence-free ``Psi = amplitude * (d_y phi, -d_x phi)`` on a rectangle.

    ``phi = (x (Lx - x) y (Ly - y))^2`` vanishes with its gradient on the
    boundary, so ``Psi`` is tangential (in fact zero there).
    """
    Lx, Ly = map(float, extents)

    def factors(x):
        x = np.asarray(x, dtype=float)
        p = x[:, 0] * (Lx - x[:, 0])
        q = x[:, 1] * (Ly - x[:, 1])
        return p, Lx - 2 * x[:, 0], q, Ly - 2 * x[:, 1]

    def value(x):
        p, dp, q, dq = factors(x)
        # phi = p^2 q^2
        return amplitude * np.column_stack([2 * p * p * q * dq, -2 * p * dp * q * q])

    def gradient(x):
        p, dp, q, dq = factors(x)
        g = np.empty((len(p), 2, 2))
        g[:, 0, 0] = 4 * p * dp * q * dq
        g[:, 0, 1] = 2 * p * p * (dq * dq - 2 * q)
        g[:, 1, 0] = -2 * q * q * (dp * dp - 2 * p)
        g[:, 1, 1] = -4 * p * dp * q * dq
        return amplitude * g

    return GTTestField("rotational", 2, {"extents": [Lx, Ly], "amplitude": amplitude},
                       value, gradient)


def radial_field(center, radius: float) -> GTTestField:
    """``Psi = (1 - (r/radius)^2)^3 (x - center)``: radial, supported in a disk."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    d = center.size
    if radius <= 0:
        raise ValueError("radius must be positive")

    def value(x):
        y = np.asarray(x, dtype=float) - center
        s = np.sum(y * y, axis=1) / radius**2
        w = np.where(s < 1.0, (1.0 - s) ** 3, 0.0)
        return w[:, None] * y

    def gradient(x):
        y = np.asarray(x, dtype=float) - center
        s = np.sum(y * y, axis=1) / radius**2
        inside = s < 1.0
        w = np.where(inside, (1.0 - s) ** 3, 0.0)
        dw = np.where(inside, -6.0 * (1.0 - s) ** 2 / radius**2, 0.0)  # d w / d x_j = dw * y_j
        return w[:, None, None] * np.eye(d)[None] + dw[:, None, None] * y[:, :, None] * y[:, None, :]

    return GTTestField("radial", d, {"center": center.tolist(), "radius": radius},
                       value, gradient)


def field_from_descriptor(desc: dict) -> GTTestField:
    family = desc["family"]
    if family == "affine":
        return affine_field(desc["A"], desc["b"])
    if family == "bump":
        return bump_field(desc["center"], desc["width"], desc["direction"])
    if family == "rotational":
        return rotational_field(desc["extents"], desc.get("amplitude", 1.0))
    if family == "radial":
        return radial_field(desc["center"], desc["radius"])
    raise ValueError(f"unknown test field family {family!r}")


# ---------------------------------------------------------------------------
# element quadrature helpers
# ---------------------------------------------------------------------------

def _element_points(mesh: Mesh):
    """Quadrature points per element: ``(points (ne, q, d), barycentric (q, d+1), weights (q,))``."""
    el = mesh.elements
    X = mesh.coordinates[el]  # (ne, d+1, d)
    if mesh.dimension == 1:
        bary = np.column_stack([1.0 - _G1_X, _G1_X])
        weights = _G1_W
    else:
        bary = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        weights = np.full(3, 1.0 / 3.0)
    pts = np.einsum("qk,ekd->eqd", bary, X)
    return pts, bary, weights


def _element_mean_gradient(mesh: Mesh, psi: GTTestField) -> np.ndarray:
    """``(1/|T|) int_T grad Psi`` per element by the divergence theorem.

    Edge integrals use Gauss points shared by neighbouring elements, so the
    element sum of ``int div Psi`` telescopes to the boundary flux.
    """
    el = mesh.elements
    X = mesh.coordinates[el]
    d = mesh.dimension
    if d == 1:
        v0 = psi.value(X[:, 0])
        v1 = psi.value(X[:, 1])
        return ((v1 - v0) / mesh.element_measure)[:, :, None]
    ne = len(el)
    out = np.zeros((ne, 2, 2))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        a, b, opp = X[:, i], X[:, j], X[:, k]
        # evaluate from the lower-indexed node so both neighbours use identical points
        swap = el[:, i] > el[:, j]
        p0 = np.where(swap[:, None], b, a)
        p1 = np.where(swap[:, None], a, b)
        t = p1 - p0
        n = np.column_stack([t[:, 1], -t[:, 0]])  # length-weighted normal
        mid = 0.5 * (a + b)
        n *= np.sign(np.sum(n * (mid - opp), axis=1))[:, None]
        acc = np.zeros((ne, 2))
        for x, w in zip(_GE_X, _GE_W):
            acc += w * psi.value(p0 + x * t)
        out += acc[:, :, None] * n[:, None, :]
    return out / mesh.element_measure


def gibbs_thomson_residual(law: MaterialLaw, mesh: Mesh, c: np.ndarray, mu: np.ndarray,
                           psi: GTTestField, check: bool = True) -> float:
    """Discrete stress identity

        int [(eps/2 |grad c|^2 + f(c)/eps) I - eps grad c (x) grad c] : grad Psi
        - int div(mu Psi) c,

    with the last term integrated by parts to ``+ int mu Psi . grad c``
    (``Psi . n = 0``).  Vanishes in the continuum for every ``c`` whose
    chemical potential is ``mu``.
    """
    if check:
        psi.check_tangential(mesh)
    c = np.asarray(c, dtype=float)
    mu = np.asarray(mu, dtype=float)
    eps = law.epsilon
    el = mesh.elements
    vol = mesh.element_measure
    g = mesh.element_gradients(c)  # (ne, d)
    Gpsi = _element_mean_gradient(mesh, psi)  # (ne, d, d)
    div = np.trace(Gpsi, axis1=1, axis2=2)

    pts, bary, w = _element_points(mesh)
    c_q = c[el] @ bary.T  # (ne, q)
    mu_q = mu[el] @ bary.T
    f_mean = law.f(c_q) @ w
    grad2 = np.sum(g * g, axis=1)
    stress = (0.5 * eps * grad2 + f_mean / eps) * div - eps * np.einsum("ei,eij,ej->e", g, Gpsi, g)

    ne, q, d = pts.shape
    psi_q = psi.value(pts.reshape(-1, d)).reshape(ne, q, d)
    mu_psi = np.einsum("eq,eqd,q->ed", mu_q, psi_q, w)
    transport = np.sum(mu_psi * g, axis=1)
    return float(math.fsum(vol * (stress + transport)))


# ---------------------------------------------------------------------------
# energy densities
# ---------------------------------------------------------------------------

def discrepancy(law: MaterialLaw, mesh: Mesh, c: np.ndarray) -> float:
    """``int |eps/2 |grad c|^2 - f(c)/eps|`` with element quadrature."""
    c = np.asarray(c, dtype=float)
    eps = law.epsilon
    g = mesh.element_gradients(c)
    _, bary, w = _element_points(mesh)
    c_q = c[mesh.elements] @ bary.T
    dens = np.abs(0.5 * eps * np.sum(g * g, axis=1)[:, None] - law.f(c_q) / eps)
    return float(mesh.element_measure * np.sum(dens @ w))


# ---------------------------------------------------------------------------
# interfaces
# ---------------------------------------------------------------------------

def level_set_segments(mesh: Mesh, c: np.ndarray, level: float = 0.5) -> np.ndarray:
    """Marching-squares segments of ``{c = level}`` on a 2D grid, shape ``(m, 2, 2)``.

    Edge crossings are placed by linear interpolation; saddle cells are
    resolved by the cell-average value, which keeps the construction
    symmetric under ``c -> 1 - c`` about ``level = 1/2``.
    """
    if mesh.dimension != 2:
        raise ValueError("level_set_segments needs a 2D mesh")
    V = mesh.grid(np.asarray(c, dtype=float)) - level  # (ny, nx)
    xs, ys = mesh.axes
    v00, v10 = V[:-1, :-1], V[:-1, 1:]
    v01, v11 = V[1:, :-1], V[1:, 1:]
    X0, Y0 = np.meshgrid(xs[:-1], ys[:-1])
    hx, hy = mesh.h

    def cross(a, b):
        return (a > 0) != (b > 0)

    def frac(a, b):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(a == b, 0.5, a / (a - b))

    # edge points: bottom (00-10), right (10-11), top (01-11), left (00-01)
    edges = [
        (cross(v00, v10), X0 + frac(v00, v10) * hx, Y0),
        (cross(v10, v11), X0 + hx, Y0 + frac(v10, v11) * hy),
        (cross(v01, v11), X0 + frac(v01, v11) * hx, Y0 + hy),
        (cross(v00, v01), X0, Y0 + frac(v00, v01) * hy),
    ]
    flags = np.stack([e[0] for e in edges])  # (4, ny-1, nx-1)
    P = np.stack([np.stack([e[1], e[2]], axis=-1) for e in edges])  # (4, ny-1, nx-1, 2)
    count = flags.sum(axis=0)

    segs = []
    two = count == 2
    if np.any(two):
        idx = np.argsort(~flags[:, two], axis=0, kind="stable")[:2]  # first two crossed edges
        pts = P[:, two]  # (4, m, 2)
        cols = np.arange(pts.shape[1])
        segs.append(np.stack([pts[idx[0], cols], pts[idx[1], cols]], axis=1))
    four = count == 4
    if np.any(four):
        centre_in = (0.25 * (v00 + v10 + v01 + v11))[four] > 0
        corner_in = v00[four] > 0
        joined = centre_in == corner_in  # 00 and 11 connected through the centre
        pts = P[:, four]
        pairs_a = np.where(joined[:, None], [0, 2], [0, 1])
        pairs_b = np.where(joined[:, None], [1, 3], [3, 2])
        cols = np.arange(pts.shape[1])
        for pairs in (pairs_a, pairs_b):
            segs.append(np.stack([pts[pairs[:, 0], cols], pts[pairs[:, 1], cols]], axis=1))
    if not segs:
        return np.zeros((0, 2, 2))
    return np.concatenate(segs)


def interface_count(c: np.ndarray, level: float = 0.5) -> int:
    """Number of sign changes of ``c - level`` between neighbouring 1D nodes."""
    above = np.asarray(c) > level
    return int(np.count_nonzero(above[1:] != above[:-1]))


def perimeter_I0(mesh: Mesh, c: np.ndarray, sigma: float, level: float = 0.5) -> float:
    """``sigma * Per({c > level})``: crossing count in 1D, segment length in 2D."""
    if mesh.dimension == 1:
        return sigma * interface_count(c, level)
    segs = level_set_segments(mesh, c, level)
    if len(segs) == 0:
        return 0.0
    return sigma * float(math.fsum(np.hypot(*(segs[:, 1] - segs[:, 0]).T)))


def superlevel_measure(mesh: Mesh, c: np.ndarray, level: float = 0.5) -> float:
    """Exact length/area of ``{c_h > level}`` for the P1 interpolant ``c_h``."""
    v = np.asarray(c, dtype=float)[mesh.elements] - level
    vol = mesh.element_measure
    if mesh.dimension == 1:
        a, b = v[:, 0], v[:, 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            part = np.where(a > 0, a, b) / np.abs(a - b)
        frac = np.where((a > 0) & (b > 0), 1.0, np.where((a > 0) ^ (b > 0), part, 0.0))
        return float(vol * frac.sum())
    s = np.sort(v, axis=1)
    lo, mid, hi = s[:, 0], s[:, 1], s[:, 2]
    n_above = np.sum(v > 0, axis=1)
    frac = np.zeros(len(v))
    frac[n_above == 3] = 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        one = n_above == 1  # only hi above
        frac[one] = hi[one] ** 2 / ((hi[one] - mid[one]) * (hi[one] - lo[one]))
        two = n_above == 2  # lo below
        frac[two] = 1.0 - lo[two] ** 2 / ((mid[two] - lo[two]) * (hi[two] - lo[two]))
    return float(vol * frac.sum())


def equivalent_radius(mesh: Mesh, c: np.ndarray, level: float = 0.5, quarter: bool = False) -> float:
    """Radius of the disk with the area of ``{c > level}`` (quarter disk if ``quarter``)."""
    area = superlevel_measure(mesh, c, level)
    return math.sqrt((4.0 if quarter else 1.0) * area / math.pi)


# ---------------------------------------------------------------------------
# ledger certificates
# ---------------------------------------------------------------------------

@dataclass
class Certificate:
    passed: bool
    slack: float
    steps: int
    failing_step: int | None = None
    reason: str = ""
    min_step_slack: float = float("nan")
    max_mass_defect: float = 0.0

    def summary(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        tail = "" if self.passed else f" step={self.failing_step} reason={self.reason}"
        return f"CERTIFY: {word} steps={self.steps} slack={self.slack:.6e}{tail}"


def _as_rows(ledger) -> list[dict]:
    """Normalise a ``DissipationLedger`` or a list of ledger rows (dicts).

    Rows follow the CSV layout: a first row with ``i = 0`` holding the
    initial energy and mass, then one row per step.
    """
    if hasattr(ledger, "records"):
        rows = [{"i": 0, "t": 0.0, "tau": 0.0, "I_eps": ledger.initial_energy, "A": 0.0,
                 "A_star": 0.0, "gap": 0.0, "mass": ledger.initial_mass, "flux": 0.0, "slack": 0.0}]
        rows += [r.row() for r in ledger.records]
        for k, r in enumerate(rows):
            r["i"] = k
        return rows
    return [dict(r) for r in ledger]


def dissipation_certificate(ledger, T_star: float | None = None) -> float:
    """``I[c0] - I[c(T*)] - sum tau (A + A*)`` over the steps with ``t <= T*``.

    Summation is exactly rounded (``math.fsum``), so the value does not
    depend on step order or on a CSV round trip of the inputs.
    """
    rows = _as_rows(ledger)
    steps = [r for r in rows[1:] if T_star is None or float(r["t"]) <= T_star * (1 + 1e-12)]
    final = float(steps[-1]["I_eps"]) if steps else float(rows[0]["I_eps"])
    terms = [float(rows[0]["I_eps"]), -final]
    for r in steps:
        tau = float(r["tau"])
        terms += [-tau * float(r["A"]), -tau * float(r["A_star"])]
    return math.fsum(terms)


def certify(ledger, tol_diss: float = 1e-9, tol_mass: float = 1e-10, tol_gap: float = 1e-7,
            require_monotone: bool = False) -> Certificate:
    """Re-assert the per-step and telescoped ledger inequalities from stored rows.

    Per step ``i``: slack recomputed from ``I_eps`` of rows ``i-1, i`` is at
    least ``-tol_diss`` and agrees with the stored slack column; mass balance
    holds to ``tol_mass (1 + |mass|)``; the Fenchel gap is certified.  The
    telescoped slack must be at least ``-tol_diss * steps``.
    """
    rows = _as_rows(ledger)
    n = len(rows) - 1
    total = dissipation_certificate(rows)
    I0 = float(rows[0]["I_eps"])
    min_slack = float("inf")
    max_mass = 0.0
    for k in range(1, n + 1):
        prev, r = rows[k - 1], rows[k]
        tau = float(r["tau"])
        A, As = float(r["A"]), float(r["A_star"])
        I_prev, I_next = float(prev["I_eps"]), float(r["I_eps"])
        slack = math.fsum([I_prev, -I_next, -tau * A, -tau * As])
        min_slack = min(min_slack, slack)
        mass_def = float(r["mass"]) - float(prev["mass"]) - tau * float(r["flux"])
        max_mass = max(max_mass, abs(mass_def))
        index = int(r.get("i", k))

        def fail(reason):
            return Certificate(False, total, n, index, reason, min_slack, max_mass)

        if not tau > 0:
            return fail("nonpositive step size")
        if slack < -tol_diss:
            return fail(f"dissipation slack {slack:.3e}")
        if "slack" in r and abs(float(r["slack"]) - slack) > 1e-12 * (1 + abs(I_prev)) + tol_diss:
            return fail("stored slack does not match energies")
        if abs(mass_def) > tol_mass * (1 + abs(float(prev["mass"]))):
            return fail(f"mass defect {mass_def:.3e}")
        gap = float(r["gap"])
        a_ref = float(r.get("A_endpoint", A)) if r.get("A_endpoint", "") not in ("", None) else A
        if not math.isfinite(a_ref):
            a_ref = A
        if gap > tol_gap * (1 + abs(a_ref) + abs(As)) or gap < -1e-9:
            return fail(f"Fenchel gap {gap:.3e}")
        if require_monotone and I_next > I_prev + 1e-9 * (1 + abs(I0)):
            return fail("energy increased")
    if total < -tol_diss * max(n, 1):
        return Certificate(False, total, n, n, "telescoped slack", min_slack, max_mass)
    return Certificate(True, total, n, None, "", min_slack if n else 0.0, max_mass)


# ---------------------------------------------------------------------------
# energy convergence across an epsilon ladder
# ---------------------------------------------------------------------------

@dataclass
class EnergySeries:
    epsilon: float
    times: np.ndarray
    energies: np.ndarray
    perimeters: np.ndarray


@dataclass
class EnergyRow:
    epsilon: float
    integral_I_eps: float
    integral_I0: float
    ratio: float


@dataclass
class EnergyReport:
    rows: list[EnergyRow]
    trend: str  # "monotone", "not monotone" or "insufficient data"

    @property
    def monotone(self) -> bool:
        return self.trend == "monotone"


def energy_convergence_report(series: Sequence[EnergySeries], times_rtol: float = 1e-12) -> EnergyReport:
    """Time integrals of ``I_eps`` and ``I0`` per epsilon and their ratio.

    Integrals use the trapezoid rule on the sample times, which must agree
    across the ladder.  ``trend`` is ``"monotone"`` when ``|ratio - 1|`` does
    not increase as epsilon decreases.  A pair of vanishing integrals has
    ratio 1 (nothing to compare).
    """
    series = sorted(series, key=lambda s: -s.epsilon)
    if not series:
        raise ValueError("no runs given")
    t_ref = np.asarray(series[0].times, dtype=float)
    rows = []
    for s in series:
        t = np.asarray(s.times, dtype=float)
        if t.shape != t_ref.shape or not np.allclose(t, t_ref, rtol=times_rtol, atol=0.0):
            raise ValueError(f"sample times of epsilon={s.epsilon} do not match the ladder")
        a = float(np.trapezoid(s.energies, t)) if len(t) > 1 else float(s.energies[0])
        b = float(np.trapezoid(s.perimeters, t)) if len(t) > 1 else float(s.perimeters[0])
        ratio = 1.0 if a == 0.0 and b == 0.0 else (a / b if b != 0 else float("inf"))
        rows.append(EnergyRow(s.epsilon, a, b, ratio))
    if len(rows) < 3:
        trend = "insufficient data"
    else:
        dev = [abs(r.ratio - 1.0) for r in rows]
        trend = "monotone" if all(d1 <= d0 * (1 + 1e-12) for d0, d1 in zip(dev, dev[1:])) else "not monotone"
    return EnergyReport(rows, trend)


def series_from_snapshots(mesh: Mesh, law: MaterialLaw, snapshots: Iterable, energy: Callable,
                          sigma: float) -> EnergySeries:
    """Build an :class:`EnergySeries` from ``Snapshot`` objects."""
    snaps = list(snapshots)
    return EnergySeries(
        law.epsilon,
        np.array([s.t for s in snaps]),
        np.array([energy(s.c) for s in snaps]),
        np.array([perimeter_I0(mesh, s.c, sigma) for s in snaps]),
    )
