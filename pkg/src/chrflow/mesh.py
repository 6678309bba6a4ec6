"""Tensor-grid meshes with lumped first-order elements.

Fields are plain float arrays indexed by node.  A dual functional is stored as
its load vector ``b`` so that its action on a field ``xi`` is ``b @ xi``; the
L2 embedding of a field ``u`` is ``mass * u``.

In 2D each cell is split into two right triangles along the same diagonal;
the P1 stiffness of that triangulation is the five-point stencil, which is
what :func:`assemble_forms` builds.  Node ``(i, j)`` (x-index ``i``,
y-index ``j``) has flat index ``j * nx + i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """A linear or nonlinear solve did not reach its tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of an interval ``(0, Lx)`` or rectangle ``(0, Lx) x (0, Ly)``.

    ``reactive_sides`` selects which sides of the box form the reactive
    boundary (where traces and boundary integrals live).  The default is the
    whole boundary; a subset is only used for symmetry-reduced runs.
    """

    extents: tuple[float, ...]
    nodes_per_axis: tuple[int, ...]
    reactive_sides: tuple[str, ...] = SIDES

    def __post_init__(self):
        if len(self.extents) not in (1, 2) or len(self.extents) != len(self.nodes_per_axis):
            raise ValueError("mesh must be 1D or 2D with one node count per axis")
        if any(n < 3 for n in self.nodes_per_axis):
            raise ValueError("nodes_per_axis must be >= 3 on every axis")
        if any(not L > 0 for L in self.extents):
            raise ValueError("extents must be positive")
        bad = set(self.reactive_sides) - set(SIDES)
        if bad:
            raise ValueError(f"unknown boundary sides {sorted(bad)}")
        object.__setattr__(self, "extents", tuple(float(L) for L in self.extents))
        object.__setattr__(self, "nodes_per_axis", tuple(int(n) for n in self.nodes_per_axis))

    @classmethod
    def interval(cls, length: float = 1.0, nodes: int = 129) -> "Mesh":
        return cls((length,), (nodes,), ("left", "right"))

    @classmethod
    def rectangle(cls, lx: float = 1.0, ly: float = 1.0, nx: int = 65, ny: int | None = None,
                  reactive_sides: tuple[str, ...] = SIDES) -> "Mesh":
        return cls((lx, ly), (nx, nx if ny is None else ny), tuple(reactive_sides))

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / (n - 1) for L, n in zip(self.extents, self.nodes_per_axis))

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(0.0, L, n) for L, n in zip(self.extents, self.nodes_per_axis))

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``(num_nodes, dimension)``."""
        if self.dimension == 1:
            return self.axes[0][:, None]
        X, Y = np.meshgrid(*self.axes, indexing="xy")
        return np.column_stack([X.ravel(), Y.ravel()])

    def grid(self, values: np.ndarray) -> np.ndarray:
        """Reshape nodal values to ``(ny, nx)`` in 2D (no-op in 1D)."""
        values = np.asarray(values)
        if self.dimension == 1:
            return values
        nx, ny = self.nodes_per_axis
        return values.reshape(ny, nx)

    @cached_property
    def _axis_weights(self) -> tuple[np.ndarray, ...]:
        out = []
        for h, n in zip(self.h, self.nodes_per_axis):
            w = np.full(n, h)
            w[0] = w[-1] = h / 2
            out.append(w)
        return tuple(out)

    @cached_property
    def volume_weights(self) -> np.ndarray:
        """Lumped mass per node; sums to ``|Omega|``."""
        if self.dimension == 1:
            return self._axis_weights[0].copy()
        wx, wy = self._axis_weights
        return np.outer(wy, wx).ravel()

    @cached_property
    def _boundary(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.num_nodes
        weights = np.zeros(n)
        if self.dimension == 1:
            if "left" in self.reactive_sides:
                weights[0] += 1.0
            if "right" in self.reactive_sides:
                weights[-1] += 1.0
        else:
            nx, ny = self.nodes_per_axis
            wx, wy = self._axis_weights
            idx = np.arange(n).reshape(ny, nx)
            edges = {
                "left": (idx[:, 0], wy),
                "right": (idx[:, -1], wy),
                "bottom": (idx[0, :], wx),
                "top": (idx[-1, :], wx),
            }
            for side in self.reactive_sides:
                nodes, w = edges[side]
                weights[nodes] += w
        nodes = np.flatnonzero(weights)
        return nodes, weights[nodes]

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self._boundary[0]

    @property
    def boundary_weights(self) -> np.ndarray:
        return self._boundary[1]

    @cached_property
    def outer_boundary_nodes(self) -> np.ndarray:
        """All nodes on the box boundary, regardless of ``reactive_sides``."""
        if self.dimension == 1:
            return np.array([0, self.num_nodes - 1])
        nx, ny = self.nodes_per_axis
        idx = np.arange(self.num_nodes).reshape(ny, nx)
        return np.unique(np.concatenate([idx[:, 0], idx[:, -1], idx[0, :], idx[-1, :]]))

    @cached_property
    def elements(self) -> np.ndarray:
        """Simplices as node index rows: segments in 1D, triangles in 2D."""
        if self.dimension == 1:
            n = self.num_nodes
            return np.column_stack([np.arange(n - 1), np.arange(1, n)])
        nx, ny = self.nodes_per_axis
        idx = np.arange(self.num_nodes).reshape(ny, nx)
        a = idx[:-1, :-1].ravel()  # (i, j)
        b = idx[:-1, 1:].ravel()  # (i+1, j)
        c = idx[1:, 1:].ravel()  # (i+1, j+1)
        d = idx[1:, :-1].ravel()  # (i, j+1)
        return np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])

    @cached_property
    def element_measure(self) -> float:
        """Length (1D) or area (2D) of every simplex; uniform by construction."""
        if self.dimension == 1:
            return self.h[0]
        return 0.5 * self.h[0] * self.h[1]

    @cached_property
    def element_gradient_operator(self) -> sp.csr_matrix:
        """Sparse map from nodal values to per-element constant gradients.

        Returns a ``(dimension * n_elements, num_nodes)`` matrix; component
        ``d`` of element ``e`` sits at row ``d * n_elements + e``.
        """
        el = self.elements
        ne = len(el)
        if self.dimension == 1:
            (h,) = self.h
            rows = np.repeat(np.arange(ne), 2)
            cols = el.ravel()
            vals = np.tile([-1.0 / h, 1.0 / h], ne)
            return sp.csr_matrix((vals, (rows, cols)), shape=(ne, self.num_nodes))
        hx, hy = self.h
        half = ne // 2
        lower, upper = el[:half], el[half:]
        rows, cols, vals = [], [], []
        e_lo = np.arange(half)
        e_up = np.arange(half, ne)
        # lower triangle (a, b, c): d/dx = (b - a)/hx, d/dy = (c - b)/hy
        for r, c, v in (
            (e_lo, lower[:, 0], -1 / hx), (e_lo, lower[:, 1], 1 / hx),
            (ne + e_lo, lower[:, 1], -1 / hy), (ne + e_lo, lower[:, 2], 1 / hy),
            # upper triangle (a, c, d): d/dx = (c - d)/hx, d/dy = (d - a)/hy
            (e_up, upper[:, 2], -1 / hx), (e_up, upper[:, 1], 1 / hx),
            (ne + e_up, upper[:, 0], -1 / hy), (ne + e_up, upper[:, 2], 1 / hy),
        ):
            rows.append(r)
            cols.append(c)
            vals.append(np.full(len(r), v))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * ne, self.num_nodes),
        )

    def element_gradients(self, u: np.ndarray) -> np.ndarray:
        """Constant gradient on each element, shape ``(n_elements, dimension)``."""
        g = self.element_gradient_operator @ np.asarray(u, dtype=float)
        return g.reshape(self.dimension, -1).T

    @cached_property
    def element_centroids(self) -> np.ndarray:
        return self.coordinates[self.elements].mean(axis=1)

    def descriptor(self) -> dict:
        return {
            "dimension": self.dimension,
            "extents": list(self.extents),
            "nodes_per_axis": list(self.nodes_per_axis),
            "reactive_sides": list(self.reactive_sides),
        }

    @classmethod
    def from_descriptor(cls, d: dict) -> "Mesh":
        return cls(tuple(d["extents"]), tuple(d["nodes_per_axis"]), tuple(d["reactive_sides"]))


def _stiffness_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0)
    main[0] = main[-1] = 1.0
    off = -np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h


@dataclass(frozen=True)
class FormSet:
    """Assembled bilinear forms on a mesh.

    ``stiffness`` is ``int grad u . grad xi``; ``mass`` and ``boundary_mass``
    are the lumped diagonals of ``int u xi`` and ``int_dOmega u xi``.
    """

    mesh: Mesh
    stiffness: sp.csr_matrix
    mass: np.ndarray
    boundary_mass: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def h1_matrix(self) -> sp.csr_matrix:
        if "h1" not in self._cache:
            self._cache["h1"] = (self.stiffness + sp.diags(self.mass)).tocsc()
        return self._cache["h1"]

    def h1_factor(self):
        if "h1_lu" not in self._cache:
            self._cache["h1_lu"] = spla.splu(self.h1_matrix)
        return self._cache["h1_lu"]

    def embed(self, u: np.ndarray) -> np.ndarray:
        """L2 embedding of a nodal field as a dual load vector."""
        return self.mass * np.asarray(u, dtype=float)


def assemble_forms(mesh: Mesh) -> FormSet:
    if mesh.dimension == 1:
        K = _stiffness_1d(mesh.nodes_per_axis[0], mesh.h[0])
    else:
        (nx, ny), (hx, hy) = mesh.nodes_per_axis, mesh.h
        wx, wy = mesh._axis_weights
        K = sp.kron(sp.diags(wy), _stiffness_1d(nx, hx)) + sp.kron(_stiffness_1d(ny, hy), sp.diags(wx))
        K = K.tocsr()
    Mb = np.zeros(mesh.num_nodes)
    Mb[mesh.boundary_nodes] = mesh.boundary_weights
    return FormSet(mesh, K, mesh.volume_weights.copy(), Mb)


def solve_spd(A, b: np.ndarray, method: str = "direct", rtol: float = 1e-12,
              factor=None) -> np.ndarray:
    """Solve a symmetric positive definite system.

    ``method`` is ``"direct"`` (sparse LU, optionally a prebuilt ``factor``),
    ``"cg"`` (Jacobi-preconditioned conjugate gradients to relative residual
    ``rtol``) or ``"dense"`` (LAPACK; reference path for small systems).
    """
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        return np.zeros_like(b)
    if method == "direct":
        x = factor.solve(b) if factor is not None else spla.spsolve(sp.csc_matrix(A), b)
    elif method == "cg":
        A = sp.csr_matrix(A)
        precond = sp.diags(1.0 / A.diagonal())
        x, info = spla.cg(A, b, rtol=rtol, atol=0.0, maxiter=20 * A.shape[0], M=precond)
        if info != 0:
            res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
            raise SolverError("conjugate gradients did not converge", res)
    elif method == "dense":
        if A.shape[0] > 2000:
            raise ValueError("dense solves are limited to 2000 unknowns")
        A = A.toarray() if sp.issparse(A) else np.asarray(A)
        x = np.linalg.solve(A, b)
    else:
        raise ValueError(f"unknown solve method {method!r}")
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite values")
    return x


def riesz_solve(forms: FormSet, load: np.ndarray, method: str = "direct") -> np.ndarray:
    """Riesz representative ``r`` of a dual load: ``(M + K) r = load``."""
    factor = forms.h1_factor() if method == "direct" else None
    return solve_spd(forms.h1_matrix, load, method=method, factor=factor)


def h1_dual_norm(forms: FormSet, load: np.ndarray, method: str = "direct") -> float:
    r = riesz_solve(forms, load, method=method)
    return float(np.sqrt(max(np.dot(load, r), 0.0)))


def h1_norm(forms: FormSet, u: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.sqrt(u @ (forms.h1_matrix @ u)))


def boundary_trace(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=float)[mesh.boundary_nodes]


def integrate_boundary(mesh: Mesh, g: np.ndarray) -> float:
    return float(np.dot(mesh.boundary_weights, g))


def integrate(mesh: Mesh, u: np.ndarray) -> float:
    """Lumped volume integral of a nodal field."""
    return float(np.dot(mesh.volume_weights, u))
