"""Initial concentrations: constants and optimal-profile droplets."""
from __future__ import annotations

import numpy as np

from .mesh import Mesh

SQRT2 = np.sqrt(2.0)


def optimal_profile(signed_distance: np.ndarray, epsilon: float) -> np.ndarray:
    """Heteroclinic of the quartic well: ``1 / (1 + exp(-sqrt(2) d / epsilon))``.

    ``d`` is positive inside the ``c = 1`` phase.
    """
    z = -SQRT2 * np.asarray(signed_distance, dtype=float) / epsilon
    return 0.5 * (1.0 - np.tanh(0.5 * z))


def constant(mesh: Mesh, value: float) -> np.ndarray:
    return np.full(mesh.num_nodes, float(value))


def front(mesh: Mesh, x0: float, epsilon: float, phase_one_right: bool = True) -> np.ndarray:
    """Single planar interface at ``x = x0`` (1D, or along x in 2D)."""
    x = mesh.coordinates[:, 0]
    d = (x - x0) if phase_one_right else (x0 - x)
    return optimal_profile(d, epsilon)


def interval_droplet(mesh: Mesh, a: float, b: float, epsilon: float) -> np.ndarray:
    """Mollified indicator of ``[a, b]`` along x (product of two fronts, so smooth)."""
    x = mesh.coordinates[:, 0]
    return optimal_profile(x - a, epsilon) * optimal_profile(b - x, epsilon)


def disk_droplet(mesh: Mesh, center: tuple[float, float], radius: float, epsilon: float) -> np.ndarray:
    """Mollified indicator of a disk (2D meshes)."""
    if mesh.dimension != 2:
        raise ValueError("disk droplets need a 2D mesh")
    r = np.hypot(*(mesh.coordinates - np.asarray(center)).T)
    return optimal_profile(radius - r, epsilon)
