"""
Reference meshes with known area and curvature.
"""

from __future__ import annotations

import math

import numpy as np

from app.domain.errors import PreconditionError
from app.geometry.s3 import from_complex
from app.mesh.operations import refine
from app.mesh.trimesh import TriMesh


def grid_faces(n_u: int, n_v: int, periodic_u: bool = False, periodic_v: bool = False) -> np.ndarray:
    """
    Triangulated grid; vertex (i, j) has index j * n_u + i. Every square is
    split along its (i, j)-(i+1, j+1) diagonal.
    """
    cells_u = n_u if periodic_u else n_u - 1
    cells_v = n_v if periodic_v else n_v - 1
    i, j = np.meshgrid(np.arange(cells_u), np.arange(cells_v), indexing="xy")
    i, j = i.ravel(), j.ravel()
    i1 = (i + 1) % n_u
    j1 = (j + 1) % n_v
    a = j * n_u + i
    b = j * n_u + i1
    c = j1 * n_u + i1
    d = j1 * n_u + i
    return np.vstack([np.stack([a, b, c], axis=1), np.stack([a, c, d], axis=1)])


def octahedron_sphere(level: int = 0) -> TriMesh:
    """Great sphere {x4 = 0} from a refined octahedron."""
    if level < 0:
        raise PreconditionError("refinement level must be non-negative", {"level": level})
    V = np.array([
        [1, 0, 0, 0], [-1, 0, 0, 0],
        [0, 1, 0, 0], [0, -1, 0, 0],
        [0, 0, 1, 0], [0, 0, -1, 0],
    ], dtype=np.float64)
    F = np.array([
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ], dtype=np.int64)
    mesh = TriMesh(V, F, np.zeros(6, dtype=bool), name="great_sphere")
    for _ in range(level):
        mesh = refine(mesh)
    return mesh


def geodesic_sphere(radius: float, level: int = 4) -> TriMesh:
    """Sphere of geodesic radius r about (0, 0, 0, 1)."""
    if not (0.0 < radius < math.pi):
        raise PreconditionError("geodesic radius must lie in (0, pi)", {"radius": radius})
    base = octahedron_sphere(level)
    xyz = base.vertices[:, :3]
    V = np.column_stack([math.sin(radius) * xyz, np.full(len(xyz), math.cos(radius))])
    return TriMesh(V, base.faces, base.boundary_flags, name=f"geodesic_sphere_r{radius:.4f}")


def torus_grid(n_u: int, n_v: int, r1: float = math.pi / 4) -> TriMesh:
    """
    Flat torus (cos r1 e^{i theta}, sin r1 e^{i phi}) sampled on an
    n_u x n_v periodic grid.
    """
    if n_u < 3 or n_v < 3:
        raise PreconditionError("torus grid needs at least 3 samples per direction", {"n_u": n_u, "n_v": n_v})
    theta = 2.0 * math.pi * np.arange(n_u) / n_u
    phi = 2.0 * math.pi * np.arange(n_v) / n_v
    T, P = np.meshgrid(theta, phi, indexing="xy")
    V = from_complex(math.cos(r1) * np.exp(1j * T.ravel()), math.sin(r1) * np.exp(1j * P.ravel()))
    F = grid_faces(n_u, n_v, periodic_u=True, periodic_v=True)
    return TriMesh(V, F, np.zeros(len(V), dtype=bool), name=f"torus_{n_u}x{n_v}")


def clifford_torus(n: int) -> TriMesh:
    return torus_grid(n, n, math.pi / 4)
