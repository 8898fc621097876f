"""
Mesh constructions: midpoint refinement, group-orbit replication with
welding, orbit maps and symmetrization.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from app.config.settings import settings
from app.domain.errors import MissingOrbitMapError, PreconditionError, TopologyError, WeldError
from app.geometry.s3 import normalize_rows
from app.geometry.symmetry import Isometry, SymmetryGroup
from app.mesh.trimesh import OrbitMap, TriMesh, orient

logger = logging.getLogger(__name__)

ORBIT_MATCH_TOL = 1e-6


# ==============================================================
# REFINEMENT
# ==============================================================

def refine(mesh: TriMesh) -> TriMesh:
    """
    1-to-4 midpoint subdivision. Chord midpoints are pushed back to S^3;
    on a geodesic boundary arc this is the arc midpoint.
    """
    topo = mesh.topology
    if np.any(topo.edge_face_count > 2):
        raise TopologyError("refine needs an edge-manifold mesh")
    V, F = mesh.vertices, mesh.faces
    n_v = len(V)
    e = topo.edges
    mids = normalize_rows(V[e[:, 0]] + V[e[:, 1]])
    vertices = np.vstack([V, mids])

    a, b, c = F[:, 0], F[:, 1], F[:, 2]
    # face_edges[:, i] is the edge opposite corner i
    bc = n_v + topo.face_edges[:, 0]
    ca = n_v + topo.face_edges[:, 1]
    ab = n_v + topo.face_edges[:, 2]
    faces = np.vstack([
        np.stack([a, ab, ca], axis=1),
        np.stack([b, bc, ab], axis=1),
        np.stack([c, ca, bc], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])

    flags = np.concatenate([mesh.boundary_flags, topo.edge_face_count == 1])
    return TriMesh(vertices, faces, flags, None, mesh.name)


# ==============================================================
# WELDING AND ORBITS
# ==============================================================

def weld(vertices: np.ndarray, faces: np.ndarray, weld_tol: float) -> TriMesh:
    """Identify vertices closer than weld_tol (chordal)."""
    n = len(vertices)
    tree = cKDTree(vertices)
    pairs = tree.query_pairs(r=weld_tol, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)

    # renumber clusters by first occurrence
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(len(order), dtype=np.int64)
    remap[order] = np.arange(len(order))
    cluster = remap[labels]

    sums = np.zeros((len(order), 4))
    np.add.at(sums, cluster, vertices)
    welded = normalize_rows(sums)

    new_faces = cluster[faces]
    degenerate = (new_faces[:, 0] == new_faces[:, 1]) | (new_faces[:, 1] == new_faces[:, 2]) | (new_faces[:, 0] == new_faces[:, 2])
    if np.any(degenerate):
        f = int(np.flatnonzero(degenerate)[0])
        raise WeldError("welding collapsed a face", {"face": new_faces[f].tolist(), "weld_tol": weld_tol})

    # duplicate faces (same triangle from two copies) make non-manifold edges below
    mesh = TriMesh(welded, new_faces, None, None)
    counts = mesh.topology.edge_face_count
    if np.any(counts > 2):
        bad = int(np.flatnonzero(counts > 2)[0])
        edge = mesh.topology.edges[bad]
        raise WeldError(
            "welding produced a non-manifold edge",
            {"edge": edge.tolist(), "faces": int(counts[bad]), "endpoints": welded[edge].tolist()},
        )
    return mesh


def orbit_mesh(
    patch: TriMesh,
    group: SymmetryGroup,
    weld_tol: Optional[float] = None,
    workers: Optional[int] = None,
) -> TriMesh:
    """Union of g(patch) over the group, welded and consistently oriented."""
    weld_tol = settings.WELD_TOL if weld_tol is None else weld_tol
    workers = settings.WORKER_THREADS if workers is None else workers
    if np.any(patch.topology.edge_face_count > 2):
        raise PreconditionError("orbit_mesh needs an edge-manifold patch")

    with ThreadPoolExecutor(max_workers=workers) as pool:
        copies = list(pool.map(lambda g: g.apply(patch.vertices), group.elements))
    n_v = patch.n_vertices
    vertices = np.vstack(copies)
    faces = np.vstack([patch.faces + i * n_v for i in range(group.order)])

    mesh = weld(vertices, faces, weld_tol)
    mesh = orient(mesh)
    logger.info(
        "Orbit of %d-vertex patch under %s (order %d): %d vertices, %d faces",
        n_v, group.name, group.order, mesh.n_vertices, mesh.n_faces,
    )
    return mesh.with_orbit_map(compute_orbit_map(mesh, group))


def compute_orbit_map(mesh: TriMesh, group: SymmetryGroup, tol: float = ORBIT_MATCH_TOL) -> OrbitMap:
    """Match g(x_v) to mesh vertices for every group element."""
    tree = cKDTree(mesh.vertices)
    images = np.empty((mesh.n_vertices, group.order), dtype=np.int64)
    worst = 0.0
    for c, g in enumerate(group.elements):
        dist, idx = tree.query(g.apply(mesh.vertices))
        worst = max(worst, float(dist.max(initial=0.0)))
        images[:, c] = idx
    if worst > tol:
        raise MissingOrbitMapError(
            "mesh vertex set is not invariant under the group",
            {"group": group.name, "max_mismatch": worst, "tol": tol},
        )
    return OrbitMap(group, images)


def _require_orbit_map(mesh: TriMesh, group: SymmetryGroup) -> OrbitMap:
    if mesh.orbit_map is None or not mesh.orbit_map.matches(group):
        raise MissingOrbitMapError(f"mesh has no orbit map for group {group.name}")
    return mesh.orbit_map


def symmetrize(mesh: TriMesh, group: SymmetryGroup) -> TriMesh:
    """Replace each vertex by the projected mean of g^-1 x_{g(v)} over the group."""
    orbit = _require_orbit_map(mesh, group)
    X = mesh.vertices
    # rows: g^-1 y = y @ M
    pulled = np.einsum("vgi,gij->vj", X[orbit.images], group.matrices) / group.order
    return mesh.with_vertices(normalize_rows(pulled))


def symmetry_deviation(mesh: TriMesh, group: SymmetryGroup) -> float:
    """max over g, v of |x_{g(v)} - g x_v|."""
    orbit = _require_orbit_map(mesh, group)
    X = mesh.vertices
    moved = np.einsum("gij,vj->vgi", group.matrices, X)
    return float(np.max(np.linalg.norm(X[orbit.images] - moved, axis=2), initial=0.0))


def isometry_deviation(mesh: TriMesh, g: Isometry) -> float:
    """Distance from the vertex set to its image under g (nearest-vertex matching)."""
    dist, _ = cKDTree(mesh.vertices).query(g.apply(mesh.vertices))
    return float(dist.max(initial=0.0))


def invariance_deviation(mesh: TriMesh, group: SymmetryGroup) -> float:
    """max over generators g and vertices v of the distance from g x_v to the mesh vertices."""
    return max((isometry_deviation(mesh, g) for g in group.generators or group.elements), default=0.0)
