"""
Mesh-quality and embeddedness heuristics: separation between
non-adjacent triangles, minimum angles and the shortest handle loop.
"""

from __future__ import annotations

import logging
import math
from typing import Iterable, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra, minimum_spanning_tree
from scipy.spatial import cKDTree

from app.domain.errors import TopologyError
from app.mesh.trimesh import TriMesh

logger = logging.getLogger(__name__)

# barycentric sample patterns, smallest first
_PATTERNS = (
    np.array([[1 / 3, 1 / 3, 1 / 3]]),
    np.array([[1 / 3, 1 / 3, 1 / 3], [2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
    np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [1, 0, 0], [0, 1, 0], [0, 0, 1],
        [0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5],
    ]),
    np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [1, 0, 0], [0, 1, 0], [0, 0, 1],
        [0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5],
        [2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3],
    ]),
)


def min_separation_diagnostic(mesh: TriMesh, sample_budget: int = 200_000, neighbours: int = 24) -> float:
    """
    Approximate minimum chordal distance between triangles that share no
    vertex. Triangles are sampled at fixed barycentric points, bucketed in
    a KD-tree and compared against their nearest samples.
    """
    F = mesh.faces
    if len(F) < 2:
        return math.inf
    pattern = _PATTERNS[0]
    for candidate in _PATTERNS:
        if len(F) * len(candidate) <= sample_budget:
            pattern = candidate
    tri = mesh.vertices[F]  # (F, 3, 4)
    samples = np.einsum("sc,fcd->fsd", pattern, tri).reshape(-1, 4)
    owner = np.repeat(np.arange(len(F)), len(pattern))

    k = min(neighbours + 1, len(samples))
    dist, idx = cKDTree(samples).query(samples, k=k)
    dist, idx = dist[:, 1:], idx[:, 1:]
    fa = F[owner][:, None, :, None]  # (S, 1, 3, 1)
    fb = F[owner[idx]][:, :, None, :]  # (S, K, 1, 3)
    adjacent = np.any(fa == fb, axis=(2, 3))
    dist = np.where(adjacent, np.inf, dist)
    return float(dist.min(initial=math.inf))


def triangle_angles(mesh: TriMesh) -> np.ndarray:
    """(F, 3) interior angles in radians."""
    X = mesh.vertices[mesh.faces]
    angles = np.empty((len(X), 3))
    for c in range(3):
        u = X[:, (c + 1) % 3] - X[:, c]
        v = X[:, (c + 2) % 3] - X[:, c]
        cos = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles[:, c] = np.arccos(np.clip(cos, -1.0, 1.0))
    return angles


def min_angle_degrees(mesh: TriMesh) -> float:
    return float(np.degrees(triangle_angles(mesh).min(initial=math.pi)))


def min_edge_length(mesh: TriMesh) -> float:
    return float(mesh.edge_lengths().min(initial=math.inf))


# ==============================================================
# HANDLE LOOPS
# ==============================================================

def _handle_loop_lengths(mesh: TriMesh, seed: int, lengths: np.ndarray) -> np.ndarray:
    topo = mesh.topology
    edges = topo.edges
    n_v = mesh.n_vertices
    graph = coo_matrix(
        (np.concatenate([lengths, lengths]), (np.concatenate([edges[:, 0], edges[:, 1]]), np.concatenate([edges[:, 1], edges[:, 0]]))),
        shape=(n_v, n_v),
    ).tocsr()
    dist, pred = dijkstra(graph, directed=False, indices=seed, return_predecessors=True)

    # shortest-path tree edges
    child = np.flatnonzero(pred >= 0)
    tree_pairs = np.sort(np.stack([child, pred[child]], axis=1), axis=1)
    edge_keys = edges[:, 0] * n_v + edges[:, 1]
    in_tree = np.isin(edge_keys, tree_pairs[:, 0] * n_v + tree_pairs[:, 1])

    loop_len = dist[edges[:, 0]] + dist[edges[:, 1]] + lengths
    candidates = np.flatnonzero(~in_tree)
    if len(candidates) == 0:
        return np.array([])

    # maximum spanning cotree of the dual graph on non-tree edges
    f0 = topo.edge_faces[candidates, 0]
    f1 = topo.edge_faces[candidates, 1]
    weight = (loop_len[candidates].max() + 1.0) - loop_len[candidates]
    n_f = mesh.n_faces
    lo, hi = np.minimum(f0, f1), np.maximum(f0, f1)
    dual = coo_matrix((weight, (lo, hi)), shape=(n_f, n_f)).tocsr()
    cotree = minimum_spanning_tree(dual).tocoo()
    cotree_keys = np.minimum(cotree.row, cotree.col) * n_f + np.maximum(cotree.row, cotree.col)
    in_cotree = np.isin(lo * n_f + hi, cotree_keys)
    leftover = candidates[~in_cotree]
    return loop_len[leftover]


def shortest_handle_loop(mesh: TriMesh, seeds: Optional[Iterable[int]] = None, n_seeds: int = 4) -> float:
    """
    Length of the shortest loop of the tree-cotree generator system over
    a few seed vertices; +inf on a sphere.
    """
    if not mesh.is_closed:
        raise TopologyError("handle loops need a closed mesh")
    lengths = mesh.edge_lengths()
    if seeds is None:
        seeds = np.linspace(0, mesh.n_vertices - 1, num=max(1, n_seeds), dtype=np.int64)
    best = math.inf
    for seed in np.unique(np.asarray(list(seeds), dtype=np.int64)):
        loops = _handle_loop_lengths(mesh, int(seed), lengths)
        if len(loops):
            best = min(best, float(loops.min()))
    return best
