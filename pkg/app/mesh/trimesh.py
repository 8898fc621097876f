"""
Triangle meshes with vertices on S^3 and their combinatorial topology.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from app.domain.errors import OrientationError, PreconditionError, TopologyError
from app.geometry.symmetry import SymmetryGroup

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-10


@dataclass(frozen=True)
class OrbitMap:
    """images[v, c] is the vertex index of elements[c] applied to vertex v."""

    group: SymmetryGroup
    images: np.ndarray

    def matches(self, group: SymmetryGroup) -> bool:
        return self.group is group or (
            self.group.name == group.name
            and self.group.order == group.order
            and self.group.keys() == group.keys()
        )


@dataclass(frozen=True)
class EdgeTopology:
    edges: np.ndarray  # (E, 2) sorted vertex pairs
    face_edges: np.ndarray  # (F, 3) edge opposite each corner
    edge_faces: np.ndarray  # (E, 2) incident faces, -1 when missing
    edge_face_count: np.ndarray  # (E,)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_face_count == 1)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_face_count == 2)


def edge_topology(faces: np.ndarray) -> EdgeTopology:
    faces = np.asarray(faces, dtype=np.int64)
    n_faces = len(faces)
    # corner c is opposite the edge (c+1, c+2)
    half = np.stack(
        [faces[:, [1, 2]], faces[:, [2, 0]], faces[:, [0, 1]]], axis=1
    ).reshape(-1, 2)
    keyed = np.sort(half, axis=1)
    edges, inverse, counts = np.unique(keyed, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    face_edges = inverse.reshape(n_faces, 3)

    edge_faces = np.full((len(edges), 2), -1, dtype=np.int64)
    face_ids = np.repeat(np.arange(n_faces), 3)
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_faces[sorted_edges[first], 0] = face_ids[order[first]]
    second = ~first
    edge_faces[sorted_edges[second], 1] = face_ids[order[second]]
    return EdgeTopology(edges, face_edges, edge_faces, counts)


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    boundary_flags: Optional[np.ndarray] = None
    orbit_map: Optional[OrbitMap] = None
    name: str = ""

    def __post_init__(self) -> None:
        V = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 4)
        F = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "faces", F)
        if len(F) and (F.min() < 0 or F.max() >= len(V)):
            raise PreconditionError("face references a missing vertex", {"n_vertices": len(V)})
        degenerate = (F[:, 0] == F[:, 1]) | (F[:, 1] == F[:, 2]) | (F[:, 2] == F[:, 0])
        if np.any(degenerate):
            raise PreconditionError("degenerate face", {"face": int(np.flatnonzero(degenerate)[0])})
        if self.boundary_flags is None:
            flags = np.zeros(len(V), dtype=bool)
            if len(F):
                topo = self.topology
                flags[topo.edges[topo.boundary_edges].ravel()] = True
            object.__setattr__(self, "boundary_flags", flags)
        else:
            object.__setattr__(self, "boundary_flags", np.asarray(self.boundary_flags, dtype=bool).reshape(-1))

    # ---------------- construction ----------------

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        return replace(self, vertices=np.asarray(vertices, dtype=np.float64))

    def with_orbit_map(self, orbit_map: Optional[OrbitMap]) -> "TriMesh":
        return replace(self, orbit_map=orbit_map)

    def transformed(self, matrix: np.ndarray, name: str = "") -> "TriMesh":
        """Image under an ambient orthogonal map; the orbit map is dropped."""
        return TriMesh(self.vertices @ np.asarray(matrix).T, self.faces, self.boundary_flags, None, name or self.name)

    # ---------------- counts ----------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def topology(self) -> EdgeTopology:
        return edge_topology(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.topology.edges)

    @property
    def is_closed(self) -> bool:
        return self.n_faces > 0 and len(self.topology.boundary_edges) == 0

    def edge_lengths(self) -> np.ndarray:
        e = self.topology.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def mean_edge_length(self) -> float:
        return float(np.mean(self.edge_lengths()))

    # ---------------- validation ----------------

    def validate(self) -> None:
        norms = np.linalg.norm(self.vertices, axis=1)
        if len(norms) and np.max(np.abs(norms - 1.0)) > UNIT_TOL:
            raise PreconditionError("vertex off the unit sphere", {"max_deviation": float(np.max(np.abs(norms - 1.0)))})
        counts = self.topology.edge_face_count
        if np.any(counts > 2):
            bad = int(np.flatnonzero(counts > 2)[0])
            raise TopologyError("non-manifold edge", {"edge": self.topology.edges[bad].tolist(), "faces": int(counts[bad])})


# ==============================================================
# TOPOLOGY
# ==============================================================

def euler_characteristic(mesh: TriMesh) -> int:
    used = np.unique(mesh.faces)
    return int(len(used) - mesh.n_edges + mesh.n_faces)


def vertex_components(mesh: TriMesh) -> int:
    e = mesh.topology.edges
    n = mesh.n_vertices
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    used = np.zeros(n, dtype=bool)
    used[mesh.faces.ravel()] = True
    _, labels = connected_components(adj, directed=False)
    return len(np.unique(labels[used]))


def _dual_graph(mesh: TriMesh, weights: np.ndarray):
    topo = mesh.topology
    inner = topo.interior_edges
    f0, f1 = topo.edge_faces[inner, 0], topo.edge_faces[inner, 1]
    n = mesh.n_faces
    return coo_matrix(
        (np.concatenate([weights, weights]), (np.concatenate([f0, f1]), np.concatenate([f1, f0]))),
        shape=(n, n),
    ).tocsr()


def orientation_flips(mesh: TriMesh) -> np.ndarray:
    """
    Per-face flip flags making the orientation consistent across every
    interior edge. Raises OrientationError when no such choice exists.
    """
    topo = mesh.topology
    F = mesh.faces
    inner = topo.interior_edges
    f0, f1 = topo.edge_faces[inner, 0], topo.edge_faces[inner, 1]
    u = topo.edges[inner, 0]

    def forward(faces_idx: np.ndarray) -> np.ndarray:
        # True if the face traverses the sorted edge (u, v) as u -> v
        tri = F[faces_idx]
        pos_u = np.argmax(tri == u[:, None], axis=1)
        nxt = tri[np.arange(len(tri)), (pos_u + 1) % 3]
        return nxt == topo.edges[inner, 1]

    # same direction on a shared edge means one of the two must flip
    rel = (forward(f0) == forward(f1)).astype(np.int64)
    if topo.edge_face_count.size and np.any(topo.edge_face_count > 2):
        raise OrientationError("cannot orient a non-manifold mesh")

    dual = _dual_graph(mesh, rel + 1)
    n_comp, labels = connected_components(dual, directed=False)
    flips = np.zeros(mesh.n_faces, dtype=np.int64)
    for comp in range(n_comp):
        root = int(np.flatnonzero(labels == comp)[0])
        order, pred = breadth_first_order(dual, root, directed=False, return_predecessors=True)
        if len(order) > 1:
            children = order[1:]
            tree_rel = np.asarray(dual[pred[children], children]).ravel().astype(np.int64) - 1
            rel_of = dict(zip(children.tolist(), tree_rel.tolist()))
            for child in children.tolist():
                flips[child] = flips[pred[child]] ^ rel_of[child]

    bad = (flips[f0] ^ flips[f1]) != rel
    if np.any(bad):
        e = int(inner[np.flatnonzero(bad)[0]])
        raise OrientationError("surface is not orientable", {"edge": topo.edges[e].tolist()})
    return flips.astype(bool)


def orient(mesh: TriMesh) -> TriMesh:
    flips = orientation_flips(mesh)
    if not np.any(flips):
        return mesh
    faces = mesh.faces.copy()
    faces[flips] = faces[flips][:, [0, 2, 1]]
    logger.debug("Flipped %d of %d faces for a consistent orientation", int(flips.sum()), mesh.n_faces)
    return TriMesh(mesh.vertices, faces, mesh.boundary_flags, mesh.orbit_map, mesh.name)


def is_orientable(mesh: TriMesh) -> bool:
    try:
        orientation_flips(mesh)
    except OrientationError:
        return False
    return True


def genus(mesh: TriMesh) -> int:
    if not mesh.is_closed:
        raise TopologyError("genus needs a closed mesh", {"boundary_edges": int(len(mesh.topology.boundary_edges))})
    components = vertex_components(mesh)
    if components != 1:
        raise TopologyError("genus needs a connected mesh", {"components": components})
    if not is_orientable(mesh):
        raise TopologyError("genus needs an orientable mesh")
    chi = euler_characteristic(mesh)
    if chi % 2:
        raise TopologyError("odd Euler characteristic on a closed orientable mesh", {"chi": chi})
    return (2 - chi) // 2


def boundary_loops(mesh: TriMesh) -> List[np.ndarray]:
    """Boundary cycles as ordered vertex index arrays."""
    topo = mesh.topology
    b = topo.boundary_edges
    if len(b) == 0:
        return []
    nxt = {}
    for e in b.tolist():
        face = mesh.faces[topo.edge_faces[e, 0]]
        a, c = topo.edges[e]
        pos = int(np.flatnonzero(face == a)[0])
        if face[(pos + 1) % 3] == c:
            nxt[int(a)] = int(c)
        else:
            nxt[int(c)] = int(a)
    loops = []
    remaining = set(nxt)
    while remaining:
        start = min(remaining)
        loop = [start]
        remaining.discard(start)
        cur = nxt[start]
        while cur != start:
            loop.append(cur)
            remaining.discard(cur)
            cur = nxt[cur]
        loops.append(np.array(loop, dtype=np.int64))
    return loops
