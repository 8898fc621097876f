"""
Discrete area, mean curvature and Willmore energy of meshes on S^3.

W = area + sum_i H_i^2 A_i, where H_i is the mean curvature inside S^3
taken from the cotangent Laplacian of the R^4 position along the vertex
normal, and A_i is the mixed Voronoi cell area.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from app.domain.errors import MeshQualityError, PreconditionError
from app.energy import kernels
from app.geometry.s3 import tangent_project
from app.mesh.trimesh import TriMesh

logger = logging.getLogger(__name__)

FD_STEP_FACTOR = 1e-5


@dataclass
class EnergyReport:
    area: float
    willmore: float
    mean_curvature: np.ndarray = field(repr=False)
    gradient_norm: Optional[float] = None

    @property
    def max_abs_curvature(self) -> float:
        return float(np.max(np.abs(self.mean_curvature), initial=0.0))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("mean_curvature")
        data["max_abs_curvature"] = self.max_abs_curvature
        return data


# ==============================================================
# VALUES
# ==============================================================

def area_value(X: np.ndarray, F: np.ndarray) -> float:
    if len(F) == 0:
        return 0.0
    return float(kernels.area_value(np, X, F))


def willmore_value(X: np.ndarray, F: np.ndarray) -> float:
    return float(kernels.willmore_value(np, X, F))


def area(mesh: TriMesh) -> float:
    return area_value(mesh.vertices, mesh.faces)


def vertex_areas(mesh: TriMesh) -> np.ndarray:
    geo = kernels.face_geometry(np, mesh.vertices, mesh.faces)
    return kernels.vertex_areas(np, mesh.vertices, mesh.faces, geo)


def _require_closed(mesh: TriMesh, what: str) -> None:
    if not mesh.is_closed:
        raise PreconditionError(f"{what} needs a closed mesh", {"mesh": mesh.name})


def mean_curvature(mesh: TriMesh, allow_boundary: bool = False) -> np.ndarray:
    """Per-vertex H inside S^3. Values on boundary vertices are not meaningful."""
    if not allow_boundary:
        _require_closed(mesh, "mean_curvature")
    H, cells, _ = kernels.mean_curvature(np, mesh.vertices, mesh.faces)
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.faces.ravel()] = True
    if np.any(cells[used] <= 0.0):
        v = int(np.flatnonzero(used & (cells <= 0.0))[0])
        raise MeshQualityError("zero-area vertex cell", {"vertex": v})
    return H


def willmore(mesh: TriMesh, with_gradient: bool = False) -> EnergyReport:
    _require_closed(mesh, "willmore")
    H = mean_curvature(mesh)
    cells = vertex_areas(mesh)
    total_area = area(mesh)
    report = EnergyReport(
        area=total_area,
        willmore=float(total_area + np.sum(H * H * cells)),
        mean_curvature=H,
    )
    if with_gradient:
        g = willmore_gradient(mesh)
        report.gradient_norm = float(np.sqrt(np.sum(np.sum(g * g, axis=1) / cells)))
    return report


# ==============================================================
# GRADIENTS
# ==============================================================

def area_gradient(mesh: TriMesh) -> np.ndarray:
    """Tangential area gradient, one R^4 row per vertex."""
    X, F = mesh.vertices, mesh.faces
    geo = kernels.face_geometry(np, X, F)
    return tangent_project(X, kernels.area_gradient_raw(np, X, F, geo))


def cotan_stiffness(mesh: TriMesh) -> csr_matrix:
    """L with (L X)_i equal to the R^4 area gradient at vertex i."""
    X, F = mesh.vertices, mesh.faces
    geo = kernels.face_geometry(np, X, F)
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    # edge opposite corner c joins corners c+1 and c+2
    for c in range(3):
        i = F[:, (c + 1) % 3]
        j = F[:, (c + 2) % 3]
        w = 0.5 * geo.cot[:, c]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    L = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return L.tocsr()


def willmore_gradient_fd(X: np.ndarray, F: np.ndarray, step: Optional[float] = None) -> np.ndarray:
    """Centred finite differences of the discrete energy, coordinate by coordinate."""
    if step is None:
        e = np.concatenate([X[F[:, 0]] - X[F[:, 1]], X[F[:, 1]] - X[F[:, 2]], X[F[:, 2]] - X[F[:, 0]]])
        step = FD_STEP_FACTOR * float(np.mean(np.linalg.norm(e, axis=1)))
    grad = np.zeros_like(X)
    Y = X.copy()
    for v in range(X.shape[0]):
        for d in range(4):
            Y[v, d] = X[v, d] + step
            w_plus = willmore_value(Y, F)
            Y[v, d] = X[v, d] - step
            w_minus = willmore_value(Y, F)
            Y[v, d] = X[v, d]
            grad[v, d] = (w_plus - w_minus) / (2.0 * step)
    return grad


def willmore_gradient(mesh: TriMesh, mode: str = "auto") -> np.ndarray:
    """
    Tangential gradient of the discrete Willmore energy. ``auto`` uses
    exact differentiation when JAX is available and finite differences
    otherwise.
    """
    X, F = mesh.vertices, mesh.faces
    if mode not in ("auto", "autodiff", "fd"):
        raise PreconditionError(f"unknown gradient mode {mode!r}")
    if mode in ("auto", "autodiff"):
        try:
            from app.energy import autodiff
        except ImportError:
            if mode == "autodiff":
                raise
            logger.warning("JAX unavailable; falling back to finite-difference Willmore gradient")
        else:
            return tangent_project(X, autodiff.willmore_gradient_raw(X, F))
    return tangent_project(X, willmore_gradient_fd(X, F))
