"""
Discrete Plateau problem: least-area disk spanning a geodesic
quadrilateral, by projected and preconditioned gradient descent on the
interior vertices with the boundary pinned.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy.sparse import coo_matrix, diags
from scipy.sparse.linalg import splu

from app.domain.errors import PreconditionError
from app.energy import kernels
from app.energy.discrete import area_value, cotan_stiffness, mean_curvature
from app.geometry.s3 import normalize_rows, tangent_project
from app.geometry.tiling import Quadrilateral, Tile, dual_quadrilateral, quadrilateral, tile_membership
from app.mesh.primitives import grid_faces
from app.mesh.trimesh import TriMesh
from app.solvers.linesearch import ArmijoBacktracking, StepControl

logger = logging.getLogger(__name__)

PRECISION_FLOOR = 1e-14
UNIQUENESS_GAP = 2e-3


class PlateauMetric(str, Enum):
    H1 = "h1"
    L2 = "l2"


class InitScheme(str, Enum):
    COONS = "coons"
    BARYCENTRIC = "barycentric"


@dataclass(frozen=True)
class PlateauProblem:
    quad: Quadrilateral
    tile: Optional[Tile]
    n: int
    tolerance: float = 1e-3
    max_iters: int = 2000
    metric: PlateauMetric = PlateauMetric.H1
    control: StepControl = field(default_factory=StepControl)
    log_every: int = 50

    def __post_init__(self) -> None:
        if self.n < 2:
            raise PreconditionError("Plateau resolution must be at least 2", {"n": self.n})
        if self.tolerance <= 0.0:
            raise PreconditionError("tolerance must be positive", {"tolerance": self.tolerance})
        if self.max_iters < 1:
            raise PreconditionError("max_iters must be positive", {"max_iters": self.max_iters})
        object.__setattr__(self, "metric", PlateauMetric(self.metric))


def plateau_problem(j: int, l: int, m: int, k: int, n: int, dual: bool = False, **options) -> PlateauProblem:
    quad = dual_quadrilateral(j, l, m, k) if dual else quadrilateral(j, l, m, k)
    tile = None if dual else Tile(j, l, m, k)
    return PlateauProblem(quad=quad, tile=tile, n=n, **options)


@dataclass
class PlateauSolution:
    mesh: TriMesh
    area: float
    init_area: float
    iterations: int
    converged: bool
    gradient_norm: float
    history: List[float] = field(repr=False, default_factory=list)

    @property
    def center_index(self) -> int:
        """Index of the grid centre vertex (n even)."""
        side = int(round(math.sqrt(self.mesh.n_vertices)))
        half = (side - 1) // 2
        return half * side + half


# ==============================================================
# INITIALISATION
# ==============================================================

def _boundary_curves(problem: PlateauProblem):
    s = np.linspace(0.0, 1.0, problem.n + 1)
    arcs = problem.quad.arcs
    bottom = arcs[0].points(s)
    right = arcs[1].points(s)
    top = arcs[2].points(s)[::-1]
    left = arcs[3].points(s)[::-1]
    return s, bottom, right, top, left


def init_disk(problem: PlateauProblem, scheme: InitScheme = InitScheme.COONS) -> TriMesh:
    """
    Coons blend of the four boundary arcs on an (n+1) x (n+1) grid,
    pushed to S^3. Corner (0, 0) is the first quad vertex, (1, 0) the
    second, (1, 1) the third and (0, 1) the fourth.
    """
    n = problem.n
    s, bottom, right, top, left = _boundary_curves(problem)
    U, W = np.meshgrid(s, s, indexing="xy")
    u = U.ravel()[:, None]
    v = W.ravel()[:, None]
    i = np.tile(np.arange(n + 1), n + 1)
    j = np.repeat(np.arange(n + 1), n + 1)

    c00, c10, c11, c01 = bottom[0], bottom[n], top[n], top[0]
    X = (
        (1 - v) * bottom[i] + v * top[i] + (1 - u) * left[j] + u * right[j]
        - ((1 - u) * (1 - v) * c00 + u * (1 - v) * c10 + (1 - u) * v * c01 + u * v * c11)
    )
    X = normalize_rows(X)

    flags = (i == 0) | (i == n) | (j == 0) | (j == n)
    X[j == 0] = bottom
    X[j == n] = top
    X[i == 0] = left
    X[i == n] = right

    faces = grid_faces(n + 1, n + 1)
    mesh = TriMesh(X, faces, flags, name=problem.quad.label)
    if InitScheme(scheme) is InitScheme.BARYCENTRIC:
        mesh = _barycentric_relaxation(mesh)
    return mesh


def _barycentric_relaxation(mesh: TriMesh) -> TriMesh:
    """Interior vertices at the uniform-weight harmonic average of the boundary, pushed to S^3."""
    e = mesh.topology.edges
    n = mesh.n_vertices
    adj = np.zeros(n)
    np.add.at(adj, e.ravel(), 1.0)
    A = coo_matrix((np.ones(2 * len(e)), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n)).tocsr()
    L = (diags(adj) - A).tocsr()
    interior = np.flatnonzero(~mesh.boundary_flags)
    boundary = np.flatnonzero(mesh.boundary_flags)
    rhs = -(L[interior][:, boundary] @ mesh.vertices[boundary])
    solved = splu(L[interior][:, interior].tocsc()).solve(rhs)
    X = mesh.vertices.copy()
    X[interior] = normalize_rows(solved)
    return mesh.with_vertices(X)


# ==============================================================
# SOLVER
# ==============================================================

def _interior_gradient(X: np.ndarray, F: np.ndarray, boundary: np.ndarray):
    geo = kernels.face_geometry(np, X, F)
    g = tangent_project(X, kernels.area_gradient_raw(np, X, F, geo))
    g[boundary] = 0.0
    cells = kernels.vertex_areas(np, X, F, geo)
    return g, cells


def _h1_direction(mesh: TriMesh, g: np.ndarray, interior: np.ndarray) -> Optional[np.ndarray]:
    L = cotan_stiffness(mesh)
    idx = np.flatnonzero(interior)
    L_ii = L[idx][:, idx].tocsc()
    try:
        solved = splu(L_ii).solve(-g[interior])
    except RuntimeError:
        return None
    d = np.zeros_like(g)
    d[interior] = solved
    d = tangent_project(mesh.vertices, d)
    d[~interior] = 0.0
    return d if np.all(np.isfinite(d)) else None


def solve(problem: PlateauProblem, init: Optional[TriMesh] = None, scheme: InitScheme = InitScheme.COONS) -> PlateauSolution:
    mesh = init if init is not None else init_disk(problem, scheme)
    F = mesh.faces
    boundary = mesh.boundary_flags.copy()
    interior = ~boundary
    pinned = mesh.vertices[boundary].copy()
    X = mesh.vertices.copy()

    def retract(Y: np.ndarray) -> np.ndarray:
        Y = normalize_rows(Y)
        Y[boundary] = pinned
        return Y

    def f(Y: np.ndarray) -> float:
        return area_value(Y, F)

    value = f(X)
    init_area = value
    history = [value]
    initial_step = 1.0 if problem.metric is PlateauMetric.H1 else 0.5 * mesh.mean_edge_length() ** 2
    search = ArmijoBacktracking(initial_step, problem.control)

    converged = False
    gnorm = math.inf
    iteration = 0
    for iteration in range(1, problem.max_iters + 1):
        g, cells = _interior_gradient(X, F, boundary)
        gnorm = float(np.max(np.linalg.norm(g[interior], axis=1) / cells[interior], initial=0.0))
        if gnorm < problem.tolerance:
            converged = True
            break

        d = None
        if problem.metric is PlateauMetric.H1:
            d = _h1_direction(mesh.with_vertices(X), g, interior)
        if d is None or np.sum(g * d) >= 0.0:
            d = -g / np.maximum(cells, kernels.TINY)[:, None]
        slope = float(np.sum(g * d))
        if abs(slope) < PRECISION_FLOOR * value:
            logger.warning("Plateau descent reached the precision floor at iteration %d (gradient %.3e)", iteration, gnorm)
            break

        step = search.search(f, retract, X, value, d, slope)
        X, value = step.x, step.value
        history.append(value)
        if iteration % problem.log_every == 0:
            logger.debug("Plateau iter %d: area=%.12f grad=%.3e step=%.3e", iteration, value, gnorm, step.step)

    logger.info(
        "Plateau %s (n=%d, %s): area %.10f after %d iterations, gradient %.3e, converged=%s",
        problem.quad.label, problem.n, problem.metric.value, value, iteration, gnorm, converged,
    )
    return PlateauSolution(
        mesh=mesh.with_vertices(X),
        area=value,
        init_area=init_area,
        iterations=iteration,
        converged=converged,
        gradient_norm=gnorm,
        history=history,
    )


def residual(mesh: TriMesh) -> float:
    """Largest |H| over interior vertices."""
    H = mean_curvature(mesh, allow_boundary=True)
    interior = ~mesh.boundary_flags
    return float(np.max(np.abs(H[interior]), initial=0.0))


def tile_containment(mesh: TriMesh, tile: Tile) -> float:
    """Fraction of vertices inside the closed tile."""
    inside = tile_membership(mesh.vertices, tile.j, tile.l, tile.m, tile.k)
    return float(np.mean(inside))


@dataclass(frozen=True)
class InitializationComparison:
    coons_area: float
    barycentric_area: float

    @property
    def relative_gap(self) -> float:
        return abs(self.coons_area - self.barycentric_area) / max(self.coons_area, self.barycentric_area)

    @property
    def distinct_minima(self) -> bool:
        return self.relative_gap > UNIQUENESS_GAP


def compare_initializations(problem: PlateauProblem) -> InitializationComparison:
    """Solve from both initial disks; distinct minima are logged and kept."""
    coons = solve(problem, scheme=InitScheme.COONS)
    bary = solve(problem, scheme=InitScheme.BARYCENTRIC)
    result = InitializationComparison(coons.area, bary.area)
    if result.distinct_minima:
        logger.warning(
            "Plateau %s: initialisations reached different areas %.10f and %.10f",
            problem.quad.label, coons.area, bary.area,
        )
    return result
