"""
Willmore gradient descent with the iterate kept inside the set of
surfaces invariant under a finite group, and the neck probe built on it.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from app.domain.errors import MeshQualityError, PreconditionError, StagnationError
from app.energy import discrete, kernels
from app.geometry.s3 import normalize_rows, tangent_project
from app.geometry.symmetry import GroupName, SymmetryGroup, build_named_group, generate_group, isometry_from_name
from app.lawson.surface import build as build_lawson
from app.mesh.diagnostics import min_angle_degrees, min_edge_length, shortest_handle_loop
from app.mesh.io import load_mesh4
from app.mesh.operations import compute_orbit_map, symmetrize, symmetry_deviation
from app.mesh.primitives import octahedron_sphere
from app.mesh.trimesh import TriMesh, genus
from app.models.cli_requests import FlowConfig
from app.solvers.linesearch import ArmijoBacktracking, StepControl

logger = logging.getLogger(__name__)

TRACE_HEADER = ("iter", "W", "area", "grad_norm", "min_edge", "neck", "sym_dev")
NECK_PROBE_GENERATORS = ("gamma_0,0", "R_Q")
NECK_COLLAPSE_RATIO = 0.5


# ==============================================================
# TRACE
# ==============================================================

@dataclass
class FlowRecord:
    iter: int
    W: float
    area: float
    grad_norm: float
    min_edge: float
    neck: float
    sym_dev: float


@dataclass
class FlowTrace:
    records: List[FlowRecord] = field(default_factory=list)

    def append(self, record: FlowRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.W for r in self.records])

    @property
    def necks(self) -> np.ndarray:
        """Neck values at the iterations where they were measured."""
        values = np.array([r.neck for r in self.records])
        return values[~np.isnan(values)]

    @property
    def last(self) -> FlowRecord:
        return self.records[-1]

    def is_monotone(self, slack: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.energies) <= slack))

    def to_rows(self) -> List[dict]:
        return [asdict(r) for r in self.records]

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=TRACE_HEADER)
            writer.writeheader()
            writer.writerows(self.to_rows())
        return path


class FlowStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DEGENERATED = "degenerated"


@dataclass
class FlowResult:
    trace: FlowTrace
    mesh: TriMesh = field(repr=False)
    group: SymmetryGroup = field(repr=False)
    status: str
    iterations: int

    @property
    def final_willmore(self) -> float:
        return self.trace.last.W


# ==============================================================
# INITIAL MESH
# ==============================================================

def resolve_group(config: FlowConfig) -> SymmetryGroup:
    """Named group, or the closure of the configured generator names."""
    m, k = config.m, config.k
    if config.generators:
        gens = [isometry_from_name(name, m, k) for name in config.generators]
        return generate_group(gens, 16 * (m + 1) * (k + 1), name=GroupName.CUSTOM.value, m=m, k=k)
    if config.source == "neck_probe":
        gens = [isometry_from_name(name, m, k) for name in NECK_PROBE_GENERATORS]
        return generate_group(gens, 16 * (m + 1) * (k + 1), name=GroupName.CUSTOM.value, m=m, k=k)
    return build_named_group(config.group, m, k)


def _base_mesh(config: FlowConfig) -> TriMesh:
    if config.source in ("lawson", "neck_probe"):
        return build_lawson(config.m, config.k, config.n, config.variant).mesh
    if config.source == "sphere":
        return octahedron_sphere(config.sphere_level)
    return load_mesh4(config.path)


def perturb(mesh: TriMesh, group: SymmetryGroup, amplitude: float, rng: np.random.Generator) -> TriMesh:
    """Tangential Gaussian noise of the given amplitude, then symmetrized."""
    if amplitude == 0.0:
        return symmetrize(mesh, group)
    noise = tangent_project(mesh.vertices, rng.normal(size=mesh.vertices.shape))
    X = normalize_rows(mesh.vertices + amplitude * noise)
    return symmetrize(mesh.with_vertices(X), group)


def prepare_initial_mesh(config: FlowConfig) -> Tuple[TriMesh, SymmetryGroup]:
    """
    Initial mesh with an orbit map for the flow's group, perturbed by a
    seeded random field. The orbit map is computed before the
    perturbation so it stays combinatorial.
    """
    if config.source == "neck_probe":
        # the probe input is always the genus-2 surface
        config = config.model_copy(update={"m": 2, "k": 1})
    group = resolve_group(config)
    mesh = _base_mesh(config)
    if not mesh.is_closed:
        raise PreconditionError("the flow needs a closed mesh", {"source": config.source})
    mesh = mesh.with_orbit_map(compute_orbit_map(mesh, group))
    rng = np.random.default_rng(config.seed)
    mesh = perturb(mesh, group, config.perturbation, rng)
    logger.info(
        "Flow input %s: %d vertices, genus %d, group %s of order %d, perturbation %.2e",
        mesh.name or config.source, mesh.n_vertices, genus(mesh), group.name, group.order, config.perturbation,
    )
    return mesh, group


# ==============================================================
# DESCENT
# ==============================================================

def _gradient(mesh: TriMesh, mode: str) -> Tuple[np.ndarray, np.ndarray]:
    g = discrete.willmore_gradient(mesh, mode=mode)
    geo = kernels.face_geometry(np, mesh.vertices, mesh.faces)
    cells = kernels.vertex_areas(np, mesh.vertices, mesh.faces, geo)
    return g, cells


def _record(iteration: int, mesh: TriMesh, group: SymmetryGroup, W: float, grad_norm: float, neck: float) -> FlowRecord:
    return FlowRecord(
        iter=iteration,
        W=W,
        area=discrete.area(mesh),
        grad_norm=grad_norm,
        min_edge=min_edge_length(mesh),
        neck=neck,
        sym_dev=symmetry_deviation(mesh, group),
    )


def run_descent(mesh: TriMesh, group: SymmetryGroup, config: FlowConfig) -> FlowResult:
    """
    Mass-lumped Willmore descent. Each trial point is pushed back to S^3
    and symmetrized before the Armijo test, so accepted energies never
    increase.
    """
    F = mesh.faces
    mesh = symmetrize(mesh, group)
    X = mesh.vertices
    initial_mean_edge = mesh.mean_edge_length()
    degeneration_edge = config.stop.degeneration_ratio * initial_mean_edge

    def f(Y: np.ndarray) -> float:
        return discrete.willmore_value(Y, F)

    def retract(Y: np.ndarray) -> np.ndarray:
        return symmetrize(mesh.with_vertices(normalize_rows(Y)), group).vertices

    step = config.step
    control = StepControl(
        armijo=step.armijo,
        shrink=step.shrink,
        growth=step.growth,
        growth_after=step.growth_after,
        max_backtracks=step.max_backtracks,
    )
    search = ArmijoBacktracking(step.initial_step or 0.5 * initial_mean_edge ** 4, control)

    trace = FlowTrace()
    value = f(X)
    status = FlowStatus.MAX_ITERS.value
    iteration = 0
    for iteration in range(config.stop.max_iters + 1):
        current = mesh.with_vertices(X)
        g, cells = _gradient(current, config.gradient_mode)
        grad_norm = float(np.sqrt(np.sum(np.sum(g * g, axis=1) / np.maximum(cells, kernels.TINY))))
        neck = math.nan
        if iteration % config.diagnostics_every == 0:
            neck = shortest_handle_loop(current, n_seeds=config.neck_seeds)
        trace.append(_record(iteration, current, group, value, grad_norm, neck))

        angle = min_angle_degrees(current)
        if angle < config.stop.min_angle_deg:
            raise MeshQualityError(
                "triangle quality collapsed",
                {"iteration": iteration, "min_angle_deg": angle},
                trace=trace,
            )
        if trace.last.min_edge < degeneration_edge:
            status = FlowStatus.DEGENERATED.value
            logger.warning(
                "Flow stopped at iteration %d: min edge %.3e below %.3e", iteration, trace.last.min_edge, degeneration_edge
            )
            break
        if grad_norm < config.stop.grad_tol:
            status = FlowStatus.CONVERGED.value
            break
        if iteration == config.stop.max_iters:
            break

        d = -g / np.maximum(cells, kernels.TINY)[:, None]
        slope = float(np.sum(g * d))
        try:
            accepted = search.search(f, retract, X, value, d, slope)
        except StagnationError as exc:
            exc.trace = trace
            exc.diagnostics["iteration"] = iteration
            raise
        X, value = accepted.x, accepted.value
        if iteration % config.diagnostics_every == 0:
            logger.debug("Flow iter %d: W=%.10f grad=%.3e step=%.3e", iteration, value, grad_norm, accepted.step)

    final = mesh.with_vertices(X)
    logger.info(
        "Flow finished (%s) after %d iterations: W %.10f -> %.10f",
        status, iteration, trace.records[0].W, trace.last.W,
    )
    return FlowResult(trace=trace, mesh=final, group=group, status=status, iterations=iteration)


def descend(config: FlowConfig) -> FlowResult:
    mesh, group = prepare_initial_mesh(config)
    return run_descent(mesh, group, config)


# ==============================================================
# NECK PROBE
# ==============================================================

@dataclass
class ProbeReport:
    outcome: str
    status: str
    neck_first: float
    neck_last: float
    neck_min: float
    error: Optional[str] = None
    trace: FlowTrace = field(default_factory=FlowTrace, repr=False)
    mesh: Optional[TriMesh] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "status": self.status,
            "neck_first": self.neck_first,
            "neck_last": self.neck_last,
            "neck_min": self.neck_min,
            "error": self.error,
            "iterations": len(self.trace),
        }


def classify_neck_trend(trace: FlowTrace, status: str) -> str:
    necks = trace.necks
    if status == FlowStatus.DEGENERATED.value:
        return "degenerating"
    if len(necks) < 2 or not np.isfinite(necks[0]):
        return "undetermined"
    if necks[-1] < NECK_COLLAPSE_RATIO * necks[0]:
        return "degenerating"
    return "stable"


def degeneration_probe(config: FlowConfig) -> ProbeReport:
    """
    Run the descent while tracking the shortest handle loop. Solver
    failures end the probe and are reported with the trace collected so
    far; the outcome is evidence only.
    """
    mesh, group = prepare_initial_mesh(config)
    if group.order != 4:
        logger.warning("Neck probe group %s has order %d, not 4", group.name, group.order)
    error = None
    try:
        result = run_descent(mesh, group, config)
        trace, status, final = result.trace, result.status, result.mesh
    except (StagnationError, MeshQualityError) as exc:
        logger.warning("Neck probe stopped early (%s): %s", type(exc).__name__, exc.message)
        trace = exc.trace if exc.trace is not None else FlowTrace()
        status, final, error = type(exc).__name__, None, exc.message

    necks = trace.necks
    report = ProbeReport(
        outcome=classify_neck_trend(trace, status),
        status=status,
        neck_first=float(necks[0]) if len(necks) else math.nan,
        neck_last=float(necks[-1]) if len(necks) else math.nan,
        neck_min=float(necks.min()) if len(necks) else math.nan,
        error=error,
        trace=trace,
        mesh=final,
    )
    logger.info("Neck probe outcome: %s (%s)", report.outcome, report.status)
    return report
