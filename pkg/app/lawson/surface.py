"""
Assembly of the Lawson surfaces from one solved Plateau disk, and the
checks run against the assembled meshes.

The disk over the quadrilateral P_0 Q_0 P_1 Q_1 is replicated by the
rotation-and-halfturn group G (one copy per even tile) and welded. The
odd companion, the dual surface and its odd companion are ambient
images of that mesh.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from app.config.settings import settings
from app.domain.errors import PreconditionError, WeldError
from app.energy import discrete
from app.geometry.s3 import S3Point, great_circle
from app.geometry.symmetry import (
    GroupName,
    Isometry,
    SymmetryGroup,
    build_named_group,
    conjugate_group,
    identity,
    quarter_rotation,
    reflection_sigma_P,
    reflection_sigma_Pstar,
)
from app.geometry.tiling import all_tiles, check_mk, marked_points, tile_index_of, tile_membership
from app.mesh.operations import compute_orbit_map, invariance_deviation, orbit_mesh
from app.mesh.trimesh import TriMesh, genus
from app.solvers.plateau import PlateauMetric, PlateauSolution, plateau_problem, solve

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 8
INVARIANCE_FACTOR = 10.0
CIRCLE_SAMPLES = 720


class LawsonVariant(str, Enum):
    STANDARD = "standard"
    ODD = "odd"
    DUAL = "dual"
    DUAL_ODD = "dual_odd"


def variant_transform(variant: LawsonVariant | str, m: int, k: int) -> Isometry:
    """Ambient map taking the standard surface to the requested variant."""
    variant = LawsonVariant(variant)
    if variant is LawsonVariant.STANDARD:
        return identity()
    if variant is LawsonVariant.ODD:
        return reflection_sigma_P(0, k)
    rq = quarter_rotation(m, k)
    if variant is LawsonVariant.DUAL:
        return rq
    return reflection_sigma_Pstar(0, k) @ rq


@dataclass
class LawsonSurface:
    m: int
    k: int
    n: int
    variant: LawsonVariant
    mesh: TriMesh = field(repr=False)
    area: float
    transform: Isometry = field(repr=False)
    plateau: Optional[PlateauSolution] = field(default=None, repr=False)
    disk_center: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def resolution(self) -> str:
        return f"n={self.n}"

    @property
    def expected_genus(self) -> int:
        return self.m * self.k

    def group(self, name: GroupName | str = GroupName.G_HAT) -> SymmetryGroup:
        """A named symmetry group, moved into this variant's position."""
        base = build_named_group(name, self.m, self.k)
        if self.variant is LawsonVariant.STANDARD:
            return base
        return conjugate_group(base, self.transform)


# ==============================================================
# BUILD
# ==============================================================

def _check_build_args(m: int, k: int, n: int) -> None:
    check_mk(m, k)
    if n < MIN_RESOLUTION or n % 2:
        raise PreconditionError(
            f"resolution must be an even integer >= {MIN_RESOLUTION}", {"n": n}
        )


def assemble(
    solution: PlateauSolution,
    m: int,
    k: int,
    variant: LawsonVariant | str = LawsonVariant.STANDARD,
    weld_tol: Optional[float] = None,
    workers: Optional[int] = None,
) -> LawsonSurface:
    """Replicate a solved disk over the even tiles and move it into the variant's position."""
    variant = LawsonVariant(variant)
    G = build_named_group(GroupName.G, m, k)
    mesh = orbit_mesh(solution.mesh, G, weld_tol=weld_tol, workers=workers)
    if not mesh.is_closed:
        raise WeldError(
            "assembled surface still has boundary",
            {"boundary_edges": int(len(mesh.topology.boundary_edges)), "m": m, "k": k},
        )

    T = variant_transform(variant, m, k)
    name = f"xi_{m},{k}" + ("" if variant is LawsonVariant.STANDARD else f"[{variant.value}]")
    if variant is LawsonVariant.STANDARD:
        mesh = TriMesh(mesh.vertices, mesh.faces, mesh.boundary_flags, mesh.orbit_map, name)
    else:
        mesh = mesh.transformed(T.matrix, name)
        mesh = mesh.with_orbit_map(compute_orbit_map(mesh, conjugate_group(G, T)))

    n = int(round(math.sqrt(solution.mesh.n_vertices))) - 1
    center = T.apply(solution.mesh.vertices[solution.center_index][None, :])[0]
    return LawsonSurface(
        m=m,
        k=k,
        n=n,
        variant=variant,
        mesh=mesh,
        area=discrete.area(mesh),
        transform=T,
        plateau=solution,
        disk_center=center,
    )


def build(
    m: int,
    k: int,
    n: int,
    variant: LawsonVariant | str = LawsonVariant.STANDARD,
    tolerance: float = 1e-3,
    max_iters: int = 2000,
    metric: PlateauMetric | str = PlateauMetric.H1,
    weld_tol: Optional[float] = None,
    workers: Optional[int] = None,
) -> LawsonSurface:
    _check_build_args(m, k, n)
    problem = plateau_problem(0, 0, m, k, n, tolerance=tolerance, max_iters=max_iters, metric=metric)
    solution = solve(problem)
    surface = assemble(solution, m, k, variant, weld_tol=weld_tol, workers=workers)
    logger.info(
        "Built %s at n=%d: %d vertices, %d faces, area %.8f",
        surface.mesh.name, n, surface.mesh.n_vertices, surface.mesh.n_faces, surface.area,
    )
    return surface


# ==============================================================
# RICHARDSON LADDER
# ==============================================================

@dataclass(frozen=True)
class AreaEstimate:
    value: float
    error: float

    def exceeds(self, other: "AreaEstimate") -> bool:
        """True when self > other by more than the combined error bars."""
        return self.value - other.value > self.error + other.error

    def below(self, bound: float) -> bool:
        return self.value + self.error < bound


@dataclass
class RichardsonEstimate:
    ns: List[int]
    raw: List[float]
    extrapolated: float
    error: float
    observed_order: Optional[float]
    monotone: bool
    direction: str

    @property
    def estimate(self) -> AreaEstimate:
        return AreaEstimate(self.extrapolated, self.error)


def richardson(values_by_n: Mapping[int, float]) -> RichardsonEstimate:
    """
    Second-order extrapolation over the two finest levels, assuming each
    level doubles n. A third level adds the observed order.
    """
    if len(values_by_n) < 2:
        raise PreconditionError("extrapolation needs at least two levels", {"levels": len(values_by_n)})
    ns = sorted(values_by_n)
    for coarse, fine in zip(ns, ns[1:]):
        if fine != 2 * coarse:
            raise PreconditionError("levels must double", {"ns": ns})
    raw = [float(values_by_n[n]) for n in ns]
    a_c, a_f = raw[-2], raw[-1]
    extrapolated = a_f + (a_f - a_c) / 3.0
    error = abs(a_f - a_c) / 3.0

    observed = None
    if len(raw) >= 3:
        d1, d2 = raw[-2] - raw[-3], raw[-1] - raw[-2]
        if d1 != 0.0 and d2 != 0.0:
            observed = math.log2(abs(d1 / d2))

    diffs = np.diff(raw)
    if np.all(diffs <= 0.0):
        direction, monotone = "decreasing", True
    elif np.all(diffs >= 0.0):
        direction, monotone = "increasing", True
    else:
        direction, monotone = "mixed", False
    return RichardsonEstimate(ns, raw, extrapolated, error, observed, monotone, direction)


@dataclass
class LadderReport:
    m: int
    k: int
    variant: LawsonVariant
    areas: Dict[int, float]
    richardson: RichardsonEstimate
    finest: LawsonSurface = field(repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "k": self.k,
            "variant": self.variant.value,
            "areas": {str(n): a for n, a in self.areas.items()},
            "richardson": asdict(self.richardson),
        }


def build_ladder(
    m: int,
    k: int,
    ns: Sequence[int] = (8, 16, 32),
    variant: LawsonVariant | str = LawsonVariant.STANDARD,
    **options,
) -> LadderReport:
    areas: Dict[int, float] = {}
    surface = None
    for n in sorted(ns):
        surface = build(m, k, n, variant, **options)
        areas[n] = surface.area
    estimate = richardson(areas)
    logger.info(
        "Ladder xi_%d,%d over n=%s: extrapolated area %.8f +- %.2e (%s)",
        m, k, list(areas), estimate.extrapolated, estimate.error, estimate.direction,
    )
    return LadderReport(m, k, LawsonVariant(variant), areas, estimate, surface)


# ==============================================================
# VERIFICATION
# ==============================================================

@dataclass
class LawsonReport:
    m: int
    k: int
    variant: str
    n: int
    genus: int
    expected_genus: int
    invariance_deviation: float
    invariance_tol: float
    residual: float
    area: float
    willmore: float
    area_for_bounds: float
    area_error: float
    bound_4pi: float
    below_4pi_bound: bool
    below_8pi: Optional[bool]
    even_tile_fraction: Optional[float]

    @property
    def genus_ok(self) -> bool:
        return self.genus == self.expected_genus

    @property
    def invariant(self) -> bool:
        return self.invariance_deviation < self.invariance_tol

    @property
    def ok(self) -> bool:
        checks = [self.genus_ok, self.invariant, self.below_4pi_bound]
        if self.below_8pi is not None:
            checks.append(self.below_8pi)
        return all(checks)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.update(genus_ok=self.genus_ok, invariant=self.invariant, ok=self.ok)
        return data


def tile_census(surface: LawsonSurface) -> Dict[str, int]:
    """Faces whose centroid lies in a closed even / odd tile (a face on a shared wall counts for both)."""
    mesh = surface.mesh
    m, k = surface.m, surface.k
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    in_even = np.zeros(len(centroids), dtype=bool)
    in_odd = np.zeros(len(centroids), dtype=bool)
    for tile in all_tiles(m, k):
        hit = tile_membership(centroids, tile.j, tile.l, m, k)
        if (tile.j + tile.l) % 2 == 0:
            in_even |= hit
        else:
            in_odd |= hit
    return {
        "faces": int(len(centroids)),
        "even": int(np.count_nonzero(in_even)),
        "odd": int(np.count_nonzero(in_odd)),
    }


def verify(
    surface: LawsonSurface,
    estimate: Optional[AreaEstimate] = None,
    weld_tol: Optional[float] = None,
) -> LawsonReport:
    """
    Genus, invariance under the full rotation-reflection group, minimality
    residual and the area bounds. With an extrapolated estimate the bounds
    are decided on value plus error bar.
    """
    m, k = surface.m, surface.k
    weld_tol = settings.WELD_TOL if weld_tol is None else weld_tol
    mesh = surface.mesh
    g = genus(mesh)
    deviation = invariance_deviation(mesh, surface.group(GroupName.G_HAT))
    report_energy = discrete.willmore(mesh)
    residual = report_energy.max_abs_curvature

    value = estimate.value if estimate is not None else surface.area
    error = estimate.error if estimate is not None else 0.0
    bound = 4.0 * math.pi * (k + 1)
    below_8pi = (value + error < 8.0 * math.pi) if (k == 1 and m >= 2) else None

    even_fraction = None
    if surface.variant in (LawsonVariant.STANDARD, LawsonVariant.ODD):
        census = tile_census(surface)
        key = "even" if surface.variant is LawsonVariant.STANDARD else "odd"
        even_fraction = census[key] / census["faces"] if census["faces"] else 1.0

    report = LawsonReport(
        m=m,
        k=k,
        variant=surface.variant.value,
        n=surface.n,
        genus=g,
        expected_genus=surface.expected_genus,
        invariance_deviation=deviation,
        invariance_tol=INVARIANCE_FACTOR * weld_tol,
        residual=residual,
        area=surface.area,
        willmore=report_energy.willmore,
        area_for_bounds=value,
        area_error=error,
        bound_4pi=bound,
        below_4pi_bound=value + error < bound,
        below_8pi=below_8pi,
        even_tile_fraction=even_fraction,
    )
    if not report.ok:
        logger.warning("Verification of %s failed: %s", mesh.name, report.to_dict())
    return report


# ==============================================================
# INTERSECTION DIAGNOSTICS
# ==============================================================

@dataclass
class CircleReport:
    name: str
    samples: int
    max_distance: float
    min_distance: float
    crossings: int
    contained: bool


@dataclass
class IntersectionReport:
    band: float
    circles: List[CircleReport]

    def by_name(self, name: str) -> CircleReport:
        for circle in self.circles:
            if circle.name == name:
                return circle
        raise KeyError(name)

    def family(self, prefix: str) -> List[CircleReport]:
        """Circles named prefix_j,l."""
        head = prefix + "_"
        return [c for c in self.circles if c.name.startswith(head) and c.name[len(head):len(head) + 1].isdigit()]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _cyclic_runs(mask: np.ndarray) -> int:
    """Maximal runs of True in a cyclic mask; 0 when the mask is constant."""
    if mask.all() or not mask.any():
        return 0
    return int(np.count_nonzero(mask & ~np.roll(mask, 1)))


def _named_circles(m: int, k: int, samples: int) -> Dict[str, np.ndarray]:
    pts = marked_points(m, k)
    circles = {
        "gamma": great_circle(S3Point(0.0, 1.0), S3Point(0.0, 1j), samples),
        "gamma_perp": great_circle(S3Point(1.0, 0.0), S3Point(1j, 0.0), samples),
    }
    for j in range(k + 1):
        for l in range(m + 1):
            circles[f"gamma_{j},{l}"] = great_circle(pts.p(j), pts.q(l), samples)
            circles[f"gamma*_{j},{l}"] = great_circle(pts.pstar(j), pts.qstar(l), samples)
    return circles


def intersection_diagnostics(surface: LawsonSurface, samples: int = CIRCLE_SAMPLES) -> IntersectionReport:
    """
    Sampled estimate: distance from ``samples`` points on each named great
    circle to the nearest mesh vertex. Mesh edges are not intersected with
    the circle. Each cyclic run of samples within one mean edge length of
    the vertices counts as one crossing, so a circle that grazes the
    surface or crosses it twice within one band reads as a single run. A
    circle whose samples all stay within two mean edge lengths is reported
    as contained.
    """
    mesh = surface.mesh
    band = mesh.mean_edge_length()
    tree = cKDTree(mesh.vertices)
    reports = []
    for name, points in _named_circles(surface.m, surface.k, samples).items():
        dist, _ = tree.query(points)
        near = dist < band
        contained = bool(np.max(dist) < 2.0 * band)
        reports.append(
            CircleReport(
                name=name,
                samples=samples,
                max_distance=float(np.max(dist)),
                min_distance=float(np.min(dist)),
                crossings=0 if contained else _cyclic_runs(near),
                contained=contained,
            )
        )
    return IntersectionReport(band=band, circles=reports)


@dataclass
class CenterReport:
    """Images of the disk centre split into the two quotient classes A+ and A-."""

    plus: np.ndarray = field(repr=False)
    minus: np.ndarray = field(repr=False)

    @property
    def counts(self) -> Dict[str, int]:
        return {"A+": int(len(self.plus)), "A-": int(len(self.minus))}

    def to_dict(self) -> Dict[str, Any]:
        return {"A+": self.plus.tolist(), "A-": self.minus.tolist(), "counts": self.counts}


def plateau_centers(surface: LawsonSurface) -> CenterReport:
    """
    Disk centres over the even tiles: A+ where both tile indices are
    even, A- where both are odd. Classified in the standard position and
    then moved with the variant.
    """
    if surface.plateau is None:
        raise PreconditionError("surface carries no Plateau solution")
    m, k = surface.m, surface.k
    c = surface.plateau.mesh.vertices[surface.plateau.center_index]
    G = build_named_group(GroupName.G, m, k)
    images = np.einsum("gij,j->gi", G.matrices, c)
    j, l = tile_index_of(images, m, k)
    plus = (j % 2 == 0) & (l % 2 == 0)
    minus = (j % 2 == 1) & (l % 2 == 1)
    moved = surface.transform.apply(images)
    return CenterReport(plus=moved[plus], minus=moved[minus])
