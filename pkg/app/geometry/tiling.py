"""
Marked points on the two orthogonal great circles, the tetrahedral tiles
they cut S^3 into, the boundary quadrilaterals of the Plateau disks and
the fundamental domain of the rotation group.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from app.domain.errors import PreconditionError
from app.geometry.s3 import GeodesicArc, S3Point, normalize_rows, sample_unit_sphere, to_complex
from app.geometry.symmetry import GroupName, Isometry, build_named_group

SECTOR_TOL = 1e-9
ZERO_MODULUS = 1e-12
TWO_PI = 2.0 * math.pi


def check_mk(m: int, k: int) -> None:
    if not (m >= k >= 1):
        raise PreconditionError("expected m >= k >= 1", {"m": m, "k": k})


def _unit(angle: float) -> complex:
    return cmath.exp(1j * angle)


# ==============================================================
# MARKED POINTS
# ==============================================================

@dataclass(frozen=True)
class MarkedPoints:
    m: int
    k: int
    P: Tuple[S3Point, ...]
    Q: Tuple[S3Point, ...]
    Pstar: Tuple[S3Point, ...]
    Qstar: Tuple[S3Point, ...]

    def p(self, j: int) -> S3Point:
        return self.P[j % len(self.P)]

    def q(self, l: int) -> S3Point:
        return self.Q[l % len(self.Q)]

    def pstar(self, j: int) -> S3Point:
        return self.Pstar[j % len(self.Pstar)]

    def qstar(self, l: int) -> S3Point:
        return self.Qstar[l % len(self.Qstar)]


def marked_points(m: int, k: int) -> MarkedPoints:
    check_mk(m, k)
    step_p = math.pi / (k + 1)
    step_q = math.pi / (m + 1)
    P = tuple(S3Point(0.0, _unit(j * step_p)) for j in range(2 * k + 2))
    Q = tuple(S3Point(_unit(l * step_q), 0.0) for l in range(2 * m + 2))
    Pstar = tuple(S3Point(0.0, _unit((j + 0.5) * step_p)) for j in range(2 * k + 2))
    Qstar = tuple(S3Point(_unit((l + 0.5) * step_q), 0.0) for l in range(2 * m + 2))
    return MarkedPoints(m, k, P, Q, Pstar, Qstar)


# ==============================================================
# TILES
# ==============================================================

class TileParity(str, Enum):
    EVEN = "even"
    ODD = "odd"


@dataclass(frozen=True)
class Tile:
    j: int
    l: int
    m: int
    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "j", self.j % (2 * self.k + 2))
        object.__setattr__(self, "l", self.l % (2 * self.m + 2))

    @property
    def parity(self) -> TileParity:
        return TileParity.EVEN if (self.j + self.l) % 2 == 0 else TileParity.ODD

    @property
    def flat_index(self) -> int:
        return self.j * (2 * self.m + 2) + self.l

    def centroid(self) -> np.ndarray:
        pts = marked_points(self.m, self.k)
        corners = [pts.p(self.j), pts.p(self.j + 1), pts.q(self.l), pts.q(self.l + 1)]
        return normalize_rows(np.sum([c.to_vector() for c in corners], axis=0)[None, :])[0]


def _in_sector(arg: np.ndarray, lower: float, width: float, tol: float) -> np.ndarray:
    d = np.mod(arg - lower, TWO_PI)
    return (d <= width + tol) | (d >= TWO_PI - tol)


def _strictly_in_sector(arg: np.ndarray, lower: float, width: float, tol: float) -> np.ndarray:
    d = np.mod(arg - lower, TWO_PI)
    return (d > tol) & (d < width - tol)


def tile_membership(X: np.ndarray, j: int, l: int, m: int, k: int, tol: float = SECTOR_TOL) -> np.ndarray:
    """Closed-tile membership of each row of X."""
    z1, z2 = to_complex(np.atleast_2d(X))
    step_p = math.pi / (k + 1)
    step_q = math.pi / (m + 1)
    in_p = (np.abs(z2) < ZERO_MODULUS) | _in_sector(np.angle(z2), j * step_p, step_p, tol)
    in_q = (np.abs(z1) < ZERO_MODULUS) | _in_sector(np.angle(z1), l * step_q, step_q, tol)
    return in_p & in_q


def tile_contains(tile: Tile, x: S3Point, m: int, k: int) -> bool:
    return bool(tile_membership(x.to_vector()[None, :], tile.j, tile.l, m, k)[0])


def tile_count(m: int, k: int) -> int:
    check_mk(m, k)
    return 4 * (m + 1) * (k + 1)


def all_tiles(m: int, k: int) -> List[Tile]:
    return [Tile(j, l, m, k) for j in range(2 * k + 2) for l in range(2 * m + 2)]


def tile_index_of(X: np.ndarray, m: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """(j, l) of the tile whose interior contains each row of X."""
    z1, z2 = to_complex(np.atleast_2d(X))
    j = np.floor(np.mod(np.angle(z2), TWO_PI) / (math.pi / (k + 1))).astype(np.int64) % (2 * k + 2)
    l = np.floor(np.mod(np.angle(z1), TWO_PI) / (math.pi / (m + 1))).astype(np.int64) % (2 * m + 2)
    return j, l


@dataclass(frozen=True)
class CoverReport:
    m: int
    k: int
    samples: int
    covered: int
    interior: int
    interior_single: int
    max_multiplicity: int

    @property
    def fraction_covered(self) -> float:
        return self.covered / self.samples if self.samples else 1.0

    @property
    def ok(self) -> bool:
        return self.covered == self.samples and self.interior_single == self.interior


def tiles_cover_check(m: int, k: int, samples: int, rng: Optional[np.random.Generator] = None) -> CoverReport:
    check_mk(m, k)
    rng = rng if rng is not None else np.random.default_rng(0)
    X = sample_unit_sphere(samples, rng)
    z1, z2 = to_complex(X)
    step_p = math.pi / (k + 1)
    step_q = math.pi / (m + 1)
    arg2, arg1 = np.angle(z2), np.angle(z1)

    n_p = np.zeros(samples, dtype=np.int64)
    int_p = np.zeros(samples, dtype=np.int64)
    for j in range(2 * k + 2):
        n_p += _in_sector(arg2, j * step_p, step_p, SECTOR_TOL)
        int_p += _strictly_in_sector(arg2, j * step_p, step_p, SECTOR_TOL)
    n_q = np.zeros(samples, dtype=np.int64)
    int_q = np.zeros(samples, dtype=np.int64)
    for l in range(2 * m + 2):
        n_q += _in_sector(arg1, l * step_q, step_q, SECTOR_TOL)
        int_q += _strictly_in_sector(arg1, l * step_q, step_q, SECTOR_TOL)

    multiplicity = n_p * n_q
    interior = (int_p == 1) & (int_q == 1)
    return CoverReport(
        m=m,
        k=k,
        samples=samples,
        covered=int(np.count_nonzero(multiplicity >= 1)),
        interior=int(np.count_nonzero(interior)),
        interior_single=int(np.count_nonzero(interior & (multiplicity == 1))),
        max_multiplicity=int(multiplicity.max(initial=0)),
    )


# ==============================================================
# QUADRILATERALS
# ==============================================================

@dataclass(frozen=True)
class Quadrilateral:
    arcs: Tuple[GeodesicArc, GeodesicArc, GeodesicArc, GeodesicArc]
    label: str = ""

    def __post_init__(self) -> None:
        for i in range(4):
            if self.arcs[i].end != self.arcs[(i + 1) % 4].start:
                raise PreconditionError("quadrilateral arcs do not close up", {"arc": i, "label": self.label})

    @classmethod
    def from_corners(cls, a: S3Point, b: S3Point, c: S3Point, d: S3Point, label: str = "") -> "Quadrilateral":
        return cls((GeodesicArc(a, b), GeodesicArc(b, c), GeodesicArc(c, d), GeodesicArc(d, a)), label)

    @property
    def vertices(self) -> Tuple[S3Point, S3Point, S3Point, S3Point]:
        return tuple(arc.start for arc in self.arcs)

    @property
    def perimeter(self) -> float:
        return sum(arc.length for arc in self.arcs)

    def sample(self, n: int) -> np.ndarray:
        """n points per arc, closed polyline without repeating the start."""
        s = np.linspace(0.0, 1.0, n, endpoint=False)
        return np.vstack([arc.points(s) for arc in self.arcs])

    def transformed(self, g: Isometry) -> "Quadrilateral":
        return Quadrilateral.from_corners(*(g(v) for v in self.vertices), label=f"{g.name}({self.label})")


def quadrilateral(j: int, l: int, m: int, k: int) -> Quadrilateral:
    """The closed polyline P_j Q_l P_{j+1} Q_{l+1}."""
    pts = marked_points(m, k)
    return Quadrilateral.from_corners(pts.p(j), pts.q(l), pts.p(j + 1), pts.q(l + 1), label=f"Gamma_{j},{l}")


def dual_quadrilateral(j: int, l: int, m: int, k: int) -> Quadrilateral:
    """The closed polyline P*_j Q*_l P*_{j+1} Q*_{l+1}."""
    pts = marked_points(m, k)
    return Quadrilateral.from_corners(
        pts.pstar(j), pts.qstar(l), pts.pstar(j + 1), pts.qstar(l + 1), label=f"Gamma*_{j},{l}"
    )


# ==============================================================
# FUNDAMENTAL DOMAIN
# ==============================================================

@dataclass(frozen=True)
class FundamentalDomain:
    m: int
    k: int
    tiles: Tuple[Tile, Tile, Tile, Tile]

    def contains(self, X: np.ndarray, tol: float = SECTOR_TOL) -> np.ndarray:
        z1, z2 = to_complex(np.atleast_2d(X))
        in_p = (np.abs(z2) < ZERO_MODULUS) | _in_sector(np.angle(z2), 0.0, TWO_PI / (self.k + 1), tol)
        in_q = (np.abs(z1) < ZERO_MODULUS) | _in_sector(np.angle(z1), 0.0, TWO_PI / (self.m + 1), tol)
        return in_p & in_q

    def interior(self, X: np.ndarray, tol: float = SECTOR_TOL) -> np.ndarray:
        z1, z2 = to_complex(np.atleast_2d(X))
        in_p = (np.abs(z2) > ZERO_MODULUS) & _strictly_in_sector(np.angle(z2), 0.0, TWO_PI / (self.k + 1), tol)
        in_q = (np.abs(z1) > ZERO_MODULUS) & _strictly_in_sector(np.angle(z1), 0.0, TWO_PI / (self.m + 1), tol)
        return in_p & in_q


def fundamental_domain(m: int, k: int) -> FundamentalDomain:
    check_mk(m, k)
    return FundamentalDomain(m, k, (Tile(0, 0, m, k), Tile(0, 1, m, k), Tile(1, 0, m, k), Tile(1, 1, m, k)))


@dataclass(frozen=True)
class DomainReport:
    samples: int
    covered: int
    overlapping: int

    @property
    def ok(self) -> bool:
        return self.covered == self.samples and self.overlapping == 0


def fundamental_domain_check(m: int, k: int, samples: int, rng: Optional[np.random.Generator] = None) -> DomainReport:
    """
    Sampled check that the rotation-group images of D cover S^3 and that
    no sample lies in the interior of two distinct images.
    """
    domain = fundamental_domain(m, k)
    group = build_named_group(GroupName.R, m, k)
    rng = rng if rng is not None else np.random.default_rng(0)
    X = sample_unit_sphere(samples, rng)
    hits = np.zeros(samples, dtype=np.int64)
    interior_hits = np.zeros(samples, dtype=np.int64)
    for g in group.elements:
        # g^-1 x, with rows: x @ M
        pulled = X @ g.matrix
        hits += domain.contains(pulled)
        interior_hits += domain.interior(pulled)
    return DomainReport(
        samples=samples,
        covered=int(np.count_nonzero(hits >= 1)),
        overlapping=int(np.count_nonzero(interior_hits > 1)),
    )


# ==============================================================
# TILE PERMUTATIONS
# ==============================================================

@dataclass(frozen=True)
class TilePermutation:
    m: int
    k: int
    permutation: np.ndarray
    parity_preserving: bool
    parity_reversing: bool

    @property
    def bijective(self) -> bool:
        return len(np.unique(self.permutation)) == len(self.permutation)


def tile_permutation(g: Isometry, m: int, k: int) -> TilePermutation:
    """Image tile of every tile, identified through tile centroids."""
    tiles = all_tiles(m, k)
    centroids = np.stack([t.centroid() for t in tiles])
    j, l = tile_index_of(g.apply(centroids), m, k)
    image = j * (2 * m + 2) + l
    src_parity = np.array([(t.j + t.l) % 2 for t in tiles])
    dst_parity = (j + l) % 2
    return TilePermutation(
        m=m,
        k=k,
        permutation=image,
        parity_preserving=bool(np.all(src_parity == dst_parity)),
        parity_reversing=bool(np.all(src_parity != dst_parity)),
    )
