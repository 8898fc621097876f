"""
Points, geodesics and vectorised helpers on the unit 3-sphere.

A point is stored as a pair of complex numbers (z1, z2) with
|z1|^2 + |z2|^2 = 1. Arrays of points use the real layout
(Re z1, Im z1, Re z2, Im z2), one point per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.domain.errors import PreconditionError

UNIT_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-10


# ==============================================================
# ARRAY HELPERS
# ==============================================================

def from_complex(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    z1 = np.asarray(z1, dtype=np.complex128)
    z2 = np.asarray(z2, dtype=np.complex128)
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def to_complex(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    return X[..., 0] + 1j * X[..., 1], X[..., 2] + 1j * X[..., 3]


def normalize_rows(X: np.ndarray) -> np.ndarray:
    """Radially project every row onto S^3."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise PreconditionError("cannot project the origin onto S^3")
    return X / norms


def tangent_project(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Remove the radial component of V at the points X."""
    return V - np.sum(V * X, axis=-1, keepdims=True) * X


def slerp(p: np.ndarray, q: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Points on the minimising arc from p to q at fractions s in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    theta = math.acos(float(np.clip(np.dot(p, q), -1.0, 1.0)))
    if theta == 0.0:
        return np.repeat(p[None, :], len(s), axis=0)
    w0 = np.sin((1.0 - s) * theta) / math.sin(theta)
    w1 = np.sin(s * theta) / math.sin(theta)
    pts = w0[:, None] * p[None, :] + w1[:, None] * q[None, :]
    pts[s == 0.0] = p
    pts[s == 1.0] = q
    return pts


def sample_unit_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on S^3."""
    return normalize_rows(rng.standard_normal((n, 4)))


# ==============================================================
# POINTS
# ==============================================================

@dataclass(frozen=True)
class S3Point:
    z1: complex
    z2: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "z1", complex(self.z1))
        object.__setattr__(self, "z2", complex(self.z2))
        norm2 = abs(self.z1) ** 2 + abs(self.z2) ** 2
        if abs(norm2 - 1.0) > UNIT_TOL:
            raise PreconditionError(
                "point is not on S^3",
                {"z1": repr(self.z1), "z2": repr(self.z2), "norm_sq": norm2},
            )

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "S3Point":
        x = np.asarray(x, dtype=np.float64)
        return cls(complex(x[0], x[1]), complex(x[2], x[3]))

    @classmethod
    def from_angles(cls, r1: float, theta1: float, theta2: float) -> "S3Point":
        """(cos r1 e^{i theta1}, sin r1 e^{i theta2})."""
        return cls(
            math.cos(r1) * complex(math.cos(theta1), math.sin(theta1)),
            math.sin(r1) * complex(math.cos(theta2), math.sin(theta2)),
        )

    def to_vector(self) -> np.ndarray:
        return np.array([self.z1.real, self.z1.imag, self.z2.real, self.z2.imag])

    def inner(self, other: "S3Point") -> float:
        return float(np.dot(self.to_vector(), other.to_vector()))

    def __neg__(self) -> "S3Point":
        return S3Point(-self.z1, -self.z2)


def project_to_sphere(x: np.ndarray) -> S3Point:
    return S3Point.from_vector(normalize_rows(np.asarray(x, dtype=np.float64)[None, :])[0])


def geodesic_distance(p: S3Point, q: S3Point) -> float:
    return math.acos(max(-1.0, min(1.0, p.inner(q))))


def geodesic_join(p: S3Point, q: S3Point, t: float) -> S3Point:
    """
    cos(t) p + sin(t) q for orthogonal p, q and t in [0, pi/2].
    """
    if abs(p.inner(q)) > ORTHOGONALITY_TOL:
        raise PreconditionError("geodesic_join needs orthogonal points", {"inner": p.inner(q)})
    if t < -ORTHOGONALITY_TOL or t > math.pi / 2 + ORTHOGONALITY_TOL:
        raise PreconditionError("geodesic_join parameter outside [0, pi/2]", {"t": t})
    x = math.cos(t) * p.to_vector() + math.sin(t) * q.to_vector()
    return project_to_sphere(x)


def great_circle(p: S3Point, q: S3Point, samples: int) -> np.ndarray:
    """Evenly spaced samples of the great circle through orthogonal p, q."""
    theta = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    return np.cos(theta)[:, None] * p.to_vector()[None, :] + np.sin(theta)[:, None] * q.to_vector()[None, :]


# ==============================================================
# ARCS
# ==============================================================

@dataclass(frozen=True)
class GeodesicArc:
    start: S3Point
    end: S3Point

    def __post_init__(self) -> None:
        angle = self.angle
        if not (0.0 < angle < math.pi - 1e-12):
            raise PreconditionError(
                "arc endpoints must be distinct and not antipodal",
                {"angle": angle},
            )

    @property
    def angle(self) -> float:
        return geodesic_distance(self.start, self.end)

    @property
    def length(self) -> float:
        return self.angle

    def point_at(self, s: float) -> S3Point:
        if s == 0.0:
            return self.start
        if s == 1.0:
            return self.end
        return S3Point.from_vector(slerp(self.start.to_vector(), self.end.to_vector(), s)[0])

    def points(self, s: np.ndarray) -> np.ndarray:
        return slerp(self.start.to_vector(), self.end.to_vector(), s)

    def reversed(self) -> "GeodesicArc":
        return GeodesicArc(self.end, self.start)
