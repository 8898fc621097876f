import math

import numpy as np
import pytest

from app.domain.errors import PreconditionError
from app.geometry.s3 import (
    GeodesicArc,
    S3Point,
    from_complex,
    geodesic_distance,
    geodesic_join,
    great_circle,
    normalize_rows,
    sample_unit_sphere,
    slerp,
    tangent_project,
    to_complex,
)


def test_complex_layout():
    X = from_complex(np.array([1 + 2j]), np.array([3 - 4j]))
    assert X.tolist() == [[1.0, 2.0, 3.0, -4.0]]
    z1, z2 = to_complex(X)
    assert z1[0] == 1 + 2j and z2[0] == 3 - 4j


def test_point_must_be_unit():
    with pytest.raises(PreconditionError):
        S3Point(1.0, 1.0)
    p = S3Point.from_angles(0.3, 1.0, -2.0)
    assert abs(abs(p.z1) ** 2 + abs(p.z2) ** 2 - 1.0) < 1e-14


def test_distance_between_the_two_circles():
    p = S3Point(0.0, 1.0)
    q = S3Point(1.0, 0.0)
    assert geodesic_distance(p, q) == pytest.approx(math.pi / 2)
    assert geodesic_distance(p, -p) == pytest.approx(math.pi)


def test_geodesic_join_endpoints_and_orthogonality():
    p, q = S3Point(0.0, 1.0), S3Point(1j, 0.0)
    assert np.allclose(geodesic_join(p, q, 0.0).to_vector(), p.to_vector())
    assert np.allclose(geodesic_join(p, q, math.pi / 2).to_vector(), q.to_vector())
    mid = geodesic_join(p, q, math.pi / 4)
    assert geodesic_distance(mid, p) == pytest.approx(math.pi / 4)
    with pytest.raises(PreconditionError):
        geodesic_join(p, S3Point.from_angles(0.2, 0.0, 0.0), 0.5)


def test_slerp_stays_on_the_arc():
    p = np.array([1.0, 0.0, 0.0, 0.0])
    q = np.array([0.0, 0.0, 1.0, 0.0])
    s = np.linspace(0.0, 1.0, 11)
    pts = slerp(p, q, s)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    angles = np.arccos(np.clip(pts @ p, -1.0, 1.0))
    assert np.allclose(angles, s * math.pi / 2)
    assert np.array_equal(pts[0], p) and np.array_equal(pts[-1], q)


def test_great_circle_samples():
    pts = great_circle(S3Point(1.0, 0.0), S3Point(0.0, 1.0), 64)
    assert pts.shape == (64, 4)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    assert np.allclose(pts[:, [1, 3]], 0.0)


def test_arc_rejects_antipodes():
    p = S3Point(1.0, 0.0)
    with pytest.raises(PreconditionError):
        GeodesicArc(p, -p)
    arc = GeodesicArc(p, S3Point(0.0, 1.0))
    assert arc.length == pytest.approx(math.pi / 2)
    assert arc.reversed().start == arc.end


def test_tangent_projection_and_normalization(rng):
    X = sample_unit_sphere(100, rng)
    V = rng.normal(size=X.shape)
    T = tangent_project(X, V)
    assert np.max(np.abs(np.sum(T * X, axis=1))) < 1e-12
    assert np.allclose(np.linalg.norm(normalize_rows(3.0 * X), axis=1), 1.0)
    with pytest.raises(PreconditionError):
        normalize_rows(np.zeros((1, 4)))
