import math

import numpy as np
import pytest

from app.geometry.s3 import normalize_rows, tangent_project
from app.lawson.surface import build
from app.mesh.primitives import octahedron_sphere
from app.mesh.trimesh import TriMesh

CLIFFORD_AREA = 2.0 * math.pi ** 2
SPHERE_W = 4.0 * math.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def xi11():
    return build(1, 1, 8)


@pytest.fixture(scope="session")
def xi21():
    return build(2, 1, 8)


def jiggle(mesh: TriMesh, amplitude: float, rng: np.random.Generator) -> TriMesh:
    """Small tangential perturbation that stays on S^3."""
    noise = tangent_project(mesh.vertices, rng.normal(size=mesh.vertices.shape))
    return mesh.with_vertices(normalize_rows(mesh.vertices + amplitude * noise))


@pytest.fixture
def bumpy_sphere(rng):
    return jiggle(octahedron_sphere(1), 0.02, rng)
