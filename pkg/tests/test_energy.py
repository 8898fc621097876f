import math

import numpy as np
import pytest
from scipy.stats import special_ortho_group

from app.domain.errors import PreconditionError
from app.energy import discrete, kernels
from app.geometry.s3 import tangent_project
from app.geometry.symmetry import GroupName, build_named_group
from app.mesh.operations import compute_orbit_map, symmetrize
from app.mesh.primitives import clifford_torus, geodesic_sphere, octahedron_sphere
from app.mesh.trimesh import TriMesh
from tests.conftest import CLIFFORD_AREA, SPHERE_W, jiggle


def _directional_fd(f, X, d, h=1e-6):
    return (f(X + h * d) - f(X - h * d)) / (2.0 * h)


def test_great_sphere_is_minimal():
    mesh = octahedron_sphere(4)
    report = discrete.willmore(mesh)
    assert report.max_abs_curvature < 1e-9
    assert report.willmore == pytest.approx(report.area, abs=1e-9)
    assert report.willmore == pytest.approx(SPHERE_W, rel=1e-2)


@pytest.mark.parametrize("radius", [math.pi / 6, math.pi / 4, math.pi / 3])
def test_small_spheres_have_willmore_four_pi(radius):
    report = discrete.willmore(geodesic_sphere(radius, level=4))
    assert report.area == pytest.approx(4 * math.pi * math.sin(radius) ** 2, rel=1e-2)
    assert report.willmore == pytest.approx(SPHERE_W, rel=2e-2)


def test_clifford_torus_area_and_energy():
    report = discrete.willmore(clifford_torus(32))
    assert report.area == pytest.approx(CLIFFORD_AREA, rel=1e-2)
    assert report.willmore == pytest.approx(CLIFFORD_AREA, rel=1e-2)
    assert report.max_abs_curvature < 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_directional_derivatives(seed):
    rng = np.random.default_rng(seed)
    mesh = jiggle(octahedron_sphere(1), 0.02, rng)
    X, F = mesh.vertices, mesh.faces
    d = tangent_project(X, rng.normal(size=X.shape))

    g_area = discrete.area_gradient(mesh)
    expected = _directional_fd(lambda Y: discrete.area_value(Y, F), X, d)
    assert float(np.sum(g_area * d)) == pytest.approx(expected, rel=1e-4)

    g_will = discrete.willmore_gradient(mesh, mode="autodiff")
    expected = _directional_fd(lambda Y: discrete.willmore_value(Y, F), X, d)
    assert float(np.sum(g_will * d)) == pytest.approx(expected, rel=1e-4)


def test_finite_difference_gradient_agrees_with_autodiff(bumpy_sphere):
    exact = discrete.willmore_gradient(bumpy_sphere, mode="autodiff")
    approx = discrete.willmore_gradient(bumpy_sphere, mode="fd")
    assert np.allclose(exact, approx, atol=1e-6)


def test_gradients_are_tangent(bumpy_sphere):
    X = bumpy_sphere.vertices
    for g in (discrete.area_gradient(bumpy_sphere), discrete.willmore_gradient(bumpy_sphere)):
        assert np.max(np.abs(np.sum(g * X, axis=1))) < 1e-12


def test_cotan_stiffness_reproduces_area_gradient(bumpy_sphere):
    X, F = bumpy_sphere.vertices, bumpy_sphere.faces
    L = discrete.cotan_stiffness(bumpy_sphere)
    raw = kernels.area_gradient_raw(np, X, F, kernels.face_geometry(np, X, F))
    assert np.allclose(L @ X, raw, atol=1e-12)
    assert np.allclose(L @ np.ones(len(X)), 0.0, atol=1e-12)


def test_energy_report_with_gradient(bumpy_sphere):
    report = discrete.willmore(bumpy_sphere, with_gradient=True)
    assert report.willmore == pytest.approx(discrete.willmore_value(bumpy_sphere.vertices, bumpy_sphere.faces))
    assert report.gradient_norm > 0.0
    data = report.to_dict()
    assert "mean_curvature" not in data
    assert set(data) == {"area", "willmore", "gradient_norm", "max_abs_curvature"}


def test_open_meshes_are_rejected():
    sphere = octahedron_sphere(1)
    upper = sphere.faces[np.all(sphere.vertices[sphere.faces][:, :, 2] >= 0.0, axis=1)]
    cap = TriMesh(sphere.vertices, upper)
    assert not cap.is_closed
    with pytest.raises(PreconditionError):
        discrete.mean_curvature(cap)
    with pytest.raises(PreconditionError):
        discrete.willmore(cap)
    assert discrete.mean_curvature(cap, allow_boundary=True).shape == (sphere.n_vertices,)


def test_unknown_gradient_mode(bumpy_sphere):
    with pytest.raises(PreconditionError):
        discrete.willmore_gradient(bumpy_sphere, mode="spectral")


def _orthogonal_maps(seed: int):
    rotation = special_ortho_group.rvs(4, random_state=seed)
    reflection = np.diag([-1.0, 1.0, 1.0, 1.0]) @ rotation
    return rotation, reflection


@pytest.mark.parametrize("seed", range(5))
def test_willmore_energy_is_isometry_invariant(bumpy_sphere, seed):
    X, F = bumpy_sphere.vertices, bumpy_sphere.faces
    W = discrete.willmore_value(X, F)
    for Q in _orthogonal_maps(seed):
        assert discrete.willmore_value(X @ Q.T, F) == pytest.approx(W, rel=1e-12)
        assert discrete.area_value(X @ Q.T, F) == pytest.approx(discrete.area_value(X, F), rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_willmore_gradient_is_equivariant(bumpy_sphere, seed):
    grad = discrete.willmore_gradient(bumpy_sphere, mode="autodiff")
    for Q in _orthogonal_maps(seed):
        moved = bumpy_sphere.with_vertices(bumpy_sphere.vertices @ Q.T)
        assert np.allclose(discrete.willmore_gradient(moved, mode="autodiff"), grad @ Q.T, atol=1e-10)


def test_gradient_of_symmetric_mesh_commutes_with_the_group(rng):
    group = build_named_group(GroupName.R, 1, 1)
    torus = clifford_torus(8)
    torus = torus.with_orbit_map(compute_orbit_map(torus, group))
    mesh = symmetrize(jiggle(torus, 0.01, rng), group)
    grad = discrete.willmore_gradient(mesh, mode="autodiff")
    assert np.max(np.abs(grad)) > 1e-6
    images = mesh.orbit_map.images
    for c, M in enumerate(group.matrices):
        assert np.allclose(grad[images[:, c]], grad @ M.T, atol=1e-10)


def test_great_sphere_energy_converges_from_below():
    errors = []
    for level in range(2, 6):
        report = discrete.willmore(octahedron_sphere(level))
        assert report.willmore == pytest.approx(report.area, abs=1e-9)
        assert report.willmore < SPHERE_W
        errors.append(SPHERE_W - report.willmore)
    assert all(fine < coarse for coarse, fine in zip(errors, errors[1:]))
    assert errors[-1] < 5e-3 * SPHERE_W
