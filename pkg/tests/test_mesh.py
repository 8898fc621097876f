import math

import numpy as np
import pytest

from app.domain.errors import MissingOrbitMapError, PreconditionError, TopologyError
from app.geometry.symmetry import GroupName, build_named_group
from app.mesh import io as mesh_io
from app.mesh.diagnostics import (
    min_angle_degrees,
    min_edge_length,
    min_separation_diagnostic,
    shortest_handle_loop,
)
from app.mesh.operations import compute_orbit_map, refine, symmetrize, symmetry_deviation, weld
from app.mesh.primitives import clifford_torus, grid_faces, octahedron_sphere, torus_grid
from app.mesh.trimesh import (
    TriMesh,
    boundary_loops,
    euler_characteristic,
    genus,
    is_orientable,
    orient,
    vertex_components,
)
from tests.conftest import jiggle


def _flat_patch(n: int) -> TriMesh:
    """n x n grid disk around (1, 0, 0, 0)."""
    s = np.linspace(-0.3, 0.3, n)
    u, v = np.meshgrid(s, s, indexing="xy")
    X = np.column_stack([np.ones(n * n), u.ravel(), v.ravel(), np.zeros(n * n)])
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return TriMesh(X, grid_faces(n, n))


@pytest.mark.parametrize("level", [0, 1, 2])
def test_octahedron_sphere_counts(level):
    mesh = octahedron_sphere(level)
    assert mesh.n_faces == 8 * 4 ** level
    assert mesh.n_vertices == 4 * 4 ** level + 2
    assert mesh.is_closed
    assert euler_characteristic(mesh) == 2
    assert genus(mesh) == 0
    assert np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0)


def test_clifford_torus_topology():
    mesh = clifford_torus(8)
    assert mesh.n_vertices == 64 and mesh.n_faces == 128
    assert genus(mesh) == 1
    assert is_orientable(mesh)
    assert vertex_components(mesh) == 1


def test_open_patch_has_one_boundary_loop():
    mesh = _flat_patch(5)
    assert not mesh.is_closed
    loops = boundary_loops(mesh)
    assert len(loops) == 1 and len(loops[0]) == 16
    assert int(mesh.boundary_flags.sum()) == 16
    with pytest.raises(TopologyError):
        genus(mesh)


def test_orient_repairs_flipped_faces():
    mesh = octahedron_sphere(1)
    faces = mesh.faces.copy()
    faces[::3] = faces[::3][:, [0, 2, 1]]
    repaired = orient(TriMesh(mesh.vertices, faces))
    assert genus(repaired) == 0
    assert is_orientable(repaired)


def test_refine_keeps_vertices_on_the_sphere():
    fine = refine(octahedron_sphere(0))
    assert fine.n_faces == 32
    assert np.allclose(np.linalg.norm(fine.vertices, axis=1), 1.0)


def test_refine_keeps_topology():
    for mesh in (octahedron_sphere(1), clifford_torus(8)):
        fine = refine(mesh)
        assert fine.n_faces == 4 * mesh.n_faces
        assert euler_characteristic(fine) == euler_characteristic(mesh)
        assert genus(fine) == genus(mesh)
        assert is_orientable(fine)


def test_refine_doubles_boundary_loops():
    patch = _flat_patch(5)
    fine = refine(patch)
    coarse_loops, fine_loops = boundary_loops(patch), boundary_loops(fine)
    assert len(fine_loops) == len(coarse_loops) == 1
    assert len(fine_loops[0]) == 2 * len(coarse_loops[0])
    assert int(fine.boundary_flags.sum()) == 2 * int(patch.boundary_flags.sum())
    assert euler_characteristic(fine) == 1


def test_weld_merges_duplicated_vertices():
    mesh = octahedron_sphere(0)
    V = np.vstack([mesh.vertices, mesh.vertices + 1e-12])
    F = mesh.faces.copy()
    F[4:] += mesh.n_vertices
    welded = weld(V, F, 1e-9)
    assert welded.n_vertices == 6
    assert welded.is_closed


def test_invalid_faces_are_rejected():
    with pytest.raises(PreconditionError):
        TriMesh(np.eye(4), np.array([[0, 1, 7]]))
    with pytest.raises(PreconditionError):
        TriMesh(np.eye(4), np.array([[0, 1, 1]]))


def test_symmetrize_restores_exact_invariance(rng):
    group = build_named_group(GroupName.R, 1, 1)
    torus = clifford_torus(8)
    torus = torus.with_orbit_map(compute_orbit_map(torus, group))
    assert symmetry_deviation(torus, group) < 1e-12

    noisy = jiggle(torus, 0.01, rng)
    assert symmetry_deviation(noisy, group) > 1e-4
    fixed = symmetrize(noisy, group)
    assert symmetry_deviation(fixed, group) < 1e-12
    assert np.allclose(np.linalg.norm(fixed.vertices, axis=1), 1.0)


def _invariant_torus(group):
    torus = clifford_torus(8)
    return torus.with_orbit_map(compute_orbit_map(torus, group))


def test_symmetrize_fixes_invariant_meshes():
    group = build_named_group(GroupName.R, 1, 1)
    torus = _invariant_torus(group)
    assert np.max(np.abs(symmetrize(torus, group).vertices - torus.vertices)) < 1e-12


def test_symmetrize_is_idempotent(rng):
    group = build_named_group(GroupName.R, 1, 1)
    once = symmetrize(jiggle(_invariant_torus(group), 0.01, rng), group)
    twice = symmetrize(once, group)
    assert np.max(np.abs(twice.vertices - once.vertices)) < 1e-12


def test_symmetrize_moves_vertices_at_most_the_orbit_spread(rng):
    group = build_named_group(GroupName.R, 1, 1)
    noisy = jiggle(_invariant_torus(group), 0.01, rng)
    X = noisy.vertices
    # g^-1 x_{g(v)} for every vertex and group element
    pulled = np.einsum("vgi,gij->vgj", X[noisy.orbit_map.images], group.matrices)
    spread = np.max(np.linalg.norm(pulled - X[:, None, :], axis=2), axis=1)
    moved = np.linalg.norm(symmetrize(noisy, group).vertices - X, axis=1)
    assert np.all(spread > 0.0)
    # projecting back to S^3 can add O(spread^3)
    assert np.all(moved <= 1.01 * spread)


def test_symmetrize_needs_an_orbit_map():
    group = build_named_group(GroupName.R, 1, 1)
    with pytest.raises(MissingOrbitMapError):
        symmetrize(clifford_torus(8), group)


def test_orbit_map_rejects_non_invariant_vertex_sets():
    group = build_named_group(GroupName.R, 2, 1)
    with pytest.raises(MissingOrbitMapError):
        compute_orbit_map(clifford_torus(8), group)


def test_quality_diagnostics():
    mesh = octahedron_sphere(0)
    assert min_angle_degrees(mesh) == pytest.approx(60.0)
    assert min_edge_length(mesh) == pytest.approx(math.sqrt(2.0))
    assert min_separation_diagnostic(clifford_torus(16)) > 0.0


def test_handle_loops():
    assert shortest_handle_loop(octahedron_sphere(2)) == math.inf
    neck = shortest_handle_loop(torus_grid(16, 16))
    assert 3.0 < neck < 10.0
    thin = shortest_handle_loop(torus_grid(16, 16, r1=0.2))
    assert thin < neck
    with pytest.raises(TopologyError):
        shortest_handle_loop(_flat_patch(4))


def test_export_formats(tmp_path):
    mesh = clifford_torus(6)
    off = mesh_io.save_mesh(tmp_path / "torus.off", mesh)
    assert off.read_text(encoding="utf-8").startswith("OFF\n36 72 108\n")
    assert (tmp_path / "torus.csv").read_text(encoding="utf-8").splitlines()[0] == "x,y,z,w"
    loaded = mesh_io.load_mesh4(off)
    assert np.array_equal(loaded.faces, mesh.faces)
    assert np.allclose(loaded.vertices, mesh.vertices, atol=1e-15)

    obj = mesh_io.save_mesh(tmp_path / "torus.obj", mesh)
    lines = obj.read_text(encoding="utf-8").splitlines()
    assert sum(line.startswith("v ") for line in lines) == 36
    assert sum(line.startswith("f ") for line in lines) == 72

    npz = mesh_io.save_mesh(tmp_path / "torus.npz", mesh)
    assert np.array_equal(mesh_io.load_mesh4(npz).vertices, mesh.vertices)
    with pytest.raises(PreconditionError):
        mesh_io.save_mesh(tmp_path / "torus.ply", mesh)


def test_stereographic_projection_is_finite_away_from_the_pole():
    Y = mesh_io.stereographic(clifford_torus(8).vertices, pole=(0.0, 0.0, 0.0, 1.0))
    assert Y.shape == (64, 3)
    assert np.all(np.isfinite(Y))
