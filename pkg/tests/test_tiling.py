import math

import numpy as np
import pytest

from app.domain.errors import PreconditionError
from app.geometry.s3 import geodesic_distance
from app.geometry.symmetry import GroupName, build_named_group, isometry_from_name, quarter_rotation
from app.geometry.tiling import (
    Tile,
    TileParity,
    all_tiles,
    dual_quadrilateral,
    fundamental_domain_check,
    marked_points,
    quadrilateral,
    tile_contains,
    tile_count,
    tile_index_of,
    tile_membership,
    tile_permutation,
    tiles_cover_check,
)


def test_marked_points_spacing():
    m, k = 3, 2
    pts = marked_points(m, k)
    assert len(pts.P) == 2 * k + 2 and len(pts.Q) == 2 * m + 2
    assert geodesic_distance(pts.p(0), pts.p(1)) == pytest.approx(math.pi / (k + 1))
    assert geodesic_distance(pts.q(0), pts.q(1)) == pytest.approx(math.pi / (m + 1))
    assert pts.p(0).inner(pts.q(3)) == pytest.approx(0.0, abs=1e-15)
    assert pts.p(2 * k + 2) == pts.p(0)


def test_indices_are_validated():
    with pytest.raises(PreconditionError):
        marked_points(1, 2)
    with pytest.raises(PreconditionError):
        tile_count(0, 0)


@pytest.mark.parametrize("m,k", [(1, 1), (2, 1), (3, 2)])
def test_tiles_cover_the_sphere_once(m, k, rng):
    assert tile_count(m, k) == 4 * (m + 1) * (k + 1) == len(all_tiles(m, k))
    report = tiles_cover_check(m, k, 20_000, rng)
    assert report.ok
    assert report.fraction_covered == 1.0


def test_tile_parity_and_centroid():
    tile = Tile(1, 2, 2, 1)
    assert tile.parity is TileParity.ODD
    assert Tile(1, 3, 2, 1).parity is TileParity.EVEN
    c = tile.centroid()
    assert tile_membership(c[None, :], 1, 2, 2, 1)[0]
    j, l = tile_index_of(c[None, :], 2, 1)
    assert (j[0], l[0]) == (1, 2)


def test_marked_points_sit_on_tile_walls():
    pts = marked_points(2, 1)
    tile = Tile(0, 0, 2, 1)
    for corner in (pts.p(0), pts.p(1), pts.q(0), pts.q(1)):
        assert tile_contains(tile, corner, 2, 1)
    assert not tile_contains(tile, pts.q(3), 2, 1)


def test_fundamental_domain(rng):
    report = fundamental_domain_check(2, 1, 5_000, rng)
    assert report.ok


def test_quadrilateral_sides():
    quad = quadrilateral(0, 0, 2, 1)
    pts = marked_points(2, 1)
    assert quad.vertices == (pts.p(0), pts.q(0), pts.p(1), pts.q(1))
    assert quad.perimeter == pytest.approx(2.0 * math.pi)
    samples = quad.sample(5)
    assert samples.shape == (20, 4)
    assert np.all(tile_membership(samples, 0, 0, 2, 1))


def test_dual_quadrilateral_is_the_quarter_rotated_one():
    m, k = 2, 1
    rq = quarter_rotation(m, k)
    for a, b in zip(quadrilateral(1, 1, m, k).vertices, dual_quadrilateral(1, 1, m, k).vertices):
        assert np.allclose(rq(a).to_vector(), b.to_vector())


def test_tile_permutations_and_parity():
    m, k = 2, 1
    halfturn = tile_permutation(isometry_from_name("gamma_0,0", m, k), m, k)
    assert halfturn.bijective and halfturn.parity_preserving
    mirror = tile_permutation(isometry_from_name("Sigma_P0", m, k), m, k)
    assert mirror.bijective and mirror.parity_reversing


def test_rotation_group_permutes_tiles_freely():
    m, k = 2, 1
    R = build_named_group(GroupName.R, m, k)
    images = {int(tile_permutation(g, m, k).permutation[0]) for g in R.elements}
    assert len(images) == R.order
