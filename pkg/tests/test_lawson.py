import math

import numpy as np
import pytest

from app.domain.errors import PreconditionError
from app.geometry.symmetry import GroupName
from app.lawson.surface import (
    AreaEstimate,
    LawsonVariant,
    _cyclic_runs,
    assemble,
    build,
    build_ladder,
    intersection_diagnostics,
    plateau_centers,
    richardson,
    tile_census,
    verify,
)
from app.mesh.operations import invariance_deviation
from app.mesh.trimesh import genus
from tests.conftest import CLIFFORD_AREA


def test_clifford_surface(xi11):
    assert xi11.mesh.is_closed
    assert genus(xi11.mesh) == 1
    assert xi11.mesh.n_faces == 8 * 2 * 8 ** 2
    assert xi11.area == pytest.approx(CLIFFORD_AREA, rel=3e-2)
    assert xi11.area < CLIFFORD_AREA


def test_clifford_report(xi11):
    report = verify(xi11)
    assert report.ok
    assert report.genus == report.expected_genus == 1
    assert report.invariance_deviation < report.invariance_tol
    assert report.below_8pi is None
    assert report.even_tile_fraction >= 0.95
    data = report.to_dict()
    assert data["ok"] is True and data["genus_ok"] is True


def test_genus_two_surface(xi21):
    assert genus(xi21.mesh) == 2
    assert xi21.mesh.n_faces == 12 * 2 * 8 ** 2
    report = verify(xi21)
    assert report.ok
    assert report.below_8pi is True
    assert report.area < 8 * math.pi


def test_build_is_deterministic(xi11):
    again = build(1, 1, 8)
    assert np.array_equal(again.mesh.vertices, xi11.mesh.vertices)
    assert np.array_equal(again.mesh.faces, xi11.mesh.faces)


def test_census_puts_faces_in_even_tiles(xi21):
    census = tile_census(xi21)
    assert census["faces"] == xi21.mesh.n_faces
    assert census["even"] >= 0.95 * census["faces"]
    assert census["odd"] < census["even"]


@pytest.mark.parametrize("variant", [LawsonVariant.ODD, LawsonVariant.DUAL, LawsonVariant.DUAL_ODD])
def test_variants_are_congruent_and_invariant(xi21, variant):
    surface = assemble(xi21.plateau, 2, 1, variant)
    assert surface.variant is variant
    assert surface.area == pytest.approx(xi21.area, rel=1e-12)
    assert genus(surface.mesh) == 2
    assert invariance_deviation(surface.mesh, surface.group(GroupName.G_HAT)) < 1e-7
    assert verify(surface).ok


def test_odd_companion_occupies_odd_tiles(xi21):
    odd = assemble(xi21.plateau, 2, 1, "odd")
    census = tile_census(odd)
    assert census["odd"] >= 0.95 * census["faces"]
    assert verify(odd).even_tile_fraction >= 0.95
    assert verify(assemble(xi21.plateau, 2, 1, "dual")).even_tile_fraction is None


def test_intersections_with_the_named_circles(xi21):
    report = intersection_diagnostics(xi21)
    assert report.by_name("gamma").crossings == 4
    assert report.by_name("gamma_perp").crossings == 6
    halfturn_circles = report.family("gamma")
    assert len(halfturn_circles) == 2 * 3
    assert all(c.contained for c in halfturn_circles)
    with pytest.raises(KeyError):
        report.by_name("gamma_9,9")


def test_crossings_count_sampled_runs(xi21):
    report = intersection_diagnostics(xi21, samples=512)
    assert report.band == pytest.approx(xi21.mesh.mean_edge_length())
    for circle in report.circles:
        assert circle.samples == 512
        if circle.contained:
            assert circle.crossings == 0

    assert _cyclic_runs(np.array([True, True, False, False, True])) == 1
    assert _cyclic_runs(np.array([True, False, True, False])) == 2
    assert _cyclic_runs(np.ones(6, dtype=bool)) == 0
    assert _cyclic_runs(np.zeros(6, dtype=bool)) == 0


def test_dual_surface_contains_the_dual_circles(xi21):
    report = intersection_diagnostics(assemble(xi21.plateau, 2, 1, "dual"))
    assert all(c.contained for c in report.family("gamma*"))
    assert report.by_name("gamma_0,0").max_distance > report.by_name("gamma*_0,0").max_distance


def test_plateau_centers(xi21):
    centers = plateau_centers(xi21)
    assert centers.counts == {"A+": 6, "A-": 6}
    assert np.allclose(np.linalg.norm(centers.plus, axis=1), 1.0)
    assert centers.to_dict()["counts"] == {"A+": 6, "A-": 6}


def test_richardson_removes_second_order_error():
    limit, c = 20.0, -30.0
    values = {n: limit + c / n ** 2 for n in (8, 16, 32)}
    estimate = richardson(values)
    assert estimate.extrapolated == pytest.approx(limit, abs=1e-12)
    assert estimate.observed_order == pytest.approx(2.0)
    assert estimate.monotone and estimate.direction == "increasing"
    assert estimate.raw == [values[8], values[16], values[32]]
    assert estimate.estimate.error == pytest.approx(abs(values[32] - values[16]) / 3.0)


def test_richardson_needs_doubling_levels():
    with pytest.raises(PreconditionError):
        richardson({8: 1.0})
    with pytest.raises(PreconditionError):
        richardson({8: 1.0, 12: 1.1})
    assert richardson({8: 1.0, 16: 1.2, 32: 1.1}).direction == "mixed"


def test_area_estimate_comparisons():
    a = AreaEstimate(10.0, 0.1)
    b = AreaEstimate(9.5, 0.1)
    assert a.exceeds(b) and not b.exceeds(a)
    assert not a.exceeds(AreaEstimate(9.85, 0.1))
    assert a.below(10.2) and not a.below(10.05)


def test_invalid_build_arguments():
    with pytest.raises(PreconditionError):
        build(1, 1, 9)
    with pytest.raises(PreconditionError):
        build(1, 1, 6)
    with pytest.raises(PreconditionError):
        build(1, 2, 8)
    with pytest.raises(ValueError):
        build(1, 1, 8, variant="mirror")


# ==============================================================
# ACCEPTANCE
# ==============================================================

@pytest.mark.slow
def test_clifford_ladder():
    ladder = build_ladder(1, 1, (8, 16, 32))
    assert genus(ladder.finest.mesh) == 1
    assert ladder.areas[32] == pytest.approx(CLIFFORD_AREA, rel=1e-2)
    assert ladder.richardson.extrapolated == pytest.approx(CLIFFORD_AREA, rel=2e-3)
    assert ladder.richardson.monotone


@pytest.mark.slow
@pytest.mark.parametrize("m,k", [(2, 1), (3, 1), (2, 2)])
def test_lawson_genus_and_area_bounds(m, k):
    ladder = build_ladder(m, k, (8, 16, 32))
    report = verify(ladder.finest, ladder.richardson.estimate)
    assert report.genus == m * k
    assert report.below_4pi_bound
    if k == 1:
        assert report.below_8pi is True
    assert report.ok


@pytest.mark.slow
def test_product_surface_beats_the_k1_surface():
    xi22 = build_ladder(2, 2, (8, 16, 32)).richardson.estimate
    xi41 = build_ladder(4, 1, (8, 16, 32)).richardson.estimate
    assert xi22.exceeds(xi41)
