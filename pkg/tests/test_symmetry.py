import numpy as np
import pytest

from app.domain.errors import GroupClosureError, PreconditionError
from app.geometry.symmetry import (
    GroupName,
    Isometry,
    build_named_group,
    catalog,
    element_order,
    flip_label,
    generate_group,
    halfturn_gamma,
    index,
    is_normal,
    isometry_from_name,
    predicted_order,
    quarter_rotation,
    quotient_group,
    rotation_RP,
    rotation_RQ,
    verify_lattice,
    verify_order,
)
from app.geometry.tiling import marked_points

PAIRS = [(m, k) for m in range(1, 5) for k in range(1, m + 1)]


@pytest.mark.parametrize("m,k", PAIRS)
def test_named_group_orders(m, k):
    for name, G in catalog(m, k).items():
        assert G.order == predicted_order(name, m, k), name
        assert verify_order(G), name


@pytest.mark.parametrize("m,k", [(1, 1), (2, 1), (3, 2), (4, 4)])
def test_lattice_edges(m, k):
    reports = verify_lattice(m, k)
    assert reports
    for edge in reports:
        assert edge.ok, edge


def test_rotations_over_R_are_index_two_and_normal():
    groups = catalog(3, 2, [GroupName.R, GroupName.R_P, GroupName.R_Q])
    R = groups["R"]
    for name in ("R^P", "R^Q"):
        assert index(R, groups[name]) == 2
        assert is_normal(R, groups[name])


def test_rotation_orders():
    assert element_order(rotation_RP(3), 10) == 4
    assert element_order(rotation_RQ(2), 10) == 3
    assert element_order(halfturn_gamma(1, 2, 3, 2), 10) == 2


def test_quarter_rotation_moves_marked_points_to_their_duals():
    m, k = 3, 2
    pts = marked_points(m, k)
    rq = quarter_rotation(m, k)
    for j in range(2 * k + 2):
        assert np.allclose(rq(pts.p(j)).to_vector(), pts.pstar(j).to_vector())
    for l in range(2 * m + 2):
        assert np.allclose(rq(pts.q(l)).to_vector(), pts.qstar(l).to_vector())


def test_isometry_requires_orthogonal_matrix():
    with pytest.raises(PreconditionError):
        Isometry(2.0 * np.eye(4))


def test_names_parse():
    m, k = 2, 1
    assert isometry_from_name("gamma_1,1", m, k).is_close(halfturn_gamma(1, 1, m, k))
    assert isometry_from_name("R_P", m, k).is_close(rotation_RP(m))
    assert isometry_from_name("1", m, k).is_close(Isometry(np.eye(4)))
    with pytest.raises(PreconditionError):
        isometry_from_name("epsilon", m, k)
    with pytest.raises(PreconditionError):
        isometry_from_name("not-a-generator", m, k)


def test_closure_cap():
    with pytest.raises(GroupClosureError):
        generate_group([rotation_RP(5)], 3)


def test_tilde_quotient_is_klein_four_by_flip_names():
    m, k = 2, 1
    R = build_named_group(GroupName.R, m, k)
    table = quotient_group(build_named_group(GroupName.G_TILDE, m, k), R)
    assert table.order == 4
    assert table.is_elementary_abelian_2()
    assert table.label_set() == {"1", "F1v·F2v", "F1h·F2h", "F1v·F2v·F1h·F2h"}


def test_hat_quotient_is_elementary_abelian_of_order_eight():
    m, k = 3, 1
    table = quotient_group(build_named_group(GroupName.G_HAT, m, k), build_named_group(GroupName.R, m, k))
    assert table.order == 8
    assert table.is_elementary_abelian_2()
    assert len(table.label_set()) == 8


def test_flip_label_of_swap_is_none():
    assert flip_label(isometry_from_name("epsilon", 2, 2), 2, 2) is None
    assert flip_label(rotation_RP(2), 2, 1) == "1"


def test_bar_group_only_for_equal_indices():
    assert build_named_group(GroupName.G_BAR, 2, 2).order == 16 * 9
    with pytest.raises(PreconditionError):
        build_named_group(GroupName.G_BAR, 2, 1)


def test_orders_factor_through_rotation_group():
    for m, k in PAIRS:
        assert predicted_order(GroupName.R, m, k) == (m + 1) * (k + 1)
        assert predicted_order(GroupName.G_HAT, m, k) == 8 * (m + 1) * (k + 1)
