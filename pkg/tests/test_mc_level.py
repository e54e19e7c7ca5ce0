from decimal import Decimal

import pytest

from vflat.errors import DifferentComponentsError, OutsideBoxError, PreconditionError, PropertyViolation
from vflat.instance import load_instance
from vflat.mc_level import (
    adjacent_path,
    common_optima,
    component_of,
    hypercube_cover,
    isovalue_path,
    label_components,
    lsm_chain,
    lsm_frontier,
    segment_check,
    step_down_component,
)
from vflat.solutions import build_dag
from vflat.value_table import Retention, build_stack

from tests.conftest import SIX_COLUMN, relabelled


def D(*values):
    return tuple(Decimal(str(v)) for v in values)


def test_components_of_six_column(cmap):
    assert len(cmap.components) == 6
    zero, row = cmap.component(0), cmap.component(1)
    assert zero.value == 0
    assert zero.members == ((0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (0, 2), (0, 3))
    assert zero.boundary_axes == (0, 1)
    assert row.value == 3
    assert row.members == ((1, 1), (2, 1), (3, 1))
    assert row.minimal_members == ((1, 1),)
    assert row.boundary_axes == (0,)
    assert row.boundary_touching
    assert (2, 1) in row


def test_component_ids_follow_flat_order(cmap):
    assert [c.members[0] for c in cmap.components] == [(0, 0), (1, 1), (1, 2), (2, 2), (2, 3), (3, 3)]
    assert cmap.component(2).members == ((1, 2), (1, 3))
    assert cmap.component(3).members == ((2, 2), (3, 2))


def test_labels_are_read_only(cmap):
    with pytest.raises(ValueError):
        cmap.labels[0] = 3


def test_component_of_decimal_points(cmap):
    assert component_of(cmap, ["1.5", "1.2"]) == 1
    assert component_of(cmap, [Decimal("3"), Decimal("1.99")]) == 1
    with pytest.raises(OutsideBoxError):
        component_of(cmap, ["-0.1", "1"])
    with pytest.raises(OutsideBoxError):
        component_of(cmap, ["4.2", "1"])


def test_unknown_component(cmap):
    with pytest.raises(PreconditionError):
        cmap.component(99)


def test_adjacent_path(cmap):
    path = adjacent_path(cmap, (1, 1), (3, 1))
    assert path.points == ((1, 1), (2, 1), (3, 1))
    assert adjacent_path(cmap, (2, 1), (2, 1)).points == ((2, 1),)


def test_adjacent_path_across_components(cmap):
    with pytest.raises(DifferentComponentsError):
        adjacent_path(cmap, (1, 1), (1, 2))


def test_isovalue_path(cmap):
    path = isovalue_path(cmap, ["1.5", "1.2"], ["3", "1.8"])
    assert path.head == (D(1.5, 1.2), D(1, 1.2), D(1, 1))
    assert path.points == ((1, 1), (2, 1), (3, 1))
    assert path.tail == (D(3, 1), D(3, 1.8))
    assert path.steps() == [D(1.5, 1.2), D(1, 1.2), D(1, 1), (2, 1), D(3, 1), D(3, 1.8)]


def test_isovalue_path_same_point(cmap):
    path = isovalue_path(cmap, ["2.5", "1.5"], ["2.5", "1.5"])
    assert path.steps() == [D(2.5, 1.5)]


def test_isovalue_path_across_components(cmap):
    with pytest.raises(DifferentComponentsError):
        isovalue_path(cmap, ["1.5", "1.5"], ["1.5", "2.5"])


def test_hypercube_cover(cmap, caplog):
    cover = hypercube_cover(cmap, 1)
    assert cover.anchors == ((1, 1), (2, 1), (3, 1))
    assert cover.truncated_anchors == ((3, 1),)
    assert cover.certificate == ((1, 1), (2, 1), (3, 1))
    assert "cover is truncated" in caplog.text


def test_hypercube_cover_singleton(cmap):
    cover = hypercube_cover(cmap, 4)
    assert cover.anchors == ((2, 3),)
    assert cover.certificate == ()


def test_hypercube_cover_rejects_foreign_pair(cmap):
    with pytest.raises(PreconditionError):
        hypercube_cover(cmap, 1, pair=((1, 1), (1, 2)))


def test_frontier(cmap, stack):
    assert lsm_frontier(cmap, stack, 1) == ((1, 1),)
    assert lsm_frontier(cmap, stack, 3) == ((2, 2),)
    for component in cmap.components:
        assert lsm_frontier(cmap, stack, component.id) == component.minimal_members


def test_frontier_reports_equal_valued_outsider(cmap, stack):
    # (3,2) has the value of (2,2) but is moved out of its component
    broken = relabelled(cmap, {(3, 2): 5})
    with pytest.raises(PropertyViolation) as excinfo:
        lsm_frontier(broken, stack, 3)
    assert excinfo.value.witness == {"k": 6, "component": 3, "beta": [3, 2], "frontier": [2, 2]}


def test_frontier_reports_uncovered_member(cmap, stack):
    broken = relabelled(cmap, {(3, 0): 2})
    with pytest.raises(PropertyViolation, match="dominates no frontier point") as excinfo:
        lsm_frontier(broken, stack, 2)
    assert excinfo.value.witness["beta"] == [3, 0]
    assert excinfo.value.witness["frontier"] == [[1, 2]]


def test_crossed_pair_frontier_and_chain(pair_cmap, pair_stack):
    component_id = pair_cmap.label((2, 1))
    assert pair_cmap.component(component_id).value == 1
    assert lsm_frontier(pair_cmap, pair_stack, component_id) == ((2, 1), (1, 2))
    chain = lsm_chain(pair_cmap, pair_stack, (2, 1), (1, 2))
    assert chain.points == ((2, 1), (1, 2))
    assert chain.witnesses == ((2, 2),)


def test_chain_needs_frontier_points(pair_cmap, pair_stack):
    with pytest.raises(PreconditionError):
        lsm_chain(pair_cmap, pair_stack, (2, 1), (2, 2))


def test_common_optima_crossed_pair(pair_cmap, pair_stack, pair_dag):
    entries = common_optima(pair_cmap, pair_stack, pair_dag, pair_cmap.label((2, 1)))
    by_base = {entry.base: entry for entry in entries}
    assert set(by_base) == {(2, 1), (1, 2)}
    assert by_base[(2, 1)].optima.vectors() == {(1, 0)}
    assert by_base[(1, 2)].optima.vectors() == {(0, 1)}
    assert (2, 2) in by_base[(2, 1)].region
    assert all(p[0] >= 2 and p[1] >= 1 for p in by_base[(2, 1)].region)


def test_wide_box_row_component():
    inst = load_instance(SIX_COLUMN, b_override=[6, 6])
    stack = build_stack(inst, Retention.ALL_K)
    cmap = label_components(stack)
    component = cmap.component(cmap.label((1, 1)))
    assert component.value == 3
    assert component.members == tuple((v, 1) for v in range(1, 7))
    assert component.boundary_axes == (0,)
    assert lsm_frontier(cmap, stack, component.id) == ((1, 1),)
    (entry,) = common_optima(cmap, stack, build_dag(stack), component.id)
    assert entry.optima.vectors() == {(0, 0, 0, 1, 0, 0)}
    assert len(entry.region) == 6


@pytest.mark.parametrize("beta, lowered", [((2, 1), (1, 0)), ((3, 1), (2, 0))])
def test_step_down_component(cmap, stack, dag, beta, lowered):
    result = step_down_component(cmap, stack, dag, (1, 1), beta, 3, 1)
    assert result == (lowered, (0, 0))
    assert cmap.label(lowered) == cmap.label((0, 0)) == 0


def test_step_down_component_preconditions(cmap, stack, dag):
    with pytest.raises(PreconditionError, match="positive"):
        step_down_component(cmap, stack, dag, (0, 0), (1, 0), 3, 1)
    with pytest.raises(PreconditionError):
        step_down_component(cmap, stack, dag, (1, 1), (2, 1), 0, 1)
    with pytest.raises(PreconditionError):
        step_down_component(cmap, stack, dag, (1, 1), (1, 2), 3, 1)
    with pytest.raises(PreconditionError, match="level-set-minimal"):
        step_down_component(cmap, stack, dag, (2, 1), (3, 1), 3, 1)


def test_segment_check(cmap, stack):
    assert segment_check(cmap, stack, (1, 1), (3, 1))
    assert segment_check(cmap, stack, ["1.5", "1"], ["3", "1.9"])
    with pytest.raises(PreconditionError, match="different values"):
        segment_check(cmap, stack, (1, 1), (1, 2))
    with pytest.raises(PreconditionError, match="does not dominate"):
        segment_check(cmap, stack, (2, 1), (1, 1))
