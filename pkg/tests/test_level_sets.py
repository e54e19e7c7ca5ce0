import numpy as np
import pytest

from vflat.errors import PreconditionError, RetentionError
from vflat.instance import Instance, order_columns
from vflat.level_sets import (
    anotinb_filter,
    check_lsm_persistence,
    incremental_lsm_sets,
    integer_rank,
    is_lsm,
    level_set,
    lsm_candidates,
    lsm_downward_closure,
    lsm_mask,
    lsm_ray_exclusion,
    lsm_ray_prefix,
    lsm_saturation,
    lsm_set,
    lsm_step_down,
    relationship_cover,
    strict_downset_max,
)
from vflat.solutions import build_dag
from vflat.value_table import Retention, build_stack


def identity_stack(m: int, bound: int):
    inst = Instance(A=np.eye(m, dtype=int), c=np.ones(m, dtype=int), b=np.full(m, bound))
    return build_stack(inst, Retention.ALL_K)


def test_level_set(stack):
    assert level_set(stack, 6, 3).members == ((1, 1), (2, 1), (3, 1))
    assert (2, 1) in level_set(stack, 6, 3)
    assert len(level_set(stack, 6, 5)) == 0


@pytest.mark.parametrize("k", [3, 4, 5])
def test_corner_is_minimal_on_the_tall_box(tall_stack, k):
    assert (3, 3) in lsm_set(tall_stack, k)
    assert is_lsm(tall_stack, k, (3, 3))


def test_minimal_points_of_final_level(stack):
    assert lsm_set(stack, 6).members() == [(0, 0), (1, 1), (1, 2), (2, 2), (2, 3), (3, 3)]
    assert (2, 1) in lsm_set(stack, 2)
    assert (2, 1) not in lsm_set(stack, 6)


def test_origin_is_the_only_minimal_point_of_z0(stack):
    assert lsm_set(stack, 0).members() == [(0, 0)]


def test_strict_downset_max(stack):
    below = strict_downset_max(stack.box, stack.final)
    box = stack.box
    assert below[0] == -1
    assert below[box.index((3, 3))] == 7
    assert below[box.index((2, 1))] == 3


def test_mask_agrees_with_pointwise_test(stack):
    for k in range(7):
        mask = lsm_mask(stack.box, stack.table(k))
        for i, point in enumerate(stack.box.points()):
            assert bool(mask[i]) == is_lsm(stack, k, point)


def test_persistence_premise_holds(tall_stack, tall_dag):
    result = check_lsm_persistence(tall_stack, tall_dag, 5, (3, 3))
    assert result.premise
    assert result.lsm
    assert result.witnesses == ()


def test_persistence_premise_fails_but_point_stays_minimal(six_column):
    ordered, _ = order_columns(six_column)
    stack = build_stack(ordered, Retention.ALL_K)
    result = check_lsm_persistence(stack, build_dag(stack), 2, (2, 2))
    assert not result.premise
    assert result.lsm
    assert result.witnesses == ((1, 1), (2, 1), (1, 2))


def test_persistence_declines(stack, dag):
    with pytest.raises(PreconditionError):
        check_lsm_persistence(stack, dag, 1, (2, 1))
    with pytest.raises(PreconditionError):
        check_lsm_persistence(stack, dag, 0, (0, 0))


@pytest.mark.parametrize("vectors, rank", [
    ([], 0),
    ([[0, 0]], 0),
    ([[1, 2], [2, 4]], 1),
    ([[2, 1], [1, 2]], 2),
    ([[1, 0, 0], [0, 1, 0], [0, 0, 1]], 3),
    ([[1, 1, 0], [0, 1, 1], [1, 2, 1]], 2),
    ([[3, 6], [2, 4], [1, 3]], 2),
])
def test_integer_rank(vectors, rank):
    assert integer_rank(vectors) == rank


def test_ray_exclusion_declines_when_beta_has_a_last_column_coordinate():
    # beta = a_1 + a_2 is minimal at level 2, so the ray claim cannot be made here
    stack = identity_stack(2, 2)
    with pytest.raises(PreconditionError, match="nonzero a_2 coordinate"):
        lsm_ray_exclusion(stack, 2, (1, 1))
    assert (1, 1) in lsm_set(stack, 2)


def test_ray_exclusion_outside_the_span():
    stack = identity_stack(3, 2)
    excluded = lsm_ray_exclusion(stack, 2, (1, 0, 1))
    assert excluded == [(1, 0, 1), (1, 1, 1), (1, 2, 1)]
    assert all(point not in lsm_set(stack, 2) for point in excluded)


def test_ray_exclusion_crossed_pair(pair_stack):
    with pytest.raises(PreconditionError):
        lsm_ray_exclusion(pair_stack, 2, (3, 1))
    assert (3, 1) not in lsm_set(pair_stack, 2)
    assert (4, 3) not in lsm_set(pair_stack, 2)


def test_ray_exclusion_other_declines(stack, pair_stack):
    with pytest.raises(PreconditionError, match="level-set-minimal"):
        lsm_ray_exclusion(pair_stack, 2, (2, 1))
    with pytest.raises(PreconditionError, match="outside"):
        lsm_ray_exclusion(pair_stack, 3, (3, 1))
    with pytest.raises(PreconditionError, match="linearly dependent"):
        lsm_ray_exclusion(stack, 3, (3, 1))


def test_step_down_to_previous_level(tall_stack, tall_dag):
    assert lsm_step_down(tall_stack, tall_dag, 3, (3, 3)) == (2, 1)
    with pytest.raises(PreconditionError):
        lsm_step_down(tall_stack, tall_dag, 6, (2, 1))


def test_downward_closure(tall_stack, tall_dag):
    closure = lsm_downward_closure(tall_stack, tall_dag, 3, (0, 1, 1))
    assert closure == [(0, 0), (2, 1), (1, 2)]


def test_downward_closure_trivial_cases(stack, dag):
    assert lsm_downward_closure(stack, dag, 6, (0,) * 6) == []
    assert lsm_downward_closure(stack, dag, 6, (0, 0, 0, 1, 0, 0)) == [(0, 0)]
    with pytest.raises(PreconditionError):
        lsm_downward_closure(stack, dag, 6, (1, 0, 0, 0, 0, 0))


def test_ray_prefix(stack, pair_stack):
    assert lsm_ray_prefix(stack, 6, (0, 0), 1) == [(0, 0), (2, 2)]
    assert lsm_ray_prefix(stack, 6, (1, 1), 0) == [(1, 1)]
    assert lsm_ray_prefix(pair_stack, 1, (0, 0), 2) == [(0, 0), (2, 1), (4, 2)]


def test_ray_prefix_declines(stack):
    with pytest.raises(PreconditionError):
        lsm_ray_prefix(stack, 6, (2, 1), 0)
    with pytest.raises(PreconditionError):
        lsm_ray_prefix(stack, 6, (2, 2), 1)


def test_crossed_pair_first_level(pair_stack):
    assert lsm_set(pair_stack, 1).members() == [(0, 0), (2, 1), (4, 2)]


def test_relationship_cover(stack, dag):
    for k in range(1, 7):
        report = relationship_cover(stack, dag, k)
        assert report.holds
        assert set(report.witnesses) == set(lsm_set(stack, k).members())
    assert relationship_cover(stack, dag, 6).witnesses[(3, 3)] == ((1, 1), 1)


def test_relationship_cover_needs_all_levels(six_column):
    stack = build_stack(six_column, Retention.FINAL_ONLY)
    with pytest.raises(RetentionError):
        relationship_cover(stack, None, 6)


def test_saturation():
    inst = Instance(A=np.array([[1]]), c=np.array([1]), b=np.array([4]))
    assert lsm_saturation(build_stack(inst)) == 1
    origin_only = Instance(A=np.array([[1], [1]]), c=np.array([1]), b=np.array([0, 0]))
    assert lsm_saturation(build_stack(origin_only)) == 0


def test_saturation_absent(stack):
    assert lsm_saturation(stack) is None


def test_column_filter(stack, dag):
    report = anotinb_filter(stack, dag, 6)
    assert report.excluded_columns == [1, 4]
    assert report.points_examined == 6


def test_incremental_sets_match_direct_scan(stack):
    sets = incremental_lsm_sets(stack)
    assert len(sets) == 7
    for built in sets:
        assert np.array_equal(built.mask, lsm_set(stack, built.k).mask)


def test_candidates_cover_the_next_level(pair_stack):
    candidates = lsm_candidates(pair_stack, 2)
    assert (candidates | ~lsm_set(pair_stack, 2).mask).all()
