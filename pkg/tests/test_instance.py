import json

import numpy as np
import pytest

from vflat.errors import InstanceError, RetentionError
from vflat.instance import (
    ColumnCase,
    Instance,
    classify_columns,
    dominance_violations,
    load_instance,
    order_columns,
    parse_instance,
    validate,
)
from vflat.value_table import Retention, build_stack

from tests.conftest import SIX_COLUMN


def document(**overrides) -> str:
    data = {"name": "t", "A": [[1, 2], [2, 1]], "c": [1, 1], "b": [3, 3]}
    data.update(overrides)
    return json.dumps(data)


def test_load_six_column():
    inst = load_instance(SIX_COLUMN)
    assert (inst.m, inst.n) == (2, 6)
    assert inst.name == "six_column"
    assert inst.b.tolist() == [3, 4]
    assert inst.column(2) == (1, 2)
    assert inst.c.tolist() == [2, 3, 4, 3, 3, 6]


def test_b_override():
    inst = load_instance(SIX_COLUMN, b_override=[3, 3])
    assert inst.b.tolist() == [3, 3]


def test_arrays_are_read_only(six_column):
    with pytest.raises(ValueError):
        six_column.A[0, 0] = 5


def test_name_is_optional():
    inst = parse_instance(json.dumps({"A": [[1]], "c": [1], "b": [2]}))
    assert inst.name == ""


@pytest.mark.parametrize("text, message", [
    ("{not json", "malformed document"),
    ("[1, 2]", "expected a single object"),
    (document(extra=1), "unknown keys"),
    (json.dumps({"A": [[1]], "c": [1]}), "missing keys"),
    (document(A=[[1, 2], [2]]), "rows of A have different lengths"),
    (document(c=[1]), "c has 1 entries"),
    (document(b=[3]), "b has 1 entries"),
    (document(c=[1, 1.5]), "non-integer entry in c"),
    (document(c=[1, True]), "non-integer entry in c"),
    (document(b=[3, "3"]), "non-integer entry in b"),
    (document() + " []", "malformed document"),
])
def test_malformed_documents(text, message):
    with pytest.raises(InstanceError, match=message):
        parse_instance(text)


@pytest.mark.parametrize("overrides, code", [
    ({"A": [[1, -2], [2, 1]]}, "negative constraint entry"),
    ({"A": [[1, 0], [2, 0]]}, "zero column"),
    ({"A": [[4, 2], [2, 1]]}, "column exceeds b"),
    ({"c": [1, -1]}, "negative objective coefficient"),
])
def test_assumption_violations_carry_a_report(overrides, code):
    with pytest.raises(InstanceError) as excinfo:
        parse_instance(document(**overrides))
    report = excinfo.value.report
    assert not report.passed
    assert [v.code for v in report.issues] == [code]


def test_negative_bound_also_fails_column_fit():
    with pytest.raises(InstanceError) as excinfo:
        parse_instance(document(b=[3, -1]))
    assert [v.code for v in excinfo.value.report.issues] == ["negative bound", "column exceeds b"]


def test_validation_collects_every_issue():
    inst = Instance(A=np.array([[0, 5]]), c=np.array([-1, 1]), b=np.array([3]))
    report = validate(inst)
    assert {v.code for v in report.issues} == {
        "zero column", "column exceeds b", "negative objective coefficient",
    }
    assert report.issues[0].indices == [0]
    assert "zero column" in report.describe()


def test_valid_instance_report_passes(six_column):
    report = validate(six_column)
    assert report.passed
    assert report.describe() == "instance is valid"


def test_order_columns_six_column(six_column):
    ordered, permutation = order_columns(six_column)
    assert permutation == [0, 3, 2, 1, 4, 5]
    assert ordered.columns() == [(1, 1), (1, 1), (1, 2), (2, 1), (1, 3), (2, 2)]
    assert ordered.c.tolist() == [2, 3, 4, 3, 3, 6]
    assert dominance_violations(ordered) == []


def test_order_columns_crossed_pair(crossed_pair):
    _, permutation = order_columns(crossed_pair)
    assert permutation == [1, 0]


def test_dominance_violations_found():
    inst = Instance(A=np.array([[2, 1], [2, 1]]), c=np.array([1, 1]), b=np.array([2, 2]))
    assert dominance_violations(inst) == [(0, 1)]
    assert dominance_violations(order_columns(inst)[0]) == []


def test_classify_columns_after_ordering(six_column):
    ordered, permutation = order_columns(six_column)
    stack = build_stack(ordered, Retention.ALL_K)
    classification = classify_columns(ordered, stack, permutation)
    assert classification.tags == [
        ColumnCase.BELOW, ColumnCase.BELOW, ColumnCase.BELOW,
        ColumnCase.EQUAL, ColumnCase.ABOVE, ColumnCase.EQUAL,
    ]
    assert classification.necessary_columns() == [2, 3, 5]
    assert [info.witness for info in classification.columns] == [0, 2, 3, 3, 4, 6]


def test_classify_columns_original_order(stack, six_column):
    classification = classify_columns(six_column, stack)
    third = classification.columns[2]
    assert third.case is ColumnCase.BELOW
    assert third.witness == 2
    assert third.lsm_flag


def test_classify_needs_all_levels(six_column):
    stack = build_stack(six_column, Retention.FINAL_ONLY)
    with pytest.raises(RetentionError):
        classify_columns(six_column, stack)


def test_with_columns_subsets(six_column):
    reduced = six_column.with_columns([2, 3, 5])
    assert reduced.columns() == [(1, 2), (1, 1), (2, 2)]
    assert reduced.c.tolist() == [4, 3, 6]
    assert reduced.b.tolist() == [3, 3]
