import json
import os

import numpy as np
import pytest

from vflat.errors import PreconditionError
from vflat.export import (
    atomic_write,
    component_csv,
    export_components,
    export_heatmaps,
    export_summary,
    export_values,
    heatmap_pgm,
    read_value_csv,
    value_csv,
)
from vflat.instance import Instance
from vflat.value_table import Retention, build_stack


def test_value_csv_layout(stack):
    lines = value_csv(stack, 6).splitlines()
    assert lines[0] == "beta_1,beta_2,k,z"
    assert len(lines) == 17
    assert lines[1] == "0,0,6,0"
    # colexicographic: beta_1 varies fastest
    assert lines[2] == "1,0,6,0"
    assert lines[6] == "1,1,6,3"
    assert lines[16] == "3,3,6,9"


def test_value_csv_reads_back(stack, tmp_path):
    path = tmp_path / "values_k3.csv"
    path.write_text(value_csv(stack, 3))
    k, table = read_value_csv(str(path), stack.box)
    assert k == 3
    assert np.array_equal(table, stack.table(3))


def test_read_value_csv_rejects_wrong_header(stack, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y,k,z\n0,0,0,0\n")
    with pytest.raises(ValueError, match="unexpected header"):
        read_value_csv(str(path), stack.box)


def test_read_value_csv_rejects_partial_cover(stack, tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("\n".join(value_csv(stack, 2).splitlines()[:5]) + "\n")
    with pytest.raises(ValueError, match="single level"):
        read_value_csv(str(path), stack.box)


def test_component_csv(stack, cmap):
    lines = component_csv(cmap, stack).splitlines()
    assert lines[0] == "beta_1,beta_2,component,z"
    assert lines[1] == "0,0,0,0"
    assert lines[7] == "2,1,1,3"
    assert lines[16] == "3,3,5,9"


def test_heatmap_pgm(stack):
    assert heatmap_pgm(stack, 6).splitlines() == [
        "P2",
        "4 4",
        "255",
        "0 113 198 255",
        "0 113 170 170",
        "0 85 85 85",
        "0 0 0 0",
    ]


def test_heatmap_of_zero_table(stack):
    rows = heatmap_pgm(stack, 0).splitlines()[3:]
    assert rows == ["0 0 0 0"] * 4


def test_heatmap_scales_values_near_int64_limit():
    inst = Instance(A=np.array([[1], [1]]), c=np.array([4 * 10 ** 18]), b=np.array([2, 1]))
    assert heatmap_pgm(build_stack(inst), 1).splitlines()[3:] == ["0 255 255", "0 0 0"]


def test_heatmap_needs_two_rows():
    inst = Instance(A=np.array([[1, 2]]), c=np.array([1, 3]), b=np.array([4]))
    with pytest.raises(PreconditionError, match="m = 2"):
        heatmap_pgm(build_stack(inst), 2)


def test_atomic_write_replaces_and_cleans_up(tmp_path):
    path = tmp_path / "nested" / "report.json"
    atomic_write(str(path), "first\n")
    atomic_write(str(path), "second\n")
    assert path.read_text() == "second\n"
    assert os.listdir(path.parent) == ["report.json"]


def test_export_values_follows_retention(six_column, tmp_path):
    paths = export_values(build_stack(six_column, Retention.FINAL_ONLY), str(tmp_path))
    assert [os.path.basename(p) for p in paths] == ["values_k6.csv"]
    all_paths = export_values(build_stack(six_column, Retention.ALL_K), str(tmp_path))
    assert len(all_paths) == 7


def test_export_components_and_heatmaps(stack, cmap, tmp_path):
    path = export_components(cmap, stack, str(tmp_path))
    assert os.path.basename(path) == "components.csv"
    heatmaps = export_heatmaps(stack, str(tmp_path))
    assert sorted(os.path.basename(p) for p in heatmaps) == [f"heatmap_k{k}.pgm" for k in range(7)]


def test_summary_is_repeatable(six_column, tmp_path):
    first = export_summary(build_stack(six_column), str(tmp_path / "a"))
    second = export_summary(build_stack(six_column), str(tmp_path / "b"))
    with open(first, "rb") as f, open(second, "rb") as g:
        assert f.read() == g.read()
    with open(first) as f:
        summary = json.load(f)
    assert "build_seconds" not in summary
    assert summary["cell_count"] == 16
    assert summary["value_range"] == [0, 9]
    assert summary["levels_retained"] == [0, 1, 2, 3, 4, 5, 6]
