import json
import logging
import os
import tempfile
from typing import Iterable, Sequence

import numpy as np

from vflat.errors import PreconditionError
from vflat.mc_level import ComponentMap
from vflat.value_table import LatticeBox, ValueStack, table_summary

logger = logging.getLogger(__name__)


def atomic_write(path: str, text: str) -> None:
    """Write text to a temp file next to `path`, then rename over it."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_path, path)  # atomic on POSIX
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise


def _csv(header: Sequence[str], rows: Iterable[Sequence[int]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(str(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _beta_header(m: int) -> list[str]:
    return [f"beta_{i + 1}" for i in range(m)]


def value_csv(stack: ValueStack, k: int) -> str:
    """One row per cell in colexicographic order: beta_1..beta_m, k, z_k(beta)."""
    box = stack.box
    table = stack.table(k).tolist()
    coords = box.coords.tolist()
    rows = (point + [k, table[i]] for i, point in enumerate(coords))
    return _csv(_beta_header(box.m) + ["k", "z"], rows)


def read_value_csv(path: str, box: LatticeBox) -> tuple[int, np.ndarray]:
    """Parse a value CSV back into (k, flat table) over `box`."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        expected = _beta_header(box.m) + ["k", "z"]
        if header != expected:
            raise ValueError(f"unexpected header {header}, expected {expected}")
        table = np.zeros(box.cell_count, dtype=np.int64)
        seen = np.zeros(box.cell_count, dtype=bool)
        levels = set()
        for line in f:
            fields = [int(v) for v in line.strip().split(",")]
            *beta, k, z = fields
            index = box.index(box.require(beta))
            table[index] = z
            seen[index] = True
            levels.add(k)
    if len(levels) != 1 or not seen.all():
        raise ValueError(f"{path} does not cover the box at a single level")
    return levels.pop(), table


def component_csv(cmap: ComponentMap, stack: ValueStack) -> str:
    box = cmap.box
    labels = cmap.labels.tolist()
    final = stack.final.tolist()
    rows = (point + [labels[i], final[i]] for i, point in enumerate(box.coords.tolist()))
    return _csv(_beta_header(box.m) + ["component", "z"], rows)


def heatmap_pgm(stack: ValueStack, k: int) -> str:
    """Plain PGM of z_k for m = 2; top row is beta_2 = b_2, gray scaled to 0..255."""
    box = stack.box
    if box.m != 2:
        raise PreconditionError(f"heatmap export needs m = 2, got m = {box.m}")
    grid = stack.grid(k)
    top = int(grid.max())
    # z * 255 leaves int64 for z above about 3.6e16, so scale with Python ints
    gray = grid.astype(object) * 255 // top if top > 0 else np.zeros_like(grid)
    width, height = box.shape
    lines = ["P2", f"{width} {height}", "255"]
    for row in range(height - 1, -1, -1):
        lines.append(" ".join(str(int(v)) for v in gray[:, row]))
    return "\n".join(lines) + "\n"


def export_values(stack: ValueStack, output_dir: str) -> list[str]:
    paths = []
    for k in stack.levels:
        path = os.path.join(output_dir, f"values_k{k}.csv")
        atomic_write(path, value_csv(stack, k))
        paths.append(path)
    logger.info(f"Wrote {len(paths)} value tables to {output_dir}")
    return paths


def export_components(cmap: ComponentMap, stack: ValueStack, output_dir: str) -> str:
    path = os.path.join(output_dir, "components.csv")
    atomic_write(path, component_csv(cmap, stack))
    logger.info(f"Wrote {len(cmap.components)} components to {path}")
    return path


def export_heatmaps(stack: ValueStack, output_dir: str) -> list[str]:
    paths = []
    for k in stack.levels:
        path = os.path.join(output_dir, f"heatmap_k{k}.pgm")
        atomic_write(path, heatmap_pgm(stack, k))
        paths.append(path)
    return paths


def export_summary(stack: ValueStack, output_dir: str) -> str:
    """summary.json without wall-clock fields, so repeated runs write identical bytes."""
    summary = table_summary(stack)
    summary.pop("build_seconds", None)
    path = os.path.join(output_dir, "summary.json")
    atomic_write(path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path

