from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from decimal import ROUND_FLOOR, Decimal, InvalidOperation
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, Iterator, Sequence

import numpy as np

from vflat.errors import (
    EnumerationCapError,
    OutsideBoxError,
    RetentionError,
    ValueOverflowError,
)

if TYPE_CHECKING:
    from vflat.instance import Instance

logger = logging.getLogger(__name__)

INT64_MAX = int(np.iinfo(np.int64).max)
DEFAULT_ENUMERATION_CAP = 10_000_000


class Retention(str, Enum):
    ALL_K = "all"
    SLIDING = "sliding"
    FINAL_ONLY = "final"


@dataclass(frozen=True)
class LatticeBox:
    """The integer points 0 <= beta <= b, flattened in colexicographic order."""

    b: tuple

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(int(v) for v in self.b))
        if math.prod(v + 1 for v in self.b) > INT64_MAX:
            raise ValueOverflowError(f"cell count of box b={list(self.b)} exceeds the int64 range")

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def shape(self) -> tuple:
        return tuple(v + 1 for v in self.b)

    @property
    def cell_count(self) -> int:
        return math.prod(self.shape)

    @cached_property
    def strides(self) -> tuple:
        strides = []
        acc = 1
        for extent in self.shape:
            strides.append(acc)
            acc *= extent
        return tuple(strides)

    @cached_property
    def coords(self) -> np.ndarray:
        """(cell_count, m) array; row i is the point with flat index i."""
        grid = np.indices(self.shape, dtype=np.int64)
        coords = grid.reshape(self.m, -1, order="F").T.copy()
        coords.setflags(write=False)
        return coords

    def contains(self, beta: Sequence[int]) -> bool:
        return len(beta) == self.m and all(0 <= v <= bi for v, bi in zip(beta, self.b))

    def require(self, beta: Sequence[int]) -> tuple:
        beta = tuple(int(v) for v in beta)
        if not self.contains(beta):
            raise OutsideBoxError(f"point {list(beta)} lies outside the box 0..{list(self.b)}")
        return beta

    def index(self, beta: Sequence[int]) -> int:
        return sum(int(v) * s for v, s in zip(beta, self.strides))

    def point(self, index: int) -> tuple:
        return tuple(int(v) for v in self.coords[index])

    def points(self) -> Iterator[tuple]:
        for i in range(self.cell_count):
            yield self.point(i)

    def fits(self, column: Sequence[int]) -> np.ndarray:
        """Mask of cells beta with column <= beta."""
        return np.all(self.coords >= np.asarray(column, dtype=np.int64), axis=1)

    def grid(self, table: np.ndarray) -> np.ndarray:
        """View a flat table as an m-dimensional array indexed by beta."""
        return table.reshape(self.shape, order="F")


@dataclass(frozen=True, eq=False)
class ValueStack:
    instance: Instance
    box: LatticeBox
    retention: Retention
    tables: dict = field(default_factory=dict)
    build_seconds: float = 0.0

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def levels(self) -> list[int]:
        return sorted(self.tables)

    def retained(self, k: int) -> bool:
        return k in self.tables

    def table(self, k: int) -> np.ndarray:
        if k not in self.tables:
            raise RetentionError(
                f"k={k} not retained (retention={self.retention.value}, levels {self.levels})"
            )
        return self.tables[k]

    @property
    def final(self) -> np.ndarray:
        return self.table(self.n)

    def value(self, k: int, beta: Sequence[int]) -> int:
        beta = self.box.require(beta)
        return int(self.table(k)[self.box.index(beta)])

    def grid(self, k: int) -> np.ndarray:
        return self.box.grid(self.table(k))


def build_stack(inst: Instance, retention: Retention = Retention.ALL_K) -> ValueStack:
    """Tabulate z_0..z_n over the box, one column at a time.

    Each level uses z_k(beta) = max(z_{k-1}(beta), z_k(beta - a_k) + c_k) for
    beta >= a_k. Sweeping flat indices in increasing order visits beta - a_k
    before beta, so the update runs in place on a copy of z_{k-1}.
    """
    retention = Retention(retention)
    start = time.perf_counter()
    box = LatticeBox(tuple(inst.b))
    logger.info(
        f"Building value stack: n={inst.n}, cells={box.cell_count}, retention={retention.value}"
    )

    current = [0] * box.cell_count
    tables = {}
    if retention is Retention.ALL_K:
        tables[0] = _freeze(current)

    for k in range(1, inst.n + 1):
        column = inst.column(k - 1)
        c_k = int(inst.c[k - 1])
        offset = box.index(column)
        fits = box.fits(column).tolist()

        # FINAL_ONLY overwrites a single buffer; the other modes keep z_{k-1} intact
        level = current if retention is Retention.FINAL_ONLY else list(current)
        for i in range(box.cell_count):
            if not fits[i]:
                continue
            candidate = level[i - offset] + c_k
            if candidate > level[i]:
                if candidate > INT64_MAX:
                    raise ValueOverflowError(
                        f"z_{k} exceeds the int64 range at beta={list(box.point(i))}",
                        beta=box.point(i),
                    )
                level[i] = candidate
        current = level
        if retention is Retention.ALL_K:
            tables[k] = _freeze(current)

    if retention is not Retention.ALL_K:
        tables[inst.n] = _freeze(current)

    elapsed = time.perf_counter() - start
    logger.info(f"Value stack built in {elapsed:.3f}s, z_n range [0, {max(current)}]")
    return ValueStack(instance=inst, box=box, retention=retention, tables=tables, build_seconds=elapsed)


def _freeze(values) -> np.ndarray:
    arr = np.array(values, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def parse_decimal_point(beta: Sequence) -> tuple:
    """Parse coordinates as exact decimals. Floats go through their repr."""
    point = []
    for v in beta:
        if isinstance(v, Decimal):
            d = v
        elif isinstance(v, float):
            d = Decimal(repr(v))
        else:
            try:
                d = Decimal(str(v).strip())
            except InvalidOperation:
                raise ValueError(f"not a decimal number: {v!r}")
        if not d.is_finite():
            raise ValueError(f"not a finite number: {v!r}")
        point.append(d)
    return tuple(point)


def floor_point(beta: Sequence) -> tuple:
    return tuple(int(d.to_integral_value(rounding=ROUND_FLOOR)) for d in parse_decimal_point(beta))


def query(stack: ValueStack, k: int, beta: Sequence) -> int:
    """z_k(beta) for a decimal right-hand side, using z(beta) = z(floor(beta))."""
    decimals = parse_decimal_point(beta)
    if any(d < 0 for d in decimals):
        raise OutsideBoxError(f"point {[str(d) for d in decimals]} has a negative coordinate")
    return stack.value(k, floor_point(decimals))


def stepup_value(stack: ValueStack, k: int, beta: Sequence[int]) -> int:
    """max over l >= 0 with l*a_k <= beta of z_{k-1}(beta - l*a_k) + l*c_k."""
    inst = stack.instance
    beta = stack.box.require(beta)
    column = inst.column(k - 1)
    c_k = int(inst.c[k - 1])
    best = 0
    ell = 0
    point = beta
    while all(v >= 0 for v in point):
        best = max(best, stack.value(k - 1, point) + ell * c_k)
        ell += 1
        point = tuple(v - ell * a for v, a in zip(beta, column))
    return best


def classic_gg(inst: Instance) -> np.ndarray:
    """Full-variable table from z(beta) = max_j {z(beta - a_j) + c_j : a_j <= beta}."""
    box = LatticeBox(tuple(inst.b))
    offsets = [box.index(inst.column(j)) for j in range(inst.n)]
    fits = [box.fits(inst.column(j)).tolist() for j in range(inst.n)]
    costs = [int(v) for v in inst.c]

    z = [0] * box.cell_count
    for i in range(box.cell_count):
        best = 0
        for j in range(inst.n):
            if fits[j][i]:
                best = max(best, z[i - offsets[j]] + costs[j])
        if best > INT64_MAX:
            raise ValueOverflowError(
                f"z exceeds the int64 range at beta={list(box.point(i))}", beta=box.point(i)
            )
        z[i] = best
    return _freeze(z)


def _max_multiplicities(columns: Sequence[tuple], beta: Sequence[int]) -> list[int]:
    bounds = []
    for column in columns:
        bounds.append(min(v // a for v, a in zip(beta, column) if a > 0))
    return bounds


def enumeration_size(inst: Instance, k: int, beta: Sequence[int]) -> int:
    columns = [inst.column(j) for j in range(k)]
    return math.prod(x + 1 for x in _max_multiplicities(columns, beta))


def feasible_solutions(inst: Instance, k: int, beta: Sequence[int], cap: int) -> Iterator[tuple]:
    size = enumeration_size(inst, k, beta)
    if size > cap:
        raise EnumerationCapError(
            f"brute force over {size} candidate vectors at beta={list(beta)} exceeds cap {cap}"
        )
    columns = [inst.column(j) for j in range(k)]
    costs = [int(v) for v in inst.c[:k]]

    def extend(j: int, remaining: tuple, prefix: list, value: int):
        if j == k:
            yield tuple(prefix), value
            return
        limit = min(v // a for v, a in zip(remaining, columns[j]) if a > 0)
        for count in range(limit + 1):
            rest = tuple(v - count * a for v, a in zip(remaining, columns[j]))
            prefix.append(count)
            yield from extend(j + 1, rest, prefix, value + count * costs[j])
            prefix.pop()

    yield from extend(0, tuple(beta), [], 0)


def brute_force_value(inst: Instance, k: int, beta: Sequence[int],
                      cap: int = DEFAULT_ENUMERATION_CAP) -> int:
    """Optimum of IP_k(beta) by exhaustive enumeration, independent of the tables."""
    return max(value for _, value in feasible_solutions(inst, k, beta, cap))


def brute_force_optima(inst: Instance, k: int, beta: Sequence[int],
                       cap: int = DEFAULT_ENUMERATION_CAP) -> set[tuple]:
    solutions = list(feasible_solutions(inst, k, beta, cap))
    best = max(value for _, value in solutions)
    return {x for x, value in solutions if value == best}


def brute_force_table(inst: Instance, k: int, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """z_k over the whole box from one enumeration of the vectors feasible at b.

    Each vector scores at its exact usage; a running maximum over every axis
    then spreads the best score to all dominating right-hand sides.
    """
    box = LatticeBox(tuple(inst.b))
    columns = [inst.column(j) for j in range(k)]
    best = np.zeros(box.cell_count, dtype=np.int64)
    for x, value in feasible_solutions(inst, k, box.b, cap):
        usage = [sum(a[i] * count for a, count in zip(columns, x)) for i in range(box.m)]
        index = box.index(usage)
        if value > best[index]:
            best[index] = value
    grid = box.grid(best)
    for axis in range(box.m):
        grid = np.maximum.accumulate(grid, axis=axis)
    return _freeze(grid.reshape(-1, order="F"))


def level_value_set(stack: ValueStack, k: int) -> list[int]:
    return [int(v) for v in np.unique(stack.table(k))]


@dataclass(frozen=True)
class RecursionWork:
    stepup_terms: int  # candidate terms over all levels and cells
    classic_terms: int  # candidate terms for the all-columns recursion


def recursion_work(inst: Instance) -> RecursionWork:
    """Count the subproblems each recursion generates over the whole box."""
    box = LatticeBox(tuple(inst.b))
    coords = box.coords
    stepup = 0
    classic = 0
    for j in range(inst.n):
        column = np.asarray(inst.column(j), dtype=np.int64)
        positive = column > 0
        multiplicity = (coords[:, positive] // column[positive]).min(axis=1)
        stepup += int((multiplicity + 1).sum())
        classic += int((multiplicity >= 1).sum())
    return RecursionWork(stepup_terms=stepup, classic_terms=classic)


def table_summary(stack: ValueStack) -> dict:
    final = stack.final
    work = recursion_work(stack.instance)
    return {
        "name": stack.instance.name,
        "m": stack.instance.m,
        "n": stack.instance.n,
        "b": list(stack.box.b),
        "cell_count": stack.box.cell_count,
        "retention": stack.retention.value,
        "levels_retained": stack.levels,
        "value_range": [int(final.min()), int(final.max())],
        "build_seconds": round(stack.build_seconds, 6),
        "stepup_terms": work.stepup_terms,
        "classic_terms": work.classic_terms,
    }
