from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator, Sequence, Union

import numpy as np

from vflat.errors import PreconditionError, PropertyViolation, RetentionError
from vflat.value_table import Retention, ValueStack

if TYPE_CHECKING:
    from vflat.instance import Instance

logger = logging.getLogger(__name__)

DEFAULT_OPTIMA_CAP = 10_000


@dataclass(frozen=True)
class Solution:
    x: tuple
    value: int
    usage: tuple

    @classmethod
    def of(cls, inst: Instance, x: Sequence[int]) -> "Solution":
        x = tuple(int(v) for v in x)
        if any(v < 0 for v in x):
            raise PreconditionError(f"solution {list(x)} has a negative entry")
        k = len(x)
        value = sum(int(inst.c[j]) * x[j] for j in range(k))
        usage = tuple(
            sum(int(inst.A[i, j]) * x[j] for j in range(k)) for i in range(inst.m)
        )
        return cls(x=x, value=value, usage=usage)

    def fits(self, beta: Sequence[int]) -> bool:
        return all(u <= v for u, v in zip(self.usage, beta))


SolutionLike = Union[Solution, Sequence[int]]


def as_solution(inst: Instance, x: SolutionLike) -> Solution:
    return x if isinstance(x, Solution) else Solution.of(inst, x)


@dataclass(frozen=True, eq=False)
class SolutionDag:
    """Per-level edge flags over the box.

    skip[k][i]: z_k = z_{k-1} at cell i (some optimum has x_k = 0).
    take[k][i]: beta >= a_k and z_k(beta) = z_k(beta - a_k) + c_k
    (some optimum has x_k >= 1).
    """

    stack: ValueStack
    skip: dict = field(default_factory=dict)
    take: dict = field(default_factory=dict)
    offsets: dict = field(default_factory=dict)

    @property
    def instance(self) -> Instance:
        return self.stack.instance


def usable_mask(stack: ValueStack, k: int, j: int) -> np.ndarray:
    """Cells beta where some member of opt_k(beta) has x_j >= 1 (j is 0-based, j < k)."""
    inst = stack.instance
    box = stack.box
    column = inst.column(j)
    table = stack.table(k)
    fits = box.fits(column)
    source = np.where(fits, np.arange(box.cell_count) - box.index(column), 0)
    return fits & (table == table[source] + int(inst.c[j]))


def build_dag(stack: ValueStack) -> SolutionDag:
    if stack.retention is not Retention.ALL_K:
        raise RetentionError("the solution DAG needs a stack built with all levels retained")
    inst = stack.instance
    box = stack.box
    skip, take, offsets = {}, {}, {}
    for k in range(1, inst.n + 1):
        offset = box.index(inst.column(k - 1))
        take_k = usable_mask(stack, k, k - 1)
        skip_k = stack.table(k) == stack.table(k - 1)
        if not np.all(skip_k | take_k):
            bad = box.point(int(np.argmin(skip_k | take_k)))
            raise PropertyViolation(f"cell {list(bad)} at level {k} has no DAG edge",
                                    {"k": k, "beta": list(bad)})
        for arr in (take_k, skip_k):
            arr.setflags(write=False)
        skip[k], take[k], offsets[k] = skip_k, take_k, offset
    return SolutionDag(stack=stack, skip=skip, take=take, offsets=offsets)


def one_optimum(dag: SolutionDag, k: int, beta: Sequence[int]) -> Solution:
    """Backtrack one member of opt_k(beta): take a_k as often as possible, then skip."""
    box = dag.stack.box
    beta = box.require(beta)
    if not 0 <= k <= dag.instance.n:
        raise RetentionError(f"level {k} outside 0..{dag.instance.n}")
    x = [0] * k
    i = box.index(beta)
    for level in range(k, 0, -1):
        while dag.take[level][i]:
            x[level - 1] += 1
            i -= dag.offsets[level]
    return Solution.of(dag.instance, x)


def canonical_optima(dag: SolutionDag) -> dict[int, list[tuple]]:
    """one_optimum(dag, k, beta).x for every level and cell, indexed by flat cell index."""
    cells = dag.stack.box.cell_count
    result = {0: [()] * cells}
    for k in range(1, dag.instance.n + 1):
        take = dag.take[k].tolist()
        offset = dag.offsets[k]
        run = [0] * cells
        for i in range(cells):
            if take[i]:
                run[i] = run[i - offset] + 1
        previous = result[k - 1]
        result[k] = [previous[i - run[i] * offset] + (run[i],) for i in range(cells)]
    return result


@dataclass(frozen=True)
class OptimaSet:
    solutions: tuple
    truncated: bool

    def vectors(self) -> set[tuple]:
        return {s.x for s in self.solutions}

    def __len__(self) -> int:
        return len(self.solutions)


def _walk(dag: SolutionDag, level: int, i: int) -> Iterator[tuple]:
    if level == 0:
        yield ()
        return
    exits = []
    ell, j = 0, i
    while True:
        if dag.skip[level][j]:
            exits.append((ell, j))
        if not dag.take[level][j]:
            break
        ell += 1
        j -= dag.offsets[level]
    for ell, j in reversed(exits):
        for head in _walk(dag, level - 1, j):
            yield head + (ell,)


def all_optima(dag: SolutionDag, k: int, beta: Sequence[int], cap: int = DEFAULT_OPTIMA_CAP) -> OptimaSet:
    """Every member of opt_k(beta), stopping at `cap` with a truncation flag.

    Each optimum corresponds to exactly one DAG path, so no deduplication is needed.
    """
    box = dag.stack.box
    beta = box.require(beta)
    if not 0 <= k <= dag.instance.n:
        raise RetentionError(f"level {k} outside 0..{dag.instance.n}")
    found = []
    truncated = False
    for x in _walk(dag, k, box.index(beta)):
        if len(found) == cap:
            truncated = True
            break
        found.append(Solution.of(dag.instance, x))
    if truncated:
        logger.warning(f"opt_{k}({list(beta)}) truncated at {cap} solutions")
    return OptimaSet(solutions=tuple(found), truncated=truncated)


def is_optimal(stack: ValueStack, k: int, beta: Sequence[int], x: SolutionLike) -> bool:
    sol = as_solution(stack.instance, x)
    return len(sol.x) == k and sol.fits(beta) and sol.value == stack.value(k, beta)


def column_usable(stack: ValueStack, k: int, beta: Sequence[int], j: int) -> bool:
    """Whether some member of opt_k(beta) has x_j >= 1 (j is 0-based, j < k).

    Holds exactly when beta >= a_j and z_k(beta - a_j) + c_j = z_k(beta).
    """
    inst = stack.instance
    rest = tuple(v - a for v, a in zip(beta, inst.column(j)))
    if any(v < 0 for v in rest):
        return False
    return stack.value(k, rest) + int(inst.c[j]) == stack.value(k, beta)


@dataclass(frozen=True)
class DecompositionReport:
    partial_usage: tuple
    partial_value: int
    z_partial: int
    z_residual: int
    z_total: int

    @property
    def holds(self) -> bool:
        return (self.z_partial == self.partial_value
                and self.z_partial + self.z_residual == self.z_total)


def _require_optimal(stack: ValueStack, k: int, beta: tuple, x_star: Solution) -> None:
    if len(x_star.x) != k:
        raise PreconditionError(f"x* has {len(x_star.x)} entries, expected {k}")
    if not x_star.fits(beta) or x_star.value != stack.value(k, beta):
        raise PreconditionError(f"x*={list(x_star.x)} is not in opt_{k}({list(beta)})")


def decompose(stack: ValueStack, k: int, beta: Sequence[int],
              x_star: SolutionLike, x: SolutionLike) -> DecompositionReport:
    """Split z_k(beta) along a partial solution x <= x* (IP complementary slackness).

    Raises PropertyViolation if either identity fails.
    """
    inst = stack.instance
    beta = stack.box.require(beta)
    x_star = as_solution(inst, x_star)
    part = as_solution(inst, x)
    _require_optimal(stack, k, beta, x_star)
    if len(part.x) != k or any(p > s for p, s in zip(part.x, x_star.x)):
        raise PreconditionError(f"x={list(part.x)} is not <= x*={list(x_star.x)}")

    residual = tuple(v - u for v, u in zip(beta, part.usage))
    report = DecompositionReport(
        partial_usage=part.usage,
        partial_value=part.value,
        z_partial=stack.value(k, part.usage),
        z_residual=stack.value(k, residual),
        z_total=stack.value(k, beta),
    )
    if not report.holds:
        raise PropertyViolation(
            f"complementary slackness fails at k={k}, beta={list(beta)}, x={list(part.x)}",
            {"k": k, "beta": list(beta), "x_star": list(x_star.x), "x": list(part.x)},
        )
    return report


def step_down(stack: ValueStack, k: int, beta: Sequence[int],
              x_star: SolutionLike, t: int) -> tuple[tuple, int]:
    """Remove t copies of a_k from an optimum; returns (beta - t a_k, z_k(beta) - t c_k).

    Asserts that x* - t e_k is optimal at the new point, that
    z_k(beta) = z_k(beta - t a_k) + z_k(t a_k), and that
    z_{k-1}(beta - a_k x*_k) = z_k(beta) - c_k x*_k.
    """
    inst = stack.instance
    beta = stack.box.require(beta)
    x_star = as_solution(inst, x_star)
    _require_optimal(stack, k, beta, x_star)
    if k < 1 or not 0 <= t <= x_star.x[k - 1]:
        raise PreconditionError(f"t={t} must lie in 0..x*_k={x_star.x[k - 1] if k else 0}")

    column = inst.column(k - 1)
    c_k = int(inst.c[k - 1])
    alpha = stack.value(k, beta)
    lowered = tuple(v - t * a for v, a in zip(beta, column))
    target = alpha - t * c_k
    witness = {"k": k, "beta": list(beta), "x_star": list(x_star.x), "t": t}

    reduced = list(x_star.x)
    reduced[k - 1] -= t
    if stack.value(k, lowered) != target or not is_optimal(stack, k, lowered, reduced):
        raise PropertyViolation(f"step-down by {t} copies of a_{k} loses optimality", witness)
    ray = tuple(t * a for a in column)
    if alpha != stack.value(k, lowered) + stack.value(k, ray):
        raise PropertyViolation(f"z_{k} does not split along t a_{k}", witness)

    base = tuple(v - x_star.x[k - 1] * a for v, a in zip(beta, column))
    if stack.value(k - 1, base) != alpha - c_k * x_star.x[k - 1]:
        raise PropertyViolation(f"beta - a_k x*_k is not in the level-(k-1) level set", witness)
    return lowered, target
