import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from vflat.errors import PreconditionError, PropertyViolation, RetentionError
from vflat.solutions import (
    SolutionDag,
    SolutionLike,
    as_solution,
    is_optimal,
    one_optimum,
    usable_mask,
)
from vflat.value_table import LatticeBox, Retention, ValueStack

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LevelSet:
    k: int
    alpha: int
    members: tuple

    def __contains__(self, beta) -> bool:
        return tuple(beta) in self.members

    def __len__(self) -> int:
        return len(self.members)


def level_set(stack: ValueStack, k: int, alpha: int) -> LevelSet:
    """S_k(alpha): every lattice point where z_k equals alpha, in flat-index order."""
    indices = np.flatnonzero(stack.table(k) == alpha)
    return LevelSet(k=k, alpha=int(alpha), members=tuple(stack.box.point(int(i)) for i in indices))


@dataclass(frozen=True, eq=False)
class LsmSet:
    """Level-set-minimal points of z_k, as a boolean mask over the flat lattice index."""

    k: int
    box: LatticeBox
    mask: np.ndarray

    def __contains__(self, beta) -> bool:
        beta = tuple(beta)
        return self.box.contains(beta) and bool(self.mask[self.box.index(beta)])

    def __len__(self) -> int:
        return int(self.mask.sum())

    def members(self) -> list[tuple]:
        return [self.box.point(int(i)) for i in np.flatnonzero(self.mask)]

    @property
    def saturated(self) -> bool:
        return bool(self.mask.all())


def lsm_mask(box: LatticeBox, table: np.ndarray) -> np.ndarray:
    """beta is LSM iff every existing axis-down neighbour has a strictly smaller value."""
    grid = box.grid(table)
    mask = np.ones(box.shape, dtype=bool)
    for axis in range(box.m):
        upper = [slice(None)] * box.m
        lower = [slice(None)] * box.m
        upper[axis] = slice(1, None)
        lower[axis] = slice(None, -1)
        mask[tuple(upper)] &= grid[tuple(upper)] > grid[tuple(lower)]
    flat = mask.reshape(-1, order="F")
    flat.setflags(write=False)
    return flat


def is_lsm(stack: ValueStack, k: int, beta: Sequence[int]) -> bool:
    beta = stack.box.require(beta)
    value = stack.value(k, beta)
    for i, v in enumerate(beta):
        if v >= 1:
            below = beta[:i] + (v - 1,) + beta[i + 1:]
            if stack.value(k, below) >= value:
                return False
    return True


def lsm_set(stack: ValueStack, k: int) -> LsmSet:
    return LsmSet(k=k, box=stack.box, mask=lsm_mask(stack.box, stack.table(k)))


def strict_downset_max(box: LatticeBox, table: np.ndarray) -> np.ndarray:
    """Per beta, the largest value over beta_bar <= beta with beta_bar != beta (-1 at the origin)."""
    reach = box.grid(table).astype(np.int64)
    for axis in range(box.m):
        reach = np.maximum.accumulate(reach, axis=axis)
    below = np.full(box.shape, -1, dtype=np.int64)
    for axis in range(box.m):
        upper = [slice(None)] * box.m
        lower = [slice(None)] * box.m
        upper[axis] = slice(1, None)
        lower[axis] = slice(None, -1)
        below[tuple(upper)] = np.maximum(below[tuple(upper)], reach[tuple(lower)])
    return below.reshape(-1, order="F")


@dataclass(frozen=True)
class PersistenceResult:
    premise: bool
    lsm: bool
    witnesses: tuple = ()  # points below beta where some optimum uses column k


def check_lsm_persistence(stack: ValueStack, dag: SolutionDag, k: int, beta: Sequence[int]) -> PersistenceResult:
    """Test the persistence premise at beta and, when it holds, assert beta in B_k.

    The premise (every optimum at every beta_bar below beta has x_k = 0) is read
    off the take flags, which mark exactly the cells where some optimum uses a_k.
    """
    box = stack.box
    beta = box.require(beta)
    if k < 1:
        raise PreconditionError("persistence needs k >= 1")
    if not is_lsm(stack, k - 1, beta):
        raise PreconditionError(f"{list(beta)} is not level-set-minimal at level {k - 1}")

    below = np.all(box.coords <= np.asarray(beta), axis=1)
    below[box.index(beta)] = False
    hits = np.flatnonzero(below & dag.take[k])
    witnesses = tuple(box.point(int(i)) for i in hits)
    lsm = is_lsm(stack, k, beta)
    if not witnesses and not lsm:
        raise PropertyViolation(
            f"{list(beta)} loses level-set-minimality at level {k} although no optimum below uses a_{k}",
            {"k": k, "beta": list(beta)},
        )
    return PersistenceResult(premise=not witnesses, lsm=lsm, witnesses=witnesses)


def integer_rank(vectors: Sequence[Sequence[int]]) -> int:
    """Exact rank by fraction-free (Bareiss) elimination."""
    rows = [[int(v) for v in vector] for vector in vectors]
    if not rows:
        return 0
    width = len(rows[0])
    rank = 0
    previous = 1
    for col in range(width):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        head = rows[rank][col]
        for r in range(rank + 1, len(rows)):
            factor = rows[r][col]
            for cc in range(col + 1, width):
                rows[r][cc] = (rows[r][cc] * head - factor * rows[rank][cc]) // previous
            rows[r][col] = 0
        previous = head
        rank += 1
        if rank == len(rows):
            break
    return rank


def _ray(box: LatticeBox, beta: tuple, column: tuple, t_max: Optional[int] = None) -> list[tuple]:
    points = []
    t = 0
    while t_max is None or t <= t_max:
        point = tuple(v + t * a for v, a in zip(beta, column))
        if not box.contains(point):
            break
        points.append(point)
        t += 1
    return points


def lsm_ray_exclusion(stack: ValueStack, k: int, beta: Sequence[int]) -> list[tuple]:
    """Points beta + t a_k in the box that cannot be level-set-minimal at level k.

    Declines unless beta is not in B_{k-1}, a_1..a_k are linearly independent,
    beta and a_k are linearly independent, and a_k carries no weight in beta
    (beta lies in span(a_1..a_{k-1}) or outside span(a_1..a_k)).
    """
    inst = stack.instance
    beta = stack.box.require(beta)
    if not 1 <= k <= inst.n:
        raise PreconditionError(f"level {k} outside 1..{inst.n}")
    if is_lsm(stack, k - 1, beta):
        raise PreconditionError(f"{list(beta)} is level-set-minimal at level {k - 1}")
    columns = [inst.column(j) for j in range(k)]
    if integer_rank(columns) < k:
        raise PreconditionError(f"a_1..a_{k} are linearly dependent")
    if integer_rank([beta, columns[-1]]) < 2:
        raise PreconditionError(f"{list(beta)} and a_{k} are linearly dependent")
    inside_head = integer_rank(columns[:-1] + [beta]) == k - 1
    outside_all = integer_rank(columns + [beta]) == k + 1
    if not (inside_head or outside_all):
        raise PreconditionError(f"{list(beta)} has a nonzero a_{k} coordinate over a_1..a_{k}")

    excluded = _ray(stack.box, beta, columns[-1])
    mask = lsm_set(stack, k)
    for point in excluded:
        if point in mask:
            raise PropertyViolation(
                f"{list(point)} on the ray from {list(beta)} along a_{k} is level-set-minimal",
                {"k": k, "beta": list(beta), "point": list(point)},
            )
    return excluded


def lsm_step_down(stack: ValueStack, dag: SolutionDag, k: int, beta: Sequence[int]) -> tuple:
    """beta - a_k x*_k for the canonical optimum x*; asserts it lies in B_{k-1}."""
    beta = stack.box.require(beta)
    if k < 1:
        raise PreconditionError("step-down needs k >= 1")
    if not is_lsm(stack, k, beta):
        raise PreconditionError(f"{list(beta)} is not level-set-minimal at level {k}")
    x_star = one_optimum(dag, k, beta)
    column = stack.instance.column(k - 1)
    point = tuple(v - x_star.x[k - 1] * a for v, a in zip(beta, column))
    if not is_lsm(stack, k - 1, point):
        raise PropertyViolation(
            f"{list(point)} is not level-set-minimal at level {k - 1}",
            {"k": k, "beta": list(beta), "x_star": list(x_star.x)},
        )
    return point


def lsm_downward_closure(stack: ValueStack, dag: SolutionDag, k: int, x_star: SolutionLike) -> list[tuple]:
    """Usages of every x strictly below x*, each asserted level-set-minimal at level k."""
    inst = stack.instance
    x_star = as_solution(inst, x_star)
    if len(x_star.x) != k:
        raise PreconditionError(f"x* has {len(x_star.x)} entries, expected {k}")
    top = x_star.usage
    if not stack.box.contains(top):
        raise PreconditionError(f"usage {list(top)} of x* lies outside the box")
    if not is_optimal(stack, k, top, x_star):
        raise PreconditionError(f"x*={list(x_star.x)} is not optimal at its own usage")
    if not is_lsm(stack, k, top):
        raise PreconditionError(f"usage {list(top)} is not level-set-minimal at level {k}")

    mask = lsm_set(stack, k)
    found = set()
    for x in itertools.product(*(range(v + 1) for v in x_star.x)):
        if x == x_star.x:
            continue
        usage = as_solution(inst, x).usage
        if usage not in mask:
            raise PropertyViolation(
                f"partial usage {list(usage)} of x*={list(x_star.x)} is not level-set-minimal",
                {"k": k, "beta": list(usage), "x_star": list(x_star.x), "x": list(x)},
            )
        found.add(usage)
    return sorted(found, key=stack.box.index)


def lsm_ray_prefix(stack: ValueStack, k: int, beta: Sequence[int], t: int) -> list[tuple]:
    """Given beta + t a_k in B_k with z_k(beta + t a_k) = z_k(beta) + t c_k,
    assert beta + s a_k is in B_k for s = 0..t."""
    inst = stack.instance
    beta = stack.box.require(beta)
    if not 1 <= k <= inst.n or t < 0:
        raise PreconditionError(f"need 1 <= k <= {inst.n} and t >= 0")
    column = inst.column(k - 1)
    top = tuple(v + t * a for v, a in zip(beta, column))
    if not stack.box.contains(top):
        raise PreconditionError(f"{list(top)} lies outside the box")
    if not is_lsm(stack, k, top):
        raise PreconditionError(f"{list(top)} is not level-set-minimal at level {k}")
    if stack.value(k, top) != stack.value(k, beta) + t * int(inst.c[k - 1]):
        raise PreconditionError(f"z_{k} does not grow by t c_k between {list(beta)} and {list(top)}")

    points = _ray(stack.box, beta, column, t_max=t)
    for point in points:
        if not is_lsm(stack, k, point):
            raise PropertyViolation(
                f"{list(point)} on the prefix ray is not level-set-minimal at level {k}",
                {"k": k, "beta": list(beta), "t": t, "point": list(point)},
            )
    return points


@dataclass
class CoverReport:
    k: int
    witnesses: dict = field(default_factory=dict)  # beta -> (beta_hat, t)
    missing: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.missing


def relationship_cover(stack: ValueStack, dag: SolutionDag, k: int) -> CoverReport:
    """Decompose every member of B_k as beta_hat + t a_k with beta_hat in B_{k-1}.

    The witness uses the canonical optimum: t = x*_k and beta_hat = beta - t a_k.
    """
    if stack.retention is not Retention.ALL_K:
        raise RetentionError("relationship_cover needs all levels retained")
    if k < 1:
        raise PreconditionError("cover needs k >= 1")
    column = stack.instance.column(k - 1)
    previous = lsm_set(stack, k - 1)
    report = CoverReport(k=k)
    for beta in lsm_set(stack, k).members():
        t = one_optimum(dag, k, beta).x[k - 1]
        base = tuple(v - t * a for v, a in zip(beta, column))
        if base in previous:
            report.witnesses[beta] = (base, t)
        else:
            report.missing.append(beta)
    return report


def lsm_saturation(stack: ValueStack) -> Optional[int]:
    """Smallest k with every lattice point level-set-minimal; later levels must stay saturated."""
    if stack.retention is not Retention.ALL_K:
        raise RetentionError("lsm_saturation needs all levels retained")
    first = None
    for k in range(stack.n + 1):
        lsm = lsm_set(stack, k)
        if first is None and lsm.saturated:
            first = k
        elif first is not None and not lsm.saturated:
            beta = stack.box.point(int(np.flatnonzero(~lsm.mask)[0]))
            raise PropertyViolation(
                f"level {first} saturates but level {k} does not",
                {"first": first, "k": k, "beta": list(beta)},
            )
    return first


@dataclass
class FilterReport:
    k: int
    excluded_columns: list = field(default_factory=list)  # 0-based j with a_j outside B_k
    points_examined: int = 0


def anotinb_filter(stack: ValueStack, dag: SolutionDag, k: int) -> FilterReport:
    """At every point of B_k, no optimum uses a column a_j that is itself outside B_k.

    Certified exactly through the usable-column test, so no enumeration cap applies.
    """
    if stack.retention is not Retention.ALL_K:
        raise RetentionError("anotinb_filter needs all levels retained")
    inst = stack.instance
    members = lsm_set(stack, k)
    report = FilterReport(k=k, points_examined=len(members))
    for j in range(k):
        if inst.column(j) in members:
            continue
        report.excluded_columns.append(j)
        offending = np.flatnonzero(members.mask & usable_mask(stack, k, j))
        if offending.size:
            beta = stack.box.point(int(offending[0]))
            raise PropertyViolation(
                f"an optimum at {list(beta)} uses column {j + 1}, which is not level-set-minimal",
                {"k": k, "beta": list(beta), "j": j + 1},
            )
    return report


def lsm_candidates(stack: ValueStack, k: int, previous: Optional[np.ndarray] = None) -> np.ndarray:
    """Mask of {beta_hat + t a_k : beta_hat in B_{k-1}, t >= 0} within the box."""
    box = stack.box
    if previous is None:
        previous = lsm_set(stack, k - 1).mask
    candidates = previous.tolist()
    column = stack.instance.column(k - 1)
    offset = box.index(column)
    fits = box.fits(column).tolist()
    for i in range(box.cell_count):
        if fits[i] and candidates[i - offset]:
            candidates[i] = True
    return np.array(candidates, dtype=bool)


def incremental_lsm_sets(stack: ValueStack) -> list[LsmSet]:
    """B_0..B_n built by adding columns one at a time and filtering the candidates."""
    if stack.retention is not Retention.ALL_K:
        raise RetentionError("incremental_lsm_sets needs all levels retained")
    box = stack.box
    origin = np.zeros(box.cell_count, dtype=bool)
    origin[0] = True
    sets = [LsmSet(k=0, box=box, mask=origin)]
    for k in range(1, stack.n + 1):
        candidates = lsm_candidates(stack, k, previous=sets[-1].mask)
        sets.append(LsmSet(k=k, box=box, mask=candidates & lsm_mask(box, stack.table(k))))
    logger.info(f"Incremental LSM sets: sizes {[len(s) for s in sets]}")
    return sets
