"""
Executable checks of the value-function, level-set and MC-level properties.

Each check returns PASS, FAIL with a reproducible witness, or DECLINED when it
cannot certify (truncated optima, enumeration cap). Checks are registered by
id and always run in id order, so reports are byte-stable.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.ndimage as nd

from vflat.errors import (
    EnumerationCapError,
    PreconditionError,
    PropertyViolation,
    RetentionError,
    TruncatedOptimaError,
)
from vflat.instance import (
    ColumnCase,
    Instance,
    classify_columns,
    dominance_violations,
    order_columns,
)
from vflat.level_sets import (
    anotinb_filter,
    incremental_lsm_sets,
    integer_rank,
    is_lsm,
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
from vflat.mc_level import (
    ComponentMap,
    adjacent_path,
    common_optima,
    hypercube_cover,
    isovalue_path,
    label_components,
    lsm_chain,
    lsm_frontier,
    step_down_component,
)
from vflat.solutions import (
    DEFAULT_OPTIMA_CAP,
    SolutionDag,
    all_optima,
    build_dag,
    canonical_optima,
    step_down,
    usable_mask,
)
from vflat.value_table import (
    DEFAULT_ENUMERATION_CAP,
    Retention,
    ValueStack,
    brute_force_table,
    build_stack,
    classic_gg,
    feasible_solutions,
    floor_point,
    level_value_set,
)

logger = logging.getLogger(__name__)


class Status(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    DECLINED = "DECLINED"


@dataclass
class CheckResult:
    check_id: str
    status: Status
    examined: int = 0
    sampled: bool = False
    witness: Optional[dict] = None
    reason: str = ""
    note: str = ""

    @property
    def label(self) -> str:
        if self.status is Status.PASS and self.sampled:
            return "sampled PASS"
        return self.status.value

    def to_dict(self) -> dict:
        return {
            "id": self.check_id,
            "status": self.label,
            "examined": self.examined,
            "witness": self.witness,
            "reason": self.reason,
            "note": self.note,
        }


@dataclass(frozen=True)
class VerifyConfig:
    optima_cap: int = DEFAULT_OPTIMA_CAP
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    pair_budget: int = 1_000_000
    seed: int = 0


@dataclass(frozen=True, eq=False)
class Structures:
    instance: Instance
    stack: ValueStack
    dag: SolutionDag
    cmap: ComponentMap

    @classmethod
    def build(cls, inst: Instance) -> "Structures":
        stack = build_stack(inst, Retention.ALL_K)
        return cls(instance=inst, stack=stack, dag=build_dag(stack), cmap=label_components(stack))


@dataclass
class Outcome:
    examined: int
    sampled: bool = False
    note: str = ""


@dataclass
class Report:
    instance_name: str
    cell_count: int
    levels: int
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(r.status is Status.FAIL for r in self.results)

    @property
    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if r.status is Status.FAIL]

    @property
    def declined(self) -> list[CheckResult]:
        return [r for r in self.results if r.status is Status.DECLINED]

    def to_dict(self) -> dict:
        return {
            "instance": self.instance_name,
            "cells": self.cell_count,
            "levels": self.levels,
            "statements": {r.check_id: CHECKS[r.check_id][0] for r in self.results if r.check_id in CHECKS},
            "checks": [r.to_dict() for r in self.results],
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"Verification report: {self.instance_name or '(unnamed)'} "
                 f"(cells={self.cell_count}, levels={self.levels})", "", "Checks:"]
        for r in self.results:
            if r.check_id in CHECKS:
                lines.append(f"  {r.check_id}: {CHECKS[r.check_id][0]}")
        lines += ["", "Results:"]
        for r in self.results:
            line = f"  {r.check_id:<28} {r.label:<13} examined={r.examined}"
            if r.note:
                line += f" ({r.note})"
            lines.append(line)
            if r.witness is not None:
                lines.append(f"    witness: {json.dumps(r.witness, sort_keys=True)}")
            if r.reason:
                lines.append(f"    reason: {r.reason}")
        counts = {s: sum(1 for r in self.results if r.status is s) for s in Status}
        lines += ["", f"Summary: {len(self.results)} checks, {counts[Status.PASS]} PASS, "
                      f"{counts[Status.FAIL]} FAIL, {counts[Status.DECLINED]} DECLINED"]
        return "\n".join(lines) + "\n"


CheckFn = Callable[[Structures, VerifyConfig], Outcome]
CHECKS: dict[str, tuple[str, CheckFn]] = {}


def check(check_id: str, statement: str):
    def register(fn: CheckFn) -> CheckFn:
        CHECKS[check_id] = (statement, fn)
        return fn
    return register


def _point(s: Structures, index: int) -> list[int]:
    return list(s.stack.box.point(int(index)))


def _fail(message: str, s: Structures, index: Optional[int] = None, **extra) -> PropertyViolation:
    witness = dict(extra)
    if index is not None:
        witness["beta"] = _point(s, index)
    return PropertyViolation(message, witness)


def _max_steps(s: Structures, column: tuple) -> np.ndarray:
    """Per cell, the largest t with beta + t*column still inside the box."""
    box = s.stack.box
    col = np.asarray(column, dtype=np.int64)
    positive = col > 0
    room = np.asarray(box.b, dtype=np.int64) - box.coords
    return (room[:, positive] // col[positive]).min(axis=1)


def _multiplicity(s: Structures, column: tuple) -> np.ndarray:
    """Per cell, the largest l with l*column <= beta."""
    col = np.asarray(column, dtype=np.int64)
    positive = col > 0
    return (s.stack.box.coords[:, positive] // col[positive]).min(axis=1)


# value tables ---------------------------------------------------------------

@check("gilmore_gomory_equivalence", "z_n from the one-variable step-up equals the classic all-columns recursion")
def _gilmore_gomory(s: Structures, config: VerifyConfig) -> Outcome:
    diff = np.flatnonzero(s.stack.final != classic_gg(s.instance))
    if diff.size:
        raise _fail("step-up and classic recursions disagree", s, diff[0], k=s.stack.n)
    return Outcome(examined=s.stack.box.cell_count)


@check("brute_force_oracle", "every level table equals exhaustive enumeration of feasible vectors")
def _brute_force(s: Structures, config: VerifyConfig) -> Outcome:
    for k in range(s.stack.n + 1):
        oracle = brute_force_table(s.instance, k, cap=config.enumeration_cap)
        diff = np.flatnonzero(s.stack.table(k) != oracle)
        if diff.size:
            i = diff[0]
            raise _fail("table disagrees with enumeration", s, i, k=k,
                        z=int(s.stack.table(k)[i]), oracle=int(oracle[i]))
    return Outcome(examined=s.stack.box.cell_count * (s.stack.n + 1))


@check("stepup_pointwise", "z_k(beta) = max over l of z_{k-1}(beta - l a_k) + l c_k at every cell")
def _stepup_pointwise(s: Structures, config: VerifyConfig) -> Outcome:
    inst, box = s.instance, s.stack.box
    for k in range(1, inst.n + 1):
        previous = s.stack.table(k - 1).tolist()
        current = s.stack.table(k).tolist()
        column = inst.column(k - 1)
        offset = box.index(column)
        c_k = int(inst.c[k - 1])
        reach = _multiplicity(s, column).tolist()
        for i in range(box.cell_count):
            best = max(previous[i - ell * offset] + ell * c_k for ell in range(reach[i] + 1))
            if best != current[i]:
                raise _fail("table differs from the explicit step-up maximum", s, i,
                            k=k, z=current[i], stepup=best)
    return Outcome(examined=box.cell_count * inst.n, note=f"{box.cell_count} cells per level")


@check("zero_base", "z_0 vanishes everywhere and every z_k vanishes at the origin")
def _zero_base(s: Structures, config: VerifyConfig) -> Outcome:
    nonzero = np.flatnonzero(s.stack.table(0))
    if nonzero.size:
        raise _fail("z_0 is not identically zero", s, nonzero[0], k=0)
    for k in s.stack.levels:
        if s.stack.table(k)[0] != 0:
            raise _fail("z_k is positive at the origin", s, 0, k=k)
    return Outcome(examined=s.stack.box.cell_count + len(s.stack.levels))


@check("monotonicity", "each z_k is nondecreasing along every axis")
def _monotonicity(s: Structures, config: VerifyConfig) -> Outcome:
    box = s.stack.box
    examined = 0
    for k in s.stack.levels:
        grid = s.stack.grid(k)
        for axis in range(box.m):
            drop = np.diff(grid, axis=axis) < 0
            examined += int(drop.size)
            if drop.any():
                where = np.argwhere(drop)[0]
                lower = tuple(int(v) for v in where)
                upper = list(lower)
                upper[axis] += 1
                raise PropertyViolation(
                    f"z_{k} decreases along axis {axis + 1}",
                    {"k": k, "beta": list(lower), "upper": upper},
                )
    return Outcome(examined=examined)


@check("superadditivity", "z_k(beta1) + z_k(beta2) <= z_k(beta1 + beta2) whenever beta1 + beta2 <= b")
def _superadditivity(s: Structures, config: VerifyConfig) -> Outcome:
    box = s.stack.box
    b = np.asarray(box.b, dtype=np.int64)
    pairs = math.prod((v + 1) * (v + 2) // 2 for v in box.b)
    strides = np.asarray(box.strides, dtype=np.int64)

    if pairs <= config.pair_budget:
        for k in s.stack.levels:
            grid = s.stack.grid(k)
            for i in range(box.cell_count):
                beta = box.point(i)
                rest = grid[tuple(slice(0, bi - v + 1) for v, bi in zip(beta, box.b))]
                top = grid[tuple(slice(v, bi + 1) for v, bi in zip(beta, box.b))]
                bad = grid[beta] + rest > top
                if bad.any():
                    other = [int(v) for v in np.argwhere(bad)[0]]
                    raise PropertyViolation(
                        f"z_{k} is not superadditive",
                        {"k": k, "beta": list(beta), "other": other},
                    )
        return Outcome(examined=pairs)

    rng = np.random.default_rng(config.seed)
    first, second = [], []
    collected = 0
    while collected < config.pair_budget:
        batch = config.pair_budget - collected
        u = rng.integers(0, b + 1, size=(batch, box.m))
        v = rng.integers(0, b + 1, size=(batch, box.m))
        keep = np.all(u + v <= b, axis=1)
        first.append(u[keep])
        second.append(v[keep])
        collected += int(keep.sum())
    u = np.concatenate(first)[: config.pair_budget]
    v = np.concatenate(second)[: config.pair_budget]
    iu, iv = u @ strides, v @ strides
    for k in s.stack.levels:
        table = s.stack.table(k)
        bad = np.flatnonzero(table[iu] + table[iv] > table[iu + iv])
        if bad.size:
            j = bad[0]
            raise PropertyViolation(
                f"z_{k} is not superadditive",
                {"k": k, "beta": u[j].tolist(), "other": v[j].tolist()},
            )
    return Outcome(examined=config.pair_budget, sampled=True,
                   note=f"{pairs} pairs exceed budget {config.pair_budget}; seed {config.seed}")


@check("column_lower_bound", "z_k(a_j) >= c_j for every j <= k")
def _column_lower_bound(s: Structures, config: VerifyConfig) -> Outcome:
    inst = s.instance
    examined = 0
    for k in range(1, inst.n + 1):
        for j in range(k):
            examined += 1
            if s.stack.value(k, inst.column(j)) < int(inst.c[j]):
                raise PropertyViolation(f"z_{k}(a_{j + 1}) < c_{j + 1}",
                                        {"k": k, "j": j + 1, "beta": list(inst.column(j))})
    return Outcome(examined=examined)


@check("level_monotonicity", "z_k >= z_{k-1} at every cell")
def _level_monotonicity(s: Structures, config: VerifyConfig) -> Outcome:
    for k in range(1, s.stack.n + 1):
        bad = np.flatnonzero(s.stack.table(k) < s.stack.table(k - 1))
        if bad.size:
            raise _fail("adding a column lowered the value", s, bad[0], k=k)
    return Outcome(examined=s.stack.box.cell_count * s.stack.n)


# solutions ------------------------------------------------------------------

@check("complementary_slackness",
       "for x <= x* optimal: z_k(A x) = c x and z_k(A x) + z_k(beta - A x) = z_k(beta)")
def _complementary_slackness(s: Structures, config: VerifyConfig) -> Outcome:
    inst, box = s.instance, s.stack.box
    canonical = canonical_optima(s.dag)
    offsets = [box.index(inst.column(j)) for j in range(inst.n)]
    costs = [int(v) for v in inst.c]
    examined = 0
    for k in range(1, inst.n + 1):
        table = s.stack.table(k).tolist()
        for i in range(box.cell_count):
            x_star = canonical[k][i]
            for x in itertools.product(*(range(v + 1) for v in x_star)):
                used = sum(o * v for o, v in zip(offsets, x))
                value = sum(c * v for c, v in zip(costs, x))
                examined += 1
                if table[used] != value or table[used] + table[i - used] != table[i]:
                    raise _fail("partial solution breaks the slackness identity", s, i,
                                k=k, x_star=list(x_star), x=list(x))
    return Outcome(examined=examined)


@check("optimality_necessary", "a feasible x whose value is not attained by z_k anywhere is not optimal")
def _optimality_necessary(s: Structures, config: VerifyConfig) -> Outcome:
    inst, box = s.instance, s.stack.box
    n = inst.n
    attained = set(level_value_set(s.stack, n))
    table = s.stack.final
    offsets = [box.index(inst.column(j)) for j in range(n)]
    examined = 0
    for x, value in feasible_solutions(inst, n, box.b, config.enumeration_cap):
        examined += 1
        if value not in attained:
            used = sum(o * v for o, v in zip(offsets, x))
            if table[used] == value:
                raise _fail("x with unattained value is optimal", s, used, k=n, x=list(x))
    return Outcome(examined=examined)


@check("step_down", "x* - t e_k stays optimal at beta - t a_k and the level-(k-1) split holds")
def _step_down(s: Structures, config: VerifyConfig) -> Outcome:
    box = s.stack.box
    canonical = canonical_optima(s.dag)
    examined = 0
    for k in range(1, s.instance.n + 1):
        for i in range(box.cell_count):
            x_star = canonical[k][i]
            beta = box.point(i)
            for t in range(x_star[k - 1] + 1):
                step_down(s.stack, k, beta, x_star, t)
                examined += 1
    return Outcome(examined=examined)


@check("positive_last_column", "if z_k(beta) is not a value of z_{k-1}, every optimum has x_k > 0")
def _positive_last_column(s: Structures, config: VerifyConfig) -> Outcome:
    for k in range(1, s.stack.n + 1):
        fresh = ~np.isin(s.stack.table(k), level_value_set(s.stack, k - 1))
        bad = np.flatnonzero(fresh & s.dag.skip[k])
        if bad.size:
            raise _fail("an optimum with x_k = 0 reaches a new value", s, bad[0], k=k)
    return Outcome(examined=s.stack.box.cell_count * s.stack.n)


# level-set-minimal vectors -----------------------------------------------------

def _lsm_optima(s: Structures, config: VerifyConfig):
    for k in range(1, s.stack.n + 1):
        for beta in lsm_set(s.stack, k).members():
            yield k, beta, all_optima(s.dag, k, beta, cap=config.optima_cap)


@check("lsm_tightness", "every optimum at a level-set-minimal point uses it exactly")
def _lsm_tightness(s: Structures, config: VerifyConfig) -> Outcome:
    examined = 0
    truncated = 0
    for k, beta, optima in _lsm_optima(s, config):
        truncated += optima.truncated
        for solution in optima.solutions:
            examined += 1
            if solution.usage != beta:
                raise PropertyViolation("optimum at a minimal point leaves slack",
                                        {"k": k, "beta": list(beta), "x": list(solution.x)})
    if truncated:
        raise TruncatedOptimaError(f"{truncated} optima sets truncated at {config.optima_cap}")
    return Outcome(examined=examined)


@check("lsm_definition", "the axis-neighbour test agrees with strict decrease below every point")
def _lsm_definition(s: Structures, config: VerifyConfig) -> Outcome:
    box = s.stack.box
    for k in s.stack.levels:
        table = s.stack.table(k)
        direct = strict_downset_max(box, table) < table
        bad = np.flatnonzero(direct != lsm_mask(box, table))
        if bad.size:
            raise _fail("neighbour test disagrees with the definition", s, bad[0], k=k)
    final_mask = lsm_set(s.stack, s.stack.n)
    for i in range(box.cell_count):
        if is_lsm(s.stack, s.stack.n, box.point(i)) != bool(final_mask.mask[i]):
            raise _fail("pointwise test disagrees with the mask", s, i, k=s.stack.n)
    return Outcome(examined=box.cell_count * (len(s.stack.levels) + 1))


@check("lsm_persistence", "a point minimal at k-1 stays minimal at k if no optimum below it uses a_k")
def _lsm_persistence(s: Structures, config: VerifyConfig) -> Outcome:
    box = s.stack.box
    examined = 0
    for k in range(1, s.stack.n + 1):
        take_below = strict_downset_max(box, s.dag.take[k].astype(np.int64)) > 0
        premise = lsm_mask(box, s.stack.table(k - 1)) & ~take_below
        examined += int(premise.sum())
        bad = np.flatnonzero(premise & ~lsm_mask(box, s.stack.table(k)))
        if bad.size:
            raise _fail("premise holds but minimality is lost", s, bad[0], k=k)
    return Outcome(examined=examined)


@check("ray_exclusion", "under independence, rays from non-minimal points along a_k avoid B_k")
def _ray_exclusion(s: Structures, config: VerifyConfig) -> Outcome:
    inst, box = s.instance, s.stack.box
    certified = 0
    declined = 0
    for k in range(1, min(inst.n, inst.m) + 1):
        if integer_rank([inst.column(j) for j in range(k)]) < k:
            continue
        for i in np.flatnonzero(~lsm_mask(box, s.stack.table(k - 1))):
            try:
                lsm_ray_exclusion(s.stack, k, box.point(int(i)))
                certified += 1
            except PreconditionError:
                declined += 1
    return Outcome(examined=certified, note=f"{declined} points outside the hypothesis")


@check("lsm_step_down", "removing x*_k copies of a_k from a point of B_k lands in B_{k-1}")
def _lsm_step_down(s: Structures, config: VerifyConfig) -> Outcome:
    inst = s.instance
    examined = 0
    truncated = 0
    for k, beta, optima in _lsm_optima(s, config):
        lsm_step_down(s.stack, s.dag, k, beta)
        truncated += optima.truncated
        column = inst.column(k - 1)
        for solution in optima.solutions:
            examined += 1
            point = tuple(v - solution.x[k - 1] * a for v, a in zip(beta, column))
            if not is_lsm(s.stack, k - 1, point):
                raise PropertyViolation("step-down leaves B_{k-1}",
                                        {"k": k, "beta": list(beta), "x": list(solution.x)})
    if truncated:
        raise TruncatedOptimaError(f"{truncated} optima sets truncated at {config.optima_cap}")
    return Outcome(examined=examined)


@check("lsm_downward_closure", "partial usages of an optimum at a minimal point are minimal")
def _lsm_downward_closure(s: Structures, config: VerifyConfig) -> Outcome:
    canonical = canonical_optima(s.dag)
    box = s.stack.box
    examined = 0
    for k in range(1, s.stack.n + 1):
        for i in np.flatnonzero(lsm_set(s.stack, k).mask):
            examined += len(lsm_downward_closure(s.stack, s.dag, k, canonical[k][int(i)]))
    return Outcome(examined=examined, note=f"{box.cell_count} cells per level")


@check("anotinb_filter", "columns outside B_k are unused by every optimum at every point of B_k")
def _anotinb(s: Structures, config: VerifyConfig) -> Outcome:
    examined = 0
    for k in range(1, s.stack.n + 1):
        examined += anotinb_filter(s.stack, s.dag, k).points_examined
    return Outcome(examined=examined)


@check("relationship_cover", "every point of B_k is a point of B_{k-1} plus a multiple of a_k")
def _relationship_cover(s: Structures, config: VerifyConfig) -> Outcome:
    examined = 0
    for k in range(1, s.stack.n + 1):
        report = relationship_cover(s.stack, s.dag, k)
        if not report.holds:
            raise PropertyViolation("minimal point without a decomposition",
                                    {"k": k, "beta": list(report.missing[0])})
        examined += len(report.witnesses)
    return Outcome(examined=examined)


@check("incremental_lsm", "filtering B_{k-1} + t a_k reproduces every B_k")
def _incremental_lsm(s: Structures, config: VerifyConfig) -> Outcome:
    for built in incremental_lsm_sets(s.stack):
        bad = np.flatnonzero(built.mask != lsm_set(s.stack, built.k).mask)
        if bad.size:
            raise _fail("incremental set differs from the direct scan", s, bad[0], k=built.k)
    return Outcome(examined=s.stack.box.cell_count * (s.stack.n + 1))


@check("ray_prefix", "if beta + t a_k is minimal and gains exactly t c_k, the whole prefix is minimal")
def _ray_prefix(s: Structures, config: VerifyConfig) -> Outcome:
    inst, box = s.instance, s.stack.box
    examined = 0
    for k in range(1, inst.n + 1):
        column = inst.column(k - 1)
        offset = box.index(column)
        c_k = int(inst.c[k - 1])
        table = s.stack.table(k).tolist()
        minimal = lsm_mask(box, s.stack.table(k)).tolist()
        steps = _max_steps(s, column).tolist()
        for i in range(box.cell_count):
            for t in range(steps[i] + 1):
                top = i + t * offset
                if minimal[top] and table[top] == table[i] + t * c_k:
                    lsm_ray_prefix(s.stack, k, box.point(i), t)
                    examined += 1
    return Outcome(examined=examined)


@check("ray_dichotomy",
       "from a point of B_{k-1} outside B_k, minimal ray points gain more than t c_k and split as B_k plus t' a_k")
def _ray_dichotomy(s: Structures, config: VerifyConfig) -> Outcome:
    inst, box = s.instance, s.stack.box
    canonical = canonical_optima(s.dag)
    examined = 0
    for k in range(1, inst.n + 1):
        column = inst.column(k - 1)
        offset = box.index(column)
        c_k = int(inst.c[k - 1])
        table = s.stack.table(k).tolist()
        minimal = lsm_mask(box, s.stack.table(k))
        dropped = lsm_mask(box, s.stack.table(k - 1)) & ~minimal
        minimal = minimal.tolist()
        steps = _max_steps(s, column).tolist()
        for i in np.flatnonzero(dropped).tolist():
            for t in range(steps[i] + 1):
                top = i + t * offset
                if not minimal[top]:
                    continue
                examined += 1
                t_hat = canonical[k][top][k - 1]
                base = top - t_hat * offset
                if (table[top] <= table[i] + t * c_k or not minimal[base]
                        or table[top] != table[base] + t_hat * c_k):
                    raise _fail("minimal ray point breaks the dichotomy", s, i, k=k, t=t)
    return Outcome(examined=examined)


# columns --------------------------------------------------------------------

@check("ordered_lsm_columns", "after ordering, a minimal a_k with z_k(a_k) = c_k and no later column below it stays minimal with z_n(a_k) = c_k")
def _ordered_lsm_columns(s: Structures, config: VerifyConfig) -> Outcome:
    ordered, permutation = order_columns(s.instance)
    for k, later in dominance_violations(ordered):
        raise PropertyViolation("ordering leaves a dominating column first",
                                {"column": permutation[k] + 1, "later": permutation[later] + 1,
                                 "beta": list(ordered.column(later))})
    stack = build_stack(ordered, Retention.ALL_K)
    n = ordered.n
    examined = 0
    for k in range(1, n + 1):
        a_k = ordered.column(k - 1)
        c_k = int(ordered.c[k - 1])
        later_below = any(
            all(u <= v for u, v in zip(ordered.column(j), a_k)) for j in range(k, n)
        )
        if later_below or not is_lsm(stack, k, a_k) or stack.value(k, a_k) != c_k:
            continue
        examined += 1
        if stack.value(n, a_k) != c_k or not is_lsm(stack, n, a_k):
            raise PropertyViolation("column loses minimality after ordering",
                                    {"column": permutation[k - 1] + 1, "beta": list(a_k)})
    return Outcome(examined=examined)


@check("dominated_columns", "a column with z_n(a_j) > c_j is used by no optimum anywhere")
def _dominated_columns(s: Structures, config: VerifyConfig) -> Outcome:
    inst = s.instance
    n = inst.n
    examined = 0
    for j in range(n):
        if s.stack.value(n, inst.column(j)) > int(inst.c[j]):
            examined += 1
            used = np.flatnonzero(usable_mask(s.stack, n, j))
            if used.size:
                raise _fail("dominated column appears in an optimum", s, used[0], j=j + 1)
    return Outcome(examined=examined)


@check("column_trichotomy", "z_k(a_k) = max(z_{k-1}(a_k), c_k) and the BELOW/EQUAL/ABOVE tags are consistent")
def _column_trichotomy(s: Structures, config: VerifyConfig) -> Outcome:
    inst = s.instance
    classification = classify_columns(inst, s.stack)
    for info in classification.columns:
        k = info.level
        a_k = inst.column(k - 1)
        c_k = int(inst.c[k - 1])
        witness = {"k": k, "beta": list(a_k), "case": info.case.value}
        if s.stack.value(k, a_k) != max(info.witness, c_k):
            raise PropertyViolation("z_k(a_k) is not max(z_{k-1}(a_k), c_k)", witness)
        if info.case is ColumnCase.BELOW and not info.lsm_flag:
            raise PropertyViolation("BELOW column is not minimal", witness)
        if info.case is not ColumnCase.BELOW and info.lsm_flag != is_lsm(s.stack, k - 1, a_k):
            raise PropertyViolation("minimality of a_k changed between levels", witness)
        if info.necessary_flag and info.case is ColumnCase.ABOVE:
            raise PropertyViolation("ABOVE column marked necessary", witness)
    return Outcome(examined=inst.n)


@check("necessity_soundness", "dropping every unnecessary column leaves z_n unchanged")
def _necessity_soundness(s: Structures, config: VerifyConfig) -> Outcome:
    kept = classify_columns(s.instance, s.stack).necessary_columns()
    reduced = build_stack(s.instance.with_columns(kept), Retention.FINAL_ONLY)
    bad = np.flatnonzero(reduced.final != s.stack.final)
    if bad.size:
        raise _fail("reduced instance has a different value function", s, bad[0], kept=[j + 1 for j in kept])
    return Outcome(examined=s.stack.box.cell_count, note=f"{len(kept)} of {s.instance.n} columns kept")


@check("saturation", "once every point is minimal at some level, it stays so at all later levels")
def _saturation(s: Structures, config: VerifyConfig) -> Outcome:
    first = lsm_saturation(s.stack)
    note = "no level saturates" if first is None else f"saturates at k={first}"
    return Outcome(examined=s.stack.n + 1, note=note)


# MC-level sets --------------------------------------------------------------

def reference_labels(stack: ValueStack) -> np.ndarray:
    """Per-cell partition ids from scipy's face-connected labelling of each value mask of z_n."""
    grid = stack.grid(stack.n)
    structure = nd.generate_binary_structure(stack.box.m, 1)
    ids = np.zeros(grid.shape, dtype=np.int64)
    offset = 0
    for alpha in np.unique(grid):
        labels, count = nd.label(grid == alpha, structure=structure)
        inside = labels > 0
        ids[inside] = labels[inside] + offset
        offset += count
    return ids.reshape(-1, order="F")


@check("component_labels", "labels are exactly the classes of equal-valued axis adjacency")
def _component_labels(s: Structures, config: VerifyConfig) -> Outcome:
    reference = reference_labels(s.stack).tolist()
    labels = s.cmap.labels.tolist()
    by_reference, by_label = {}, {}
    for i, (ref, label) in enumerate(zip(reference, labels)):
        if by_reference.setdefault(ref, label) != label or by_label.setdefault(label, ref) != ref:
            raise _fail("labelling disagrees with scipy's face-connected labelling", s, i,
                        k=s.stack.n, label=label, expected_label=by_reference[ref])
    return Outcome(examined=len(labels), note=f"{len(by_label)} components")


@check("adjacent_paths", "any two members of a component join by a simple in-component path of unit steps")
def _adjacent_paths(s: Structures, config: VerifyConfig) -> Outcome:
    examined = 0
    for component in s.cmap.components:
        source = component.members[0]
        inside = set(component.members)
        for target in component.members:
            path = adjacent_path(s.cmap, source, target).points
            examined += 1
            steps_ok = all(sum(abs(p - q) for p, q in zip(u, v)) == 1 for u, v in zip(path, path[1:]))
            if (path[0] != source or path[-1] != target or not steps_ok
                    or len(set(path)) != len(path) or any(p not in inside for p in path)):
                raise PropertyViolation("lattice path leaves the component or revisits a point",
                                        {"beta": list(source), "target": list(target)})
    return Outcome(examined=examined)


@check("segment", "equal value and componentwise domination imply the same component")
def _segment(s: Structures, config: VerifyConfig) -> Outcome:
    box = s.stack.box
    final = s.stack.final
    labels = s.cmap.labels
    examined = 0
    for i in range(box.cell_count):
        above = np.all(box.coords >= box.coords[i], axis=1) & (final == final[i])
        examined += int(above.sum())
        bad = np.flatnonzero(above & (labels != labels[i]))
        if bad.size:
            raise _fail("dominating equal-valued point in another component", s, i,
                        other=_point(s, bad[0]))
    return Outcome(examined=examined)


@check("isovalue_paths", "fractional points of one set join by axis steps of length at most one inside it")
def _isovalue_paths(s: Structures, config: VerifyConfig) -> Outcome:
    box = s.stack.box
    examined = 0

    def lifted(point):
        return tuple(str(v + 0.5) if v < bi else str(v) for v, bi in zip(point, box.b))

    for component in s.cmap.components:
        start, end = lifted(component.members[0]), lifted(component.members[-1])
        steps = isovalue_path(s.cmap, start, end).steps()
        examined += 1
        for u, v in zip(steps, steps[1:]):
            moved = [abs(p - q) for p, q in zip(u, v) if p != q]
            if len(moved) != 1 or not 0 < moved[0] <= 1:
                raise PropertyViolation("isovalue path takes a non-axis or long step",
                                        {"beta": [str(p) for p in u], "next": [str(q) for q in v]})
        for point in steps:
            if s.cmap.label(floor_point(point)) != component.id:
                raise PropertyViolation("isovalue path leaves the set",
                                        {"beta": [str(p) for p in point], "component": component.id})
    return Outcome(examined=examined)


def _first_difference(s: Structures, expected, actual) -> list[int]:
    """First point, in flat order, on which two point sets disagree."""
    box = s.stack.box
    return list(min(set(expected) ^ set(actual), key=box.index))


@check("frontier", "a point lies in a set iff it has the set's value and dominates a minimal member")
def _frontier(s: Structures, config: VerifyConfig) -> Outcome:
    examined = 0
    for component in s.cmap.components:
        frontier = lsm_frontier(s.cmap, s.stack, component.id)
        examined += len(component.members)
        if frontier != component.minimal_members:
            raise PropertyViolation(
                f"frontier of component {component.id} differs from its minimal members",
                {"k": s.stack.n, "component": component.id,
                 "beta": _first_difference(s, component.minimal_members, frontier),
                 "expected": [list(p) for p in component.minimal_members],
                 "actual": [list(p) for p in frontier]},
            )
    return Outcome(examined=examined)


@check("lsm_chains", "frontier points of one set are chained through dominating in-set witnesses")
def _lsm_chains(s: Structures, config: VerifyConfig) -> Outcome:
    examined = 0
    for component in s.cmap.components:
        frontier = component.minimal_members
        for target in frontier[1:]:
            chain = lsm_chain(s.cmap, s.stack, frontier[0], target)
            examined += 1
            for (u, v), w in zip(zip(chain.points, chain.points[1:]), chain.witnesses):
                dominates = all(p >= q for p, q in zip(w, u)) and all(p >= q for p, q in zip(w, v))
                if w not in component or not dominates or w in (u, v):
                    raise PropertyViolation("chain witness does not strictly dominate its pair",
                                            {"beta": list(u), "next": list(v), "witness": list(w)})
    return Outcome(examined=examined)


@check("step_down_coupling", "stepping a member and its minimal base down by t a_j keeps them together")
def _step_down_coupling(s: Structures, config: VerifyConfig) -> Outcome:
    examined = 0
    n = s.stack.n
    canonical = canonical_optima(s.dag)
    box = s.stack.box
    for component in s.cmap.components:
        if component.value <= 0:
            continue
        for base in component.minimal_members:
            x_star = canonical[n][box.index(base)]
            region = [p for p in component.members if all(u >= v for u, v in zip(p, base))]
            for j, count in enumerate(x_star):
                for t in range(1, count + 1):
                    for beta in region:
                        step_down_component(s.cmap, s.stack, s.dag, base, beta, j, t, x_star=x_star)
                        examined += 1
    touching = sum(c.boundary_touching for c in s.cmap.components)
    return Outcome(examined=examined, note=f"{touching} components touch the box boundary")


@check("common_optima", "an optimum at a minimal member stays optimal at every member dominating it")
def _common_optima(s: Structures, config: VerifyConfig) -> Outcome:
    examined = 0
    truncated = 0
    for component in s.cmap.components:
        for entry in common_optima(s.cmap, s.stack, s.dag, component.id, cap=config.optima_cap):
            examined += len(entry.optima) * len(entry.region)
            truncated += entry.optima.truncated
    if truncated:
        raise TruncatedOptimaError(f"{truncated} optima sets truncated at {config.optima_cap}")
    return Outcome(examined=examined)


@check("hypercube_cover", "unit cubes anchored at the members cover the set and chain through shared faces")
def _hypercube_cover(s: Structures, config: VerifyConfig) -> Outcome:
    box = s.stack.box
    examined = 0
    skipped = 0
    for component in s.cmap.components:
        if component.boundary_touching:
            skipped += 1
            continue
        cells = {box.point(int(i)) for i in np.flatnonzero(s.cmap.labels == component.id)}
        if set(component.members) != cells:
            raise PropertyViolation(
                f"members of component {component.id} differ from its labelled cells",
                {"k": s.stack.n, "component": component.id,
                 "beta": _first_difference(s, component.members, cells),
                 "expected": sorted((list(p) for p in cells), key=box.index),
                 "actual": [list(p) for p in component.members]},
            )
        cover = hypercube_cover(s.cmap, component.id)
        anchors = set(cover.anchors)
        if anchors != cells:
            raise PropertyViolation(
                f"cover anchors of component {component.id} differ from its labelled cells",
                {"k": s.stack.n, "component": component.id, "beta": _first_difference(s, anchors, cells)},
            )
        for u, v in zip(cover.certificate, cover.certificate[1:]):
            if sum(abs(p - q) for p, q in zip(u, v)) != 1 or v not in anchors:
                raise PropertyViolation("consecutive cubes do not share a face",
                                        {"k": s.stack.n, "component": component.id,
                                         "beta": list(u), "next": list(v)})
        examined += 1
    return Outcome(examined=examined, note=f"{skipped} boundary-touching components not certified")


def run_check(check_id: str, structures: Structures, config: Optional[VerifyConfig] = None) -> CheckResult:
    if check_id not in CHECKS:
        raise KeyError(f"unknown check id: {check_id}")
    if structures.stack.retention is not Retention.ALL_K:
        raise RetentionError("verification needs a stack built with all levels retained")
    config = config or VerifyConfig()
    _, fn = CHECKS[check_id]
    try:
        outcome = fn(structures, config)
    except PropertyViolation as e:
        logger.warning(f"Check {check_id} FAILED: {e}")
        return CheckResult(check_id, Status.FAIL, witness=e.witness, reason=str(e))
    except PreconditionError as e:
        # the check only calls operations whose hypotheses the tables guarantee
        logger.warning(f"Check {check_id} FAILED: guaranteed hypothesis rejected: {e}")
        return CheckResult(check_id, Status.FAIL, witness={"rejected": str(e)},
                           reason=f"guaranteed hypothesis rejected: {e}")
    except (TruncatedOptimaError, EnumerationCapError) as e:
        logger.warning(f"Check {check_id} declined: {e}")
        return CheckResult(check_id, Status.DECLINED, reason=str(e))
    return CheckResult(check_id, Status.PASS, examined=outcome.examined,
                       sampled=outcome.sampled, note=outcome.note)


def run_suite(structures: Structures, config: Optional[VerifyConfig] = None) -> Report:
    config = config or VerifyConfig()
    report = Report(
        instance_name=structures.instance.name,
        cell_count=structures.stack.box.cell_count,
        levels=structures.stack.n + 1,
    )
    for check_id in sorted(CHECKS):
        logger.info(f"Running check {check_id}")
        report.results.append(run_check(check_id, structures, config))
    logger.info(
        f"Suite finished: {len(report.failures)} FAIL, {len(report.declined)} DECLINED "
        f"of {len(report.results)}"
    )
    return report
