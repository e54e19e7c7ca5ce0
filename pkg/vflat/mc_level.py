"""
Maximal connected level lattices over the box.

A component is a maximal set of lattice points with equal z_n joined by unit
steps; T(beta) is represented by the anchors floor(beta) that carry its label.
"""

import logging
from collections import deque
from dataclasses import dataclass
from decimal import Decimal
from typing import Optional, Sequence

import numpy as np

from vflat.errors import (
    DifferentComponentsError,
    OutsideBoxError,
    PreconditionError,
    PropertyViolation,
)
from vflat.level_sets import lsm_mask
from vflat.solutions import (
    DEFAULT_OPTIMA_CAP,
    OptimaSet,
    SolutionDag,
    SolutionLike,
    all_optima,
    as_solution,
    is_optimal,
    one_optimum,
)
from vflat.value_table import LatticeBox, ValueStack, floor_point, parse_decimal_point

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Component:
    id: int
    value: int
    members: tuple
    minimal_members: tuple  # no axis-down neighbour inside the component
    boundary_axes: tuple  # 0-based axes i where some member has beta_i = b_i

    @property
    def boundary_touching(self) -> bool:
        return bool(self.boundary_axes)

    def __contains__(self, beta) -> bool:
        return tuple(beta) in self.members


@dataclass(frozen=True, eq=False)
class ComponentMap:
    box: LatticeBox
    labels: np.ndarray
    components: tuple

    def label(self, beta: Sequence[int]) -> int:
        return int(self.labels[self.box.index(self.box.require(beta))])

    def component(self, component_id: int) -> Component:
        if not 0 <= component_id < len(self.components):
            raise PreconditionError(f"no component with id {component_id}")
        return self.components[component_id]


def _neighbours(box: LatticeBox, point: Sequence[int], index: int):
    """Axis neighbours, lowest axis first, decreasing step before increasing."""
    for axis, stride in enumerate(box.strides):
        if point[axis] > 0:
            yield index - stride
        if point[axis] < box.b[axis]:
            yield index + stride


def label_components(stack: ValueStack) -> ComponentMap:
    """Breadth-first labelling of equal-value axis-adjacent cells of the final table.

    Ids follow the flat index of each component's first cell.
    """
    box = stack.box
    values = stack.final.tolist()
    coords = box.coords.tolist()
    labels = [-1] * box.cell_count
    components = []

    for start in range(box.cell_count):
        if labels[start] != -1:
            continue
        component_id = len(components)
        value = values[start]
        labels[start] = component_id
        members = [start]
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for nb in _neighbours(box, coords[i], i):
                if labels[nb] == -1 and values[nb] == value:
                    labels[nb] = component_id
                    members.append(nb)
                    queue.append(nb)
        members.sort()

        minimal = []
        boundary = set()
        for i in members:
            point = coords[i]
            if all(point[a] == 0 or labels[i - s] != component_id for a, s in enumerate(box.strides)):
                minimal.append(i)
            boundary.update(a for a in range(box.m) if point[a] == box.b[a])
        components.append(Component(
            id=component_id,
            value=value,
            members=tuple(tuple(coords[i]) for i in members),
            minimal_members=tuple(tuple(coords[i]) for i in minimal),
            boundary_axes=tuple(sorted(boundary)),
        ))

    label_array = np.array(labels, dtype=np.int64)
    label_array.setflags(write=False)
    logger.info(f"Labelled {len(components)} components over {box.cell_count} cells")
    return ComponentMap(box=box, labels=label_array, components=tuple(components))


def component_of(cmap: ComponentMap, beta: Sequence) -> int:
    """Label of floor(beta); beta may carry decimal coordinates."""
    decimals = parse_decimal_point(beta)
    if any(d < 0 for d in decimals):
        raise OutsideBoxError(f"point {[str(d) for d in decimals]} has a negative coordinate")
    return cmap.label(floor_point(decimals))


@dataclass(frozen=True)
class LatticePath:
    points: tuple  # lattice points, consecutive ones adjacent
    head: tuple = ()  # fractional start rounded down to points[0]
    tail: tuple = ()  # from points[-1] up to the fractional end

    def steps(self) -> list[tuple]:
        """The whole path with shared junction points listed once."""
        out = list(self.head)
        for part in (self.points, self.tail):
            for point in part:
                if not out or out[-1] != point:
                    out.append(point)
        return out


def adjacent_path(cmap: ComponentMap, beta1: Sequence[int], beta2: Sequence[int]) -> LatticePath:
    """Shortest in-component path of unit steps from beta1 to beta2."""
    box = cmap.box
    start = box.index(box.require(beta1))
    goal = box.index(box.require(beta2))
    label = int(cmap.labels[start])
    if int(cmap.labels[goal]) != label:
        raise DifferentComponentsError(
            f"{list(beta1)} and {list(beta2)} lie in different components"
        )

    labels = cmap.labels
    parent = {start: None}
    queue = deque([start])
    while queue and goal not in parent:
        i = queue.popleft()
        for nb in _neighbours(box, box.point(i), i):
            if nb not in parent and labels[nb] == label:
                parent[nb] = i
                queue.append(nb)

    path = []
    i = goal
    while i is not None:
        path.append(box.point(i))
        i = parent[i]
    return LatticePath(points=tuple(reversed(path)))


def isovalue_path(cmap: ComponentMap, beta1: Sequence, beta2: Sequence) -> LatticePath:
    """Axis-aligned path between two decimal points of one MC-level set.

    The head rounds beta1 down one coordinate at a time, the middle is the
    lattice path between the floors, and the tail raises coordinates to beta2.
    """
    start = parse_decimal_point(beta1)
    end = parse_decimal_point(beta2)
    if component_of(cmap, start) != component_of(cmap, end):
        raise DifferentComponentsError(f"{beta1} and {beta2} lie in different components")
    if start == end:
        return LatticePath(points=(), head=(start,))

    low_start = tuple(Decimal(v) for v in floor_point(start))
    low_end = tuple(Decimal(v) for v in floor_point(end))

    head = []
    if start != low_start:
        current = list(start)
        head.append(tuple(current))
        for axis in range(len(current)):
            if current[axis] != low_start[axis]:
                current[axis] = low_start[axis]
                head.append(tuple(current))

    tail = []
    if end != low_end:
        current = list(low_end)
        tail.append(tuple(current))
        for axis in range(len(current)):
            if current[axis] != end[axis]:
                current[axis] = end[axis]
                tail.append(tuple(current))

    middle = adjacent_path(cmap, [int(v) for v in low_start], [int(v) for v in low_end])
    return LatticePath(points=middle.points, head=tuple(head), tail=tuple(tail))


@dataclass(frozen=True)
class HypercubeCover:
    component_id: int
    anchors: tuple  # minimal vertices of the unit hypercubes covering the set
    truncated_anchors: tuple  # anchors whose cube leaves the box
    certificate: tuple  # anchors of a chain of face-sharing cubes between a sampled pair


def hypercube_cover(cmap: ComponentMap, component_id: int,
                    pair: Optional[tuple] = None) -> HypercubeCover:
    """Anchored unit hypercubes covering the closure of the MC-level set.

    The certificate joins `pair` (default: first and last anchor); consecutive
    cubes share an (m-1)-dimensional face because their anchors are adjacent.
    """
    component = cmap.component(component_id)
    box = cmap.box
    anchors = component.members
    truncated = tuple(a for a in anchors if any(v == bi for v, bi in zip(a, box.b)))
    if component.boundary_touching:
        logger.warning(
            f"Component {component_id} touches the upper box faces on axes "
            f"{[a + 1 for a in component.boundary_axes]}; its cover is truncated"
        )

    if len(anchors) == 1 and pair is None:
        certificate = ()
    else:
        first, last = pair if pair is not None else (anchors[0], anchors[-1])
        if tuple(first) not in component or tuple(last) not in component:
            raise PreconditionError(f"pair {pair} is not inside component {component_id}")
        certificate = adjacent_path(cmap, first, last).points
    return HypercubeCover(
        component_id=component_id,
        anchors=anchors,
        truncated_anchors=truncated,
        certificate=certificate,
    )


def lsm_frontier(cmap: ComponentMap, stack: ValueStack, component_id: int) -> tuple:
    """Level-set-minimal members of a component.

    Asserts that every member dominates a frontier point and that no
    equal-valued point outside the component dominates one.
    """
    component = cmap.component(component_id)
    box = cmap.box
    final = stack.final
    lsm = lsm_mask(box, final)
    in_component = cmap.labels == component_id
    frontier = [box.point(int(i)) for i in np.flatnonzero(in_component & lsm)]

    covered = np.zeros(box.cell_count, dtype=bool)
    strangers = (final == component.value) & ~in_component
    for point in frontier:
        above = np.all(box.coords >= np.asarray(point), axis=1)
        covered |= above
        intruders = np.flatnonzero(above & strangers)
        if intruders.size:
            intruder = box.point(int(intruders[0]))
            raise PropertyViolation(
                f"{list(intruder)} dominates frontier point {list(point)} "
                f"with equal value but lies outside component {component_id}",
                {"k": stack.n, "component": component_id, "beta": list(intruder), "frontier": list(point)},
            )
    uncovered = np.flatnonzero(in_component & ~covered)
    if uncovered.size:
        member = box.point(int(uncovered[0]))
        raise PropertyViolation(
            f"member {list(member)} of component {component_id} dominates no frontier point",
            {"k": stack.n, "component": component_id, "beta": list(member), "frontier": [list(p) for p in frontier]},
        )
    return tuple(frontier)


@dataclass(frozen=True)
class LsmChain:
    points: tuple  # distinct frontier points from start to end
    witnesses: tuple  # witnesses[i] strictly dominates points[i] and points[i+1]


def lsm_chain(cmap: ComponentMap, stack: ValueStack, start: Sequence[int], end: Sequence[int]) -> LsmChain:
    """Chain of frontier points joined through in-component dominating witnesses.

    Two frontier points are linked when their componentwise maximum has the
    component's value; that maximum is then the witness.
    """
    box = cmap.box
    start = box.require(start)
    end = box.require(end)
    component_id = cmap.label(start)
    frontier = lsm_frontier(cmap, stack, component_id)
    if start not in frontier or end not in frontier:
        raise PreconditionError(
            f"{list(start)} and {list(end)} are not both on the frontier of component {component_id}"
        )
    alpha = cmap.component(component_id).value

    def link(u, v):
        top = tuple(max(p, q) for p, q in zip(u, v))
        return top if stack.value(stack.n, top) == alpha else None

    parent = {start: None}
    queue = deque([start])
    while queue and end not in parent:
        u = queue.popleft()
        for v in frontier:
            if v not in parent and link(u, v) is not None:
                parent[v] = u
                queue.append(v)
    if end not in parent:
        raise PropertyViolation(
            f"no chain joins {list(start)} and {list(end)} in component {component_id}",
            {"k": stack.n, "component": component_id, "beta": list(start), "end": list(end)},
        )

    chain = []
    node = end
    while node is not None:
        chain.append(node)
        node = parent[node]
    chain.reverse()
    witnesses = tuple(link(u, v) for u, v in zip(chain, chain[1:]))
    return LsmChain(points=tuple(chain), witnesses=witnesses)


@dataclass(frozen=True)
class CommonOptimum:
    base: tuple  # minimal member the optima are taken at
    optima: OptimaSet
    region: tuple  # members dominating base


def common_optima(cmap: ComponentMap, stack: ValueStack, dag: SolutionDag, component_id: int,
                  cap: int = DEFAULT_OPTIMA_CAP) -> list[CommonOptimum]:
    """For each minimal member, its optima and the members where they stay optimal."""
    component = cmap.component(component_id)
    n = stack.n
    results = []
    for base in component.minimal_members:
        optima = all_optima(dag, n, base, cap=cap)
        region = tuple(p for p in component.members if all(u >= v for u, v in zip(p, base)))
        for solution in optima.solutions:
            for point in region:
                if not is_optimal(stack, n, point, solution):
                    raise PropertyViolation(
                        f"x={list(solution.x)} optimal at {list(base)} is not optimal at {list(point)}",
                        {"base": list(base), "beta": list(point), "x": list(solution.x)},
                    )
        if optima.truncated:
            logger.warning(f"Optima at {list(base)} truncated at {cap}; region certified partially")
        results.append(CommonOptimum(base=base, optima=optima, region=region))
    return results


def step_down_component(cmap: ComponentMap, stack: ValueStack, dag: SolutionDag,
                        base: Sequence[int], beta: Sequence[int], j: int, t: int,
                        x_star: Optional[SolutionLike] = None) -> tuple[tuple, tuple]:
    """Shift a dominating member and its LSM base down by t a_j; both must share a component.

    j is 0-based. x* defaults to the canonical optimum at base. Returns
    (beta - t a_j, base - t a_j).
    """
    box = cmap.box
    base = box.require(base)
    beta = box.require(beta)
    n = stack.n
    if not bool(lsm_mask(box, stack.final)[box.index(base)]):
        raise PreconditionError(f"{list(base)} is not level-set-minimal")
    if stack.value(n, base) <= 0:
        raise PreconditionError(f"z({list(base)}) must be positive")
    if cmap.label(beta) != cmap.label(base) or any(u < v for u, v in zip(beta, base)):
        raise PreconditionError(f"{list(beta)} is not a member of T({list(base)}) dominating it")
    x_star = one_optimum(dag, n, base) if x_star is None else as_solution(stack.instance, x_star)
    if not is_optimal(stack, n, base, x_star):
        raise PreconditionError(f"x*={list(x_star.x)} is not optimal at {list(base)}")
    if not 0 <= j < n or x_star.x[j] <= 0 or not 0 <= t <= x_star.x[j]:
        raise PreconditionError(f"need x*_{j + 1} > 0 and 0 <= t <= x*_{j + 1}")

    column = stack.instance.column(j)
    lowered = tuple(v - t * a for v, a in zip(beta, column))
    lowered_base = tuple(v - t * a for v, a in zip(base, column))
    if cmap.label(lowered) != cmap.label(lowered_base):
        raise PropertyViolation(
            f"{list(lowered)} and {list(lowered_base)} lie in different components",
            {"base": list(base), "beta": list(beta), "j": j + 1, "t": t},
        )
    return lowered, lowered_base


def segment_check(cmap: ComponentMap, stack: ValueStack, low: Sequence, high: Sequence) -> bool:
    """Equal value and componentwise domination put two points in one MC-level set."""
    low_d = parse_decimal_point(low)
    high_d = parse_decimal_point(high)
    if any(h < lo for h, lo in zip(high_d, low_d)):
        raise PreconditionError(f"{high} does not dominate {low}")
    n = stack.n
    if stack.value(n, floor_point(low_d)) != stack.value(n, floor_point(high_d)):
        raise PreconditionError(f"{low} and {high} have different values")
    if component_of(cmap, low_d) != component_of(cmap, high_d):
        raise PropertyViolation(
            f"{high} dominates {low} with equal value but lies in another component",
            {"k": n, "beta": [str(v) for v in low_d], "high": [str(v) for v in high_d]},
        )
    return True
