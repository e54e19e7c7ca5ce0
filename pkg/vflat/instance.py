import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from vflat.errors import InstanceError, RetentionError

logger = logging.getLogger(__name__)

INSTANCE_KEYS = ("name", "A", "c", "b")


@dataclass(frozen=True, eq=False)
class Instance:
    """Data of max{c x : A x <= beta, x integer >= 0} with 0 <= beta <= b.

    Arrays are stored read-only; columns are 0-based internally and printed
    1-based by the CLI.
    """

    A: np.ndarray
    c: np.ndarray
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        for attr in ("A", "c", "b"):
            arr = np.array(getattr(self, attr), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        if self.A.ndim != 2:
            raise InstanceError("A must be a matrix")

    @property
    def m(self) -> int:
        return int(self.A.shape[0])

    @property
    def n(self) -> int:
        return int(self.A.shape[1])

    def column(self, j: int) -> tuple:
        return tuple(int(v) for v in self.A[:, j])

    def columns(self) -> list[tuple]:
        return [self.column(j) for j in range(self.n)]

    def with_bound(self, b: Sequence[int]) -> "Instance":
        return Instance(A=self.A, c=self.c, b=np.array(b), name=self.name)

    def with_columns(self, order: Sequence[int]) -> "Instance":
        """Instance whose j-th column is this instance's column order[j]."""
        order = list(order)
        return Instance(A=self.A[:, order], c=self.c[order], b=self.b, name=self.name)


@dataclass
class Violation:
    code: str
    message: str
    indices: list = field(default_factory=list)


@dataclass
class ValidationReport:
    issues: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.issues

    def describe(self) -> str:
        if self.passed:
            return "instance is valid"
        return "\n".join(f"{v.code}: {v.message}" for v in self.issues)


def validate(inst: Instance) -> ValidationReport:
    """
    Check the standing assumptions on an instance.

    Checks:
    1. Entries of A and b are nonnegative
    2. No column of A is the zero vector
    3. Every column fits in the box (a_j <= b)
    4. Objective coefficients are nonnegative (a negative-profit column is never used)
    """
    issues = []

    if inst.c.shape != (inst.n,):
        issues.append(Violation(
            "dimension mismatch", f"c has {inst.c.size} entries for {inst.n} columns"))
    if inst.b.shape != (inst.m,):
        issues.append(Violation(
            "dimension mismatch", f"b has {inst.b.size} entries for {inst.m} rows"))
    if inst.m == 0 or inst.n == 0:
        issues.append(Violation("empty instance", "need at least one row and one column"))
    if issues:
        return ValidationReport(issues)

    negative_cells = [(int(i), int(j)) for i, j in zip(*np.nonzero(inst.A < 0))]
    if negative_cells:
        issues.append(Violation(
            "negative constraint entry",
            f"A has negative entries at {[(i + 1, j + 1) for i, j in negative_cells]}",
            negative_cells,
        ))

    negative_b = [int(i) for i in np.nonzero(inst.b < 0)[0]]
    if negative_b:
        issues.append(Violation(
            "negative bound", f"b has negative entries at rows {[i + 1 for i in negative_b]}",
            negative_b,
        ))

    zero_columns = [int(j) for j in np.nonzero(~inst.A.any(axis=0))[0]]
    if zero_columns:
        issues.append(Violation(
            "zero column", f"columns {[j + 1 for j in zero_columns]} are zero vectors",
            zero_columns,
        ))

    exceeding = [int(j) for j in np.nonzero((inst.A > inst.b[:, None]).any(axis=0))[0]]
    if exceeding:
        issues.append(Violation(
            "column exceeds b",
            f"columns {[j + 1 for j in exceeding]} are not componentwise <= b={inst.b.tolist()}",
            exceeding,
        ))

    negative_c = [int(j) for j in np.nonzero(inst.c < 0)[0]]
    if negative_c:
        issues.append(Violation(
            "negative objective coefficient",
            f"c_j < 0 for columns {[j + 1 for j in negative_c]}; "
            "nonnegative data lets c be taken nonnegative without loss of generality",
            negative_c,
        ))

    return ValidationReport(issues)


def parse_instance(document: str, b_override: Optional[Sequence[int]] = None) -> Instance:
    """Parse and validate an instance document (a single JSON object).

    Raises InstanceError for malformed documents, non-integer entries,
    dimension mismatches and violated assumptions.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise InstanceError(f"malformed document: {e}")

    if not isinstance(data, dict):
        raise InstanceError("malformed document: expected a single object")
    unknown = set(data) - set(INSTANCE_KEYS)
    if unknown:
        raise InstanceError(f"malformed document: unknown keys {sorted(unknown)}")
    missing = [k for k in ("A", "c", "b") if k not in data]
    if missing:
        raise InstanceError(f"malformed document: missing keys {missing}")

    name = data.get("name", "")
    if not isinstance(name, str):
        raise InstanceError("malformed document: name must be a string")

    A = data["A"]
    if not isinstance(A, list) or not A or not all(isinstance(row, list) for row in A):
        raise InstanceError("malformed document: A must be a non-empty list of rows")
    for row in A:
        _require_integers(row, "A")
    _require_integers(data["c"], "c")
    _require_integers(data["b"], "b")

    m = len(A)
    n = len(A[0])
    if any(len(row) != n for row in A):
        raise InstanceError("dimension mismatch: rows of A have different lengths")
    if len(data["c"]) != n:
        raise InstanceError(f"dimension mismatch: c has {len(data['c'])} entries, A has {n} columns")
    b = list(b_override) if b_override is not None else data["b"]
    if b_override is not None:
        _require_integers(b, "b")
    if len(b) != m:
        raise InstanceError(f"dimension mismatch: b has {len(b)} entries, A has {m} rows")

    inst = Instance(A=np.array(A), c=np.array(data["c"]), b=np.array(b), name=name)
    report = validate(inst)
    if not report.passed:
        raise InstanceError(report.describe(), report=report)
    return inst


def load_instance(path: str, b_override: Optional[Sequence[int]] = None) -> Instance:
    with open(path, "r", encoding="utf-8") as f:
        document = f.read()
    inst = parse_instance(document, b_override=b_override)
    logger.info(f"Loaded instance {inst.name or path}: m={inst.m}, n={inst.n}, b={inst.b.tolist()}")
    return inst


def _require_integers(values, label: str) -> None:
    if not isinstance(values, list):
        raise InstanceError(f"malformed document: {label} must be a list")
    for v in values:
        # bool is an int subclass; reject it along with floats and strings
        if isinstance(v, bool) or not isinstance(v, int):
            raise InstanceError(f"non-integer entry in {label}: {v!r}")


def order_columns(inst: Instance) -> tuple[Instance, list[int]]:
    """Reorder columns so no column dominates a distinct later one.

    Sort key is (component sum, lexicographic, c, original index); a column
    that dominates another has a strictly larger sum, so it always comes
    later. Returns the reordered instance and the map new index -> original.
    """
    columns = inst.columns()
    permutation = sorted(
        range(inst.n),
        key=lambda j: (sum(columns[j]), columns[j], int(inst.c[j]), j),
    )
    return inst.with_columns(permutation), permutation


def dominance_violations(inst: Instance) -> list[tuple[int, int]]:
    """Pairs k < k' with a_k >= a_k' componentwise and a_k != a_k'."""
    columns = inst.columns()
    found = []
    for k in range(inst.n):
        for later in range(k + 1, inst.n):
            a, b = columns[k], columns[later]
            if a != b and all(x >= y for x, y in zip(a, b)):
                found.append((k, later))
    return found


class ColumnCase(str, Enum):
    BELOW = "BELOW"  # z_{k-1}(a_k) < c_k
    EQUAL = "EQUAL"
    ABOVE = "ABOVE"


@dataclass(frozen=True)
class ColumnInfo:
    level: int  # 1-based position k in the processed order
    original_index: int
    case: ColumnCase
    lsm_flag: bool
    necessary_flag: bool
    witness: int  # z_{k-1}(a_k)


@dataclass(frozen=True)
class ColumnClassification:
    columns: tuple[ColumnInfo, ...]

    @property
    def tags(self) -> list[ColumnCase]:
        return [info.case for info in self.columns]

    def necessary_columns(self) -> list[int]:
        """Original indices of the columns that can appear in some optimum."""
        return sorted(info.original_index for info in self.columns if info.necessary_flag)


def classify_columns(inst: Instance, stack, permutation: Optional[Sequence[int]] = None) -> ColumnClassification:
    """Tag each column by comparing z_{k-1}(a_k) with c_k.

    `stack` must be built for `inst` with all levels retained. `permutation`
    maps positions back to original column indices (identity if omitted).
    """
    from vflat.level_sets import is_lsm
    from vflat.value_table import Retention

    if stack.retention is not Retention.ALL_K:
        raise RetentionError("classify_columns needs a stack built with all levels retained")

    permutation = list(permutation) if permutation is not None else list(range(inst.n))
    infos = []
    for k in range(1, inst.n + 1):
        a_k = inst.column(k - 1)
        c_k = int(inst.c[k - 1])
        before = stack.value(k - 1, a_k)
        if before < c_k:
            case = ColumnCase.BELOW
        elif before == c_k:
            case = ColumnCase.EQUAL
        else:
            case = ColumnCase.ABOVE
        lsm_flag = is_lsm(stack, k, a_k)
        necessary = stack.value(inst.n, a_k) == c_k and is_lsm(stack, inst.n, a_k)
        infos.append(ColumnInfo(
            level=k,
            original_index=permutation[k - 1],
            case=case,
            lsm_flag=lsm_flag,
            necessary_flag=necessary,
            witness=before,
        ))
    return ColumnClassification(tuple(infos))
