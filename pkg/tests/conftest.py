import dataclasses
import os

import numpy as np
import pytest

from vflat.instance import Instance, load_instance
from vflat.mc_level import label_components
from vflat.solutions import build_dag
from vflat.value_table import Retention, build_stack

INSTANCES_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "instances")
SIX_COLUMN = os.path.join(INSTANCES_DIR, "six_column.json")
CROSSED_PAIR = os.path.join(INSTANCES_DIR, "crossed_pair.json")


def random_instance(seed: int, max_entry: int = 3, max_bound: int = 8) -> Instance:
    """Valid instance with m in {1,2,3}, n <= 6, entries <= max_entry, b_i <= max_bound."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4))
    n = int(rng.integers(1, 7))
    b = rng.integers(1, max_bound + 1, size=m)
    columns = []
    while len(columns) < n:
        column = rng.integers(0, np.minimum(b, max_entry) + 1)
        if column.any():
            columns.append(column)
    c = rng.integers(1, max_entry + 1, size=n)
    return Instance(A=np.stack(columns, axis=1), c=c, b=b, name=f"random-{seed}")


@pytest.fixture
def six_column():
    """Six columns, two rows, bound (3,3)."""
    return load_instance(SIX_COLUMN, b_override=[3, 3])


@pytest.fixture
def six_column_tall():
    """Same instance at the file's own bound (3,4)."""
    return load_instance(SIX_COLUMN)


@pytest.fixture
def crossed_pair():
    return load_instance(CROSSED_PAIR)


@pytest.fixture
def stack(six_column):
    return build_stack(six_column, Retention.ALL_K)


@pytest.fixture
def tall_stack(six_column_tall):
    return build_stack(six_column_tall, Retention.ALL_K)


@pytest.fixture
def dag(stack):
    return build_dag(stack)


@pytest.fixture
def tall_dag(tall_stack):
    return build_dag(tall_stack)


@pytest.fixture
def cmap(stack):
    return label_components(stack)


@pytest.fixture
def pair_stack(crossed_pair):
    return build_stack(crossed_pair, Retention.ALL_K)


@pytest.fixture
def pair_dag(pair_stack):
    return build_dag(pair_stack)


@pytest.fixture
def pair_cmap(pair_stack):
    return label_components(pair_stack)


def relabelled(cmap, changes: dict):
    """Copy of a component map with some cells moved to another label; components untouched."""
    labels = cmap.labels.copy()
    for point, label in changes.items():
        labels[cmap.box.index(point)] = label
    labels.setflags(write=False)
    return dataclasses.replace(cmap, labels=labels)
