"""Physical plan configuration: the join / group-by / connector / storage
choice space and its legality rules."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Join(Enum):
    FULL_OUTER = "outer"
    LEFT_OUTER = "leftouter"


class GroupBy(Enum):
    SORT = "sort"
    HASHSORT = "hashsort"
    PRECLUSTERED = "preclustered"


class Connector(Enum):
    PIPELINED = "pipelined"
    MERGE = "merge"


class Storage(Enum):
    BTREE = "btree"
    LSM = "lsm"


@dataclass(frozen=True)
class PlanConfig:
    join: Join = Join.FULL_OUTER
    group_by: GroupBy = GroupBy.SORT
    connector: Connector = Connector.PIPELINED
    storage: Storage = Storage.BTREE

    def violations(self) -> list:
        out = []
        if self.group_by is GroupBy.PRECLUSTERED and self.connector is not Connector.MERGE:
            out.append(
                "preclustered group-by requires the merging connector "
                "(incoming tuples must already be clustered by vid)"
            )
        return out

    def describe(self) -> str:
        return "%s/%s/%s/%s" % (
            self.join.value,
            self.group_by.value,
            self.connector.value,
            self.storage.value,
        )


DEFAULT_PLAN = PlanConfig()

# The four message-combination strategies: in-memory grouping algorithm
# crossed with the connector.  With the merging connector the receiver side
# is always a one-pass preclustered group-by; with the plain partitioning
# connector the receiver re-groups with the same algorithm as the sender.
MESSAGE_STRATEGIES = (
    (GroupBy.SORT, Connector.PIPELINED),
    (GroupBy.HASHSORT, Connector.PIPELINED),
    (GroupBy.SORT, Connector.MERGE),
    (GroupBy.HASHSORT, Connector.MERGE),
)


def enumerate_plans() -> list:
    """All sixteen (2 joins x 2 storages x 4 message strategies) plans."""
    plans = []
    for join in Join:
        for storage in Storage:
            for group_by, connector in MESSAGE_STRATEGIES:
                plans.append(PlanConfig(join, group_by, connector, storage))
    return plans


_MIX_MASK = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer; a cheap 64-bit mixing hash with good balance."""
    x = (x + 0x9E3779B97F4A7C15) & _MIX_MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MIX_MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MIX_MASK
    return x ^ (x >> 31)


def partition_fn(vid: int, n: int) -> int:
    """Deterministic vid -> partition mapping, stable across supersteps and
    shared by the Vertex and Msg relations (the sticky property)."""
    if n < 1:
        raise ValueError("partition count must be >= 1")
    if n == 1:
        return 0
    return mix64(vid) % n
