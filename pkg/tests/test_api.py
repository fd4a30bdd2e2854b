"""Types, plan configuration, and job validation."""

import pickle

import pytest

from vertexflow import (NULL, CombinedList, ComputeOutput, Connector, GroupBy,
                        JobSpec, Join, PlanConfig, Storage, UserProgram,
                        VertexTuple, default_combine, enumerate_plans,
                        partition_fn, validate_job)
from vertexflow.types import halt_contribution


def test_null_is_singleton():
    assert NULL is pickle.loads(pickle.dumps(NULL))
    assert NULL is not None
    assert repr(NULL) == "NULL"


def test_default_combine_flattens():
    got = default_combine([1, CombinedList([2, 3]), 4])
    assert isinstance(got, CombinedList)
    assert list(got) == [1, 2, 3, 4]
    with pytest.raises(ValueError):
        default_combine([])


def test_halt_contribution():
    v = VertexTuple(1, True, 0.0, [])
    assert halt_contribution(v, [])
    assert not halt_contribution(v, [(2, 1.0)])
    v.halt = False
    assert not halt_contribution(v, [])
    out = ComputeOutput(VertexTuple(1, True, 0.0, []), messages=[(2, 0.5)])
    assert out.halt_contribution is False


def test_sixteen_plans():
    plans = enumerate_plans()
    assert len(plans) == 16
    assert len(set(plans)) == 16
    for p in plans:
        assert p.violations() == []
    joins = {p.join for p in plans}
    stores = {p.storage for p in plans}
    assert joins == {Join.FULL_OUTER, Join.LEFT_OUTER}
    assert stores == {Storage.BTREE, Storage.LSM}


def test_preclustered_needs_merge_connector():
    bad = PlanConfig(group_by=GroupBy.PRECLUSTERED, connector=Connector.PIPELINED)
    assert bad.violations()
    ok = PlanConfig(group_by=GroupBy.PRECLUSTERED, connector=Connector.MERGE)
    assert ok.violations() == []


def test_partition_fn_is_deterministic_and_spread():
    hits = [0] * 8
    for vid in range(10000):
        p = partition_fn(vid, 8)
        assert p == partition_fn(vid, 8)  # sticky across calls
        hits[p] += 1
    assert min(hits) > 900  # roughly balanced


def _noop_program():
    def compute(v, payload, gs):
        v.halt = True
        return ComputeOutput(v)
    return UserProgram(name="noop", compute=compute)


def test_validate_job():
    prog = _noop_program()
    ok = JobSpec(program=prog, input_path="in", output_path="out")
    assert validate_job(ok) == []
    bad = JobSpec(program=prog, input_path="in", output_path="out",
                  num_partitions=0, checkpoint_every=-1,
                  buffer_cache_bytes=1024,
                  plan=PlanConfig(group_by=GroupBy.PRECLUSTERED))
    problems = validate_job(bad)
    assert len(problems) == 4
