"""Channels, partitioning connectors, group-by operators, joins."""

import random
import threading

import pytest

from vertexflow.ops import (hashsort_group_by, mton_partition,
                            mton_partition_merge, preclustered_group_by,
                            sort_group_by)
from vertexflow.ops.channel import Channel, Policy
from vertexflow.ops.connectors import SortContractViolation
from vertexflow.ops.groupby import GroupByStats
from vertexflow.ops.joins import (index_full_outer_join, index_left_outer_join,
                                  merge_msg_vid, null_msg)
from vertexflow.plan import partition_fn
from vertexflow.storage import BTree, BufferCache
from vertexflow.types import NULL, CombinedList, Float64Codec, VertexTuple


@pytest.mark.parametrize("policy", [Policy.FULLY_PIPELINED,
                                    Policy.SENDER_MATERIALIZING])
def test_channel_preserves_order(policy, tmp_path):
    ch = Channel(policy, capacity=4, tmp_dir=str(tmp_path))
    batches = [[(i, i * 2) for i in range(j, j + 5)] for j in range(0, 60, 5)]

    def feed():
        for b in batches:
            ch.put(b)
        ch.close()

    t = threading.Thread(target=feed)
    t.start()
    got = list(ch)
    t.join()
    assert got == [x for b in batches for x in b]
    if policy is Policy.SENDER_MATERIALIZING:
        assert ch.bytes_transferred > 0


def test_materializing_channel_never_blocks_producer(tmp_path):
    # capacity 1 with a consumer that only starts after all puts are done
    ch = Channel(Policy.SENDER_MATERIALIZING, capacity=1, tmp_dir=str(tmp_path))
    for j in range(200):
        ch.put([(j, j)])
    ch.close()
    assert len(list(ch)) == 200


def _drain_consumers(consumers, producer_threads):
    out = [[] for _ in consumers]

    def drain(i):
        out[i].extend(consumers[i])

    ts = [threading.Thread(target=drain, args=(i,)) for i in range(len(consumers))]
    for t in ts:
        t.start()
    for t in producer_threads:
        t.join()
    for t in ts:
        t.join()
    return out


def test_mton_partition_routes_every_tuple(rng):
    data = [sorted((rng.randrange(10**6), i) for _ in range(400))
            for i in range(3)]
    consumers, threads = mton_partition([iter(d) for d in data], 4,
                                        key_of=lambda t: t[0])
    out = _drain_consumers(consumers, threads)
    assert sorted(x for o in out for x in o) == sorted(x for d in data for x in d)
    for q, o in enumerate(out):
        assert all(partition_fn(k, 4) == q for k, _ in o)


def test_mton_merge_keeps_consumers_sorted(rng):
    data = [sorted((rng.randrange(500), i) for _ in range(300))
            for i in range(3)]
    consumers, threads = mton_partition_merge([iter(d) for d in data], 2,
                                              key_of=lambda t: t[0])
    out = _drain_consumers(consumers, threads)
    for o in out:
        assert [k for k, _ in o] == sorted(k for k, _ in o)
    assert sorted(x for o in out for x in o) == sorted(x for d in data for x in d)


@pytest.mark.filterwarnings(
    "ignore::pytest.PytestUnhandledThreadExceptionWarning")
def test_mton_merge_rejects_unsorted_producer():
    consumers, threads = mton_partition_merge([iter([(5, 0), (1, 0)])], 1,
                                              key_of=lambda t: t[0])
    with pytest.raises(SortContractViolation):
        list(consumers[0])
        for t in threads:
            t.join()


def _hash_agg_oracle(msgs, fold):
    table = {}
    for vid, p in msgs:
        table[vid] = p if vid not in table else fold(table[vid], p)
    return table


@pytest.mark.parametrize("gb", [sort_group_by, hashsort_group_by])
def test_group_by_matches_oracle_with_spills(gb, rng, tmp_path):
    msgs = [(rng.randrange(500), rng.random()) for _ in range(20000)]
    oracle = _hash_agg_oracle(msgs, min)
    stats = GroupByStats()
    got = list(gb(iter(msgs), min, 2048, Float64Codec(), str(tmp_path), stats))
    assert [k for k, _ in got] == sorted(oracle)
    assert all(oracle[k] == v for k, v in got)
    assert stats.spill_runs >= 2


def test_group_by_default_combiner_gathers(tmp_path):
    msgs = [(1, 10.0), (2, 20.0), (1, 11.0), (1, 12.0)]
    stats = GroupByStats()
    got = dict(sort_group_by(iter(msgs), None, 64, Float64Codec(),
                             str(tmp_path), stats))
    assert isinstance(got[1], CombinedList)
    assert sorted(got[1]) == [10.0, 11.0, 12.0]
    assert list(got[2]) == [20.0]


def test_preclustered_group_by_contract():
    ok = list(preclustered_group_by(iter([(2, 1.0), (2, 3.0), (1, 5.0)]), min))
    assert ok == [(2, 1.0), (1, 5.0)]
    with pytest.raises(ValueError):
        list(preclustered_group_by(iter([(2, 1.0), (1, 2.0), (2, 3.0)]), min))


def _index(tmp_path, rows):
    cache = BufferCache(32, 4096)
    bt = BTree(cache, str(tmp_path / "j.btree"), create=True)
    bt.bulk_load(iter(rows))
    return bt


def test_full_outer_join_covers_all_cases(tmp_path):
    bt = _index(tmp_path, [(1, b"v1"), (3, b"v3")])
    got = list(index_full_outer_join(iter([(2, "m")]), bt))
    assert got == [(1, NULL, b"v1"), (2, "m", None), (3, NULL, b"v3")]
    bt.close()


def test_left_outer_join_probes(tmp_path):
    bt = _index(tmp_path, [(3, b"v3"), (8, b"v8")])
    stream = iter([(2, "m"), (3, NULL), (8, "n")])
    got = list(index_left_outer_join(stream, bt))
    assert got == [(2, "m", None), (3, NULL, b"v3"), (8, "n", b"v8")]
    bt.close()


def test_merge_msg_vid_prefers_message():
    got = list(merge_msg_vid(iter([(5, "p")]), iter([(4, NULL), (5, NULL)])))
    assert got == [(4, NULL), (5, "p")]


def test_null_msg_only_for_active():
    active = VertexTuple(1, False, 0.0, [])
    halted = VertexTuple(2, True, 0.0, [])
    assert list(null_msg(active)) == [(1, NULL)]
    assert list(null_msg(halted)) == []
