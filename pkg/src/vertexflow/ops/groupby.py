"""Group-by operators that combine messages sharing a destination vid.

All three produce one (vid, combined_payload) tuple per distinct vid.
sort_group_by folds the combiner into both the in-memory sort phase and the
run-merge phase of an external sort; hashsort_group_by aggregates in a hash
table and sorts only on emit/spill; preclustered_group_by is a single pass
over input that is already clustered by vid.
"""

from __future__ import annotations

import heapq
import os
import tempfile

from ..types import CombinedList, NULL
from ..storage.framing import write_frame, iter_frames


class Combiner:
    """Pairwise-fold form of a user combine UDF (or the default gatherer)."""

    __slots__ = ("fn", "is_default")

    def __init__(self, user_combine=None):
        self.fn = user_combine
        self.is_default = user_combine is None

    def unit(self, payload):
        if self.is_default:
            if isinstance(payload, CombinedList):
                return payload
            return CombinedList((payload,))
        return payload

    def merge(self, acc, payload):
        if self.is_default:
            if isinstance(payload, CombinedList):
                acc.extend(payload)
            else:
                acc.append(payload)
            return acc
        return self.fn([acc, payload])


def make_combiner(user_combine=None) -> Combiner:
    return Combiner(user_combine)


class GroupByStats:
    __slots__ = ("spill_bytes", "spill_runs")

    def __init__(self):
        self.spill_bytes = 0
        self.spill_runs = 0


def _spill_run(items, codec, tmp_dir, stats):
    """Write sorted, pre-combined (vid, acc) pairs to a run file."""
    fh = tempfile.TemporaryFile(dir=tmp_dir)
    n = 0
    for vid, acc in items:
        n += write_frame(fh, vid, acc, codec)
    fh.seek(0)
    if stats is not None:
        stats.spill_bytes += n
        stats.spill_runs += 1
    return fh


def _sorted_combined(pairs, combiner):
    """Sort raw (vid, payload) pairs and fold duplicates."""
    pairs.sort(key=lambda t: t[0])
    out = []
    last_vid = None
    for vid, payload in pairs:
        if vid == last_vid:
            out[-1] = (vid, combiner.merge(out[-1][1], payload))
        else:
            out.append((vid, combiner.unit(payload)))
            last_vid = vid
    return out

def _merge_runs(runs, mem_items, codec, combiner):
    streams = [iter_frames(fh, codec) for fh in runs]
    streams.append(iter(mem_items))

    def tagged(stream, i):
        for vid, p in stream:
            yield vid, i, p

    last_vid = None
    acc = None
    for vid, _i, payload in heapq.merge(*(tagged(s, i) for i, s in enumerate(streams))):
        if vid == last_vid:
            acc = combiner.merge(acc, payload)
        else:
            if last_vid is not None:
                yield last_vid, acc
            last_vid = vid
            # run and mem contents are already accumulator-shaped
            acc = combiner.unit(payload) if combiner.is_default else payload
    if last_vid is not None:
        yield last_vid, acc
    for fh in runs:
        fh.close()


def sort_group_by(stream, combine, memory_budget: int, payload_codec,
                  tmp_dir: str = None, stats: GroupByStats = None):
    """Yield (vid, combined) ascending; spills sorted pre-combined runs when
    the in-memory buffer exceeds memory_budget bytes.  Without a payload
    codec the operator cannot serialize runs, so it never spills."""
    combiner = make_combiner(combine)
    runs = []
    pending = []
    used = 0
    for vid, payload in stream:
        pending.append((vid, payload))
        used += 24 + payload_codec.size(payload) if payload_codec else 0
        if used > memory_budget:
            runs.append(_spill_run(_sorted_combined(pending, combiner),
                                   payload_codec, tmp_dir, stats))
            pending = []
            used = 0
    mem = _sorted_combined(pending, combiner)
    if not runs:
        yield from mem
        return
    yield from _merge_runs(runs, mem, payload_codec, combiner)


def hashsort_group_by(stream, combine, memory_budget: int, payload_codec,
                      tmp_dir: str = None, stats: GroupByStats = None):
    """Same contract as sort_group_by, but the in-memory phase aggregates in
    a hash table (cheap when the number of distinct receivers is small)."""
    combiner = make_combiner(combine)
    runs = []
    table = {}
    used = 0
    for vid, payload in stream:
        acc = table.get(vid)
        if acc is None:
            table[vid] = combiner.unit(payload)
            used += 24 + payload_codec.size(payload) if payload_codec else 0
        else:
            table[vid] = combiner.merge(acc, payload)
            if combiner.is_default and payload_codec:
                used += payload_codec.size(payload)
        if used > memory_budget:
            runs.append(_spill_run(sorted(table.items()), payload_codec, tmp_dir, stats))
            table = {}
            used = 0
    mem = sorted(table.items())
    if not runs:
        yield from mem
        return
    yield from _merge_runs(runs, mem, payload_codec, combiner)


def preclustered_group_by(stream, combine):
    """Single-pass group-by over input already clustered by vid.  A key
    regression (a vid seen again after a different vid) is a contract
    violation."""
    combiner = make_combiner(combine)
    closed = set()
    last_vid = None
    acc = None
    for vid, payload in stream:
        if vid == last_vid:
            acc = combiner.merge(acc, payload)
            continue
        if vid in closed:
            raise ValueError(
                "preclustered group-by input not clustered: vid %d reappeared" % vid
            )
        if last_vid is not None:
            closed.add(last_vid)
            yield last_vid, acc
        last_vid = vid
        acc = combiner.unit(payload)
    if last_vid is not None:
        yield last_vid, acc
