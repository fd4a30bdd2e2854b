"""m-to-n data redistribution.

mton_partition routes every tuple to the consumer owning its key and
preserves per-producer order (fully pipelined channels).  The merging
variant additionally assumes each producer stream is key-ascending and
k-way merges at the receiver, so each consumer sees one globally sorted
stream; its channels are sender-side materializing, the only pairing that
cannot deadlock.  Equal keys drain the lower producer index first.
"""

from __future__ import annotations

import heapq
import threading

from ..plan import partition_fn
from .channel import Channel, Policy

_BATCH = 512


class SortContractViolation(ValueError):
    pass


def _feed(producer, channels, n, key_of, batch_size, check_sorted=False):
    buffers = [[] for _ in range(n)]
    last_key = None
    try:
        for t in producer:
            k = key_of(t)
            if check_sorted:
                if last_key is not None and k < last_key:
                    raise SortContractViolation(
                        "producer stream not key-ascending")
                last_key = k
            idx = partition_fn(k, n)
            b = buffers[idx]
            b.append(t)
            if len(b) >= batch_size:
                channels[idx].put(b)
                buffers[idx] = []
    except BaseException as e:
        for ch in channels:
            ch.fail(e)
        raise
    for i, b in enumerate(buffers):
        if b:
            channels[i].put(b)
        channels[i].close()


def mton_partition(producers, n: int, key_of, batch_size: int = _BATCH):
    """Repartition m tuple streams onto n consumer streams by key hash."""
    m = len(producers)
    channels = [[Channel(Policy.FULLY_PIPELINED) for _ in range(n)] for _ in range(m)]
    threads = []
    for i, producer in enumerate(producers):
        t = threading.Thread(
            target=_feed, args=(producer, channels[i], n, key_of, batch_size)
        )
        t.start()
        threads.append(t)

    def consumer(j):
        for i in range(m):
            yield from channels[i][j]

    outs = [consumer(j) for j in range(n)]
    return outs, threads


def mton_partition_merge(producers, n: int, key_of, batch_size: int = _BATCH):
    """Like mton_partition but producers are sorted and consumers receive a
    k-way merged (globally key-ascending) stream."""
    m = len(producers)
    channels = [
        [Channel(Policy.SENDER_MATERIALIZING) for _ in range(n)] for _ in range(m)
    ]
    threads = []
    for i, producer in enumerate(producers):
        t = threading.Thread(
            target=_feed,
            args=(producer, channels[i], n, key_of, batch_size, True),
        )
        t.start()
        threads.append(t)

    def tagged(stream, i):
        for seq, t in enumerate(stream):
            yield key_of(t), i, seq, t

    def consumer(j):
        streams = [tagged(channels[i][j], i) for i in range(m)]
        for _k, _i, _seq, t in heapq.merge(*streams):
            yield t

    outs = [consumer(j) for j in range(n)]
    return outs, threads
