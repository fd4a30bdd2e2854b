"""Superstep execution: the iterative dataflow that joins message files with
the partitioned vertex indexes, runs the user compute UDF, exchanges and
combines messages, applies graph mutations, and evaluates termination.

One JobRuntime owns all partitions of a job inside a single process.  Each
superstep runs a producer task per partition (join + compute + vertex update
+ sender-side group-by) and a receiver task per partition (receiver-side
group-by + message file write), wired by either a plain partitioning
exchange or a sorted merging exchange.
"""

from __future__ import annotations

import base64
import heapq
import json
import os
import queue
import shutil
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .graphio import GraphParseError, format_vertex, iter_graph_file
from .job import JobSpec, validate_job
from .ops.groupby import GroupByStats, hashsort_group_by, preclustered_group_by, sort_group_by
from .ops.channel import Channel, Policy
from .plan import Connector, GroupBy, Join, PlanConfig, partition_fn
from .storage.btree import BTree, ContractViolation
from .storage.cache import BufferCache
from .storage.framing import encode_payload, iter_frames, write_frame
from .storage.vertexindex import VertexIndex, decode_vertex, encode_vertex
from .types import MUT_DELETE, MUT_INSERT, NULL, GlobalState, VertexTuple

STATS_HEADER = ("superstep,liveVertices,messages,combinedMessages,"
                "leafReads,spillBytes,channelBytes,wallMillis")

_SCAN_CHUNK = 1024


class JobFailure(RuntimeError):
    pass


class InjectedFailure(RuntimeError):
    """Raised by the failure-injection test hook to simulate a worker loss."""

    def __init__(self, worker: int, superstep: int):
        super().__init__("worker %d failed in superstep %d" % (worker, superstep))
        self.worker = worker
        self.superstep = superstep


@dataclass
class SuperstepStats:
    superstep: int
    live_vertices: int = 0
    messages: int = 0
    combined_messages: int = 0
    leaf_reads: int = 0
    spill_bytes: int = 0
    channel_bytes: int = 0
    wall_millis: int = 0

    def csv_row(self) -> str:
        return "%d,%d,%d,%d,%d,%d,%d,%d" % (
            self.superstep, self.live_vertices, self.messages,
            self.combined_messages, self.leaf_reads, self.spill_bytes,
            self.channel_bytes, self.wall_millis)


@dataclass
class JobReport:
    success: bool
    reason: str
    supersteps: int
    global_state: GlobalState
    stats: list = field(default_factory=list)
    recoveries: int = 0
    live_vertices: int = 0
    total_vertices: int = 0


class PartitionMap:
    """Assigns partitions to workers round-robin, skipping blacklisted ones."""

    def __init__(self, num_partitions: int, num_workers: int):
        self.num_partitions = num_partitions
        self.num_workers = num_workers
        self.blacklist = set()
        self.assign = {}
        self.rebuild()

    def alive(self) -> list:
        return [w for w in range(self.num_workers) if w not in self.blacklist]

    def rebuild(self) -> None:
        alive = self.alive()
        if not alive:
            raise JobFailure("no workers left alive")
        self.assign = {p: alive[p % len(alive)] for p in range(self.num_partitions)}

    def worker_of(self, p: int) -> int:
        return self.assign[p]

    def partitions_of(self, w: int) -> list:
        return [p for p, owner in self.assign.items() if owner == w]


@dataclass(frozen=True)
class OpNode:
    op_id: str
    name: str
    partition: int  # -1 for job-global operators
    worker: int


@dataclass
class PhysicalPlan:
    config: PlanConfig
    nodes: list
    edges: list  # (src_op_id, dst_op_id, flow)

    def node(self, op_id: str) -> OpNode:
        for n in self.nodes:
            if n.op_id == op_id:
                return n
        raise KeyError(op_id)


def generate_plan(cfg: PlanConfig, pmap: PartitionMap) -> PhysicalPlan:
    """Describe the per-superstep operator DAG for one plan variant.

    Every per-partition operator is pinned to the worker owning that
    partition; the termination/aggregation operators are job-global.
    """
    nodes = []
    edges = []
    for p in range(pmap.num_partitions):
        w = pmap.worker_of(p)
        sfx = "-%d" % p

        def add(name):
            nodes.append(OpNode(name + sfx, name, p, w))
            return name + sfx

        msg_scan = add("msg-scan")
        if cfg.join is Join.LEFT_OUTER:
            vid_scan = add("vid-scan")
            choose = add("merge-choose")
            probe = add("index-probe")
            edges.append((msg_scan, choose, "Msg"))
            edges.append((vid_scan, choose, "Vid"))
            edges.append((choose, probe, "Msg+Vid"))
            join_out = probe
        else:
            scan = add("index-scan")
            join_out = add("full-outer-merge")
            edges.append((msg_scan, join_out, "Msg"))
            edges.append((scan, join_out, "Vertex"))
        sigma = add("sigma-active")
        compute = add("compute")
        update = add("index-update")
        sender_gb = add("sender-groupby-%s" %
                        ("sort" if cfg.group_by is not GroupBy.HASHSORT else "hashsort"))
        send = add("exchange-send-%s" % cfg.connector.value)
        edges.append((join_out, sigma, "Vertex⋈Msg"))
        edges.append((sigma, compute, "Vertex⋈Msg"))
        edges.append((compute, update, "Vertex'"))
        edges.append((compute, sender_gb, "Msg'"))
        edges.append((sender_gb, send, "Msg'"))

        recv = add("exchange-recv-%s" % cfg.connector.value)
        if cfg.connector is Connector.MERGE:
            recv_gb = add("receiver-groupby-preclustered")
        else:
            recv_gb = add("receiver-groupby-%s" % cfg.group_by.value)
        msg_write = add("msg-write")
        edges.append((recv, recv_gb, "Msg'"))
        edges.append((recv_gb, msg_write, "Msg'"))

        resolve = add("mutation-resolve")
        edges.append((compute, resolve, "Mutations"))
        edges.append((resolve, update, "Vertex±"))
        if cfg.join is Join.LEFT_OUTER:
            vid_write = add("vid-write")
            edges.append((compute, vid_write, "Vid'"))
            edges.append((resolve, vid_write, "Vid±"))

        edges.append((send, "exchange-recv-%s-*" % cfg.connector.value, "Msg'"))
        edges.append((compute, "aggregate-final", "Agg partial"))
        edges.append((compute, "termination", "halt partial"))
        edges.append((msg_write, "termination", "Msg' count"))

    nodes.append(OpNode("aggregate-final", "aggregate-final", -1, -1))
    nodes.append(OpNode("termination", "termination", -1, -1))
    edges.append(("aggregate-final", "termination", "GS"))
    return PhysicalPlan(cfg, nodes, edges)


def two_stage_aggregate(partition_bags: list, aggregate_udf):
    """Fold each partition's contribution bag, then fold the partials."""
    if aggregate_udf is None:
        return None
    partials = [aggregate_udf(bag) for bag in partition_bags if bag]
    if not partials:
        return None
    return aggregate_udf(partials)


def evaluate_termination(halt_and: bool, combined_message_count: int) -> bool:
    """Global halt: every vertex voted to halt and no messages are in flight."""
    return halt_and and combined_message_count == 0


def default_resolve(bag: list) -> list:
    """Deletions first, then insertions, each preserving arrival order."""
    return ([m for m in bag if m.kind == MUT_DELETE]
            + [m for m in bag if m.kind == MUT_INSERT])


def payload_nbytes(payload, codec) -> int:
    tag, data = encode_payload(payload, codec)
    return 13 + len(data)


class _FanIn:
    """m-to-1 bounded batch queue used by the plain partitioning exchange."""

    __slots__ = ("_q", "_remaining", "_lock", "nbytes")

    def __init__(self, producers: int, capacity: int):
        self._q = queue.Queue(capacity)
        self._remaining = producers
        self._lock = threading.Lock()
        self.nbytes = 0

    def put(self, batch: list) -> None:
        self._q.put(batch)

    def close_one(self) -> None:
        with self._lock:
            self._remaining -= 1
            done = self._remaining == 0
        if done:
            self._q.put(None)

    def __iter__(self):
        while True:
            batch = self._q.get()
            if batch is None:
                return
            yield from batch


class _PartitionCtx:
    """Mutable per-partition results of one producer task."""

    __slots__ = ("messages", "computed", "halt_and", "agg_bag", "mutations",
                 "live_delta", "total_delta", "active_vids", "pending",
                 "sender_stats")

    def __init__(self):
        self.messages = 0
        self.computed = 0
        self.halt_and = True
        self.agg_bag = []
        self.mutations = []
        self.live_delta = 0
        self.total_delta = 0
        self.active_vids = []
        self.pending = []
        self.sender_stats = GroupByStats()


class JobRuntime:
    """Runs one job: graph load, superstep loop, recovery, result dump."""

    def __init__(self, spec: JobSpec):
        problems = validate_job(spec)
        if problems:
            raise ValueError("invalid job: " + "; ".join(problems))
        self.spec = spec
        self.program = spec.program
        self.plan = spec.plan
        self.n = spec.num_partitions
        self.workers = spec.workers or (os.cpu_count() or 1)
        self.pmap = PartitionMap(self.n, self.workers)
        workdir = spec.workdir or os.environ.get("PREGELIX_WORKDIR")
        if workdir is None:
            workdir = tempfile.mkdtemp(prefix="vertexflow-")
            self._own_workdir = True
        else:
            self._own_workdir = False
        self.workdir = workdir
        os.makedirs(workdir, exist_ok=True)
        self.cache = BufferCache(max(8, spec.buffer_cache_bytes // spec.page_size),
                                 spec.page_size)
        self.indexes = []  # VertexIndex per partition
        self.vid_indexes = [None] * self.n  # BTree per partition (left outer)
        self.vid_superstep = [0] * self.n
        self.live = [0] * self.n
        self.total = [0] * self.n
        self.gs = GlobalState(False, None, 1)
        self.gs_history = {}
        self.superstep = 1
        self.stats_rows = []
        self.recoveries = 0
        self._leaf_reads_prev = 0
        self._writeback_prev = 0
        self._pending_injections = list(spec.failure_injections)
        self._stats_fh = None

    # ------------------------------------------------------------------ paths

    def _lsm_budget(self) -> int:
        # the in-memory component stands in for pinned working pages: give
        # each partition a quarter of its share of the buffer cache
        return max(1 << 14, self.spec.buffer_cache_bytes // (4 * self.n))

    def part_dir(self, p: int) -> str:
        return os.path.join(self.workdir, "part-%d" % p)

    def msg_path(self, p: int, superstep: int) -> str:
        return os.path.join(self.part_dir(p), "msg-%d.dat" % superstep)

    def tmp_dir(self, p: int) -> str:
        return os.path.join(self.part_dir(p), "tmp")

    def vid_path(self, p: int, superstep: int) -> str:
        return os.path.join(self.part_dir(p), "vid-%d.btree" % superstep)

    # ------------------------------------------------------------------- load

    def load_graph(self) -> None:
        per_part = [[] for _ in range(self.n)]
        seen = {}
        for line_no, v in iter_graph_file(self.spec.input_path, self.program):
            if v.vid in seen:
                raise GraphParseError(
                    "duplicate vid %d at lines %d and %d"
                    % (v.vid, seen[v.vid], line_no))
            seen[v.vid] = line_no
            per_part[partition_fn(v.vid, self.n)].append(v)
        vc, ec = self.program.value_codec, self.program.edge_codec
        for p in range(self.n):
            shutil.rmtree(self.part_dir(p), ignore_errors=True)
            os.makedirs(self.tmp_dir(p), exist_ok=True)
            rows = sorted(per_part[p], key=lambda v: v.vid)
            idx = VertexIndex(self.cache, self.part_dir(p), self.plan.storage, p,
                              lsm_mem_budget=self._lsm_budget())
            idx.bulk_load((v.vid, encode_vertex(v, vc, ec)) for v in rows)
            self.indexes.append(idx)
            self.total[p] = len(rows)
            self.live[p] = len(rows)  # every loaded vertex starts active
            if self.plan.join is Join.LEFT_OUTER:
                bt = BTree(self.cache, self.vid_path(p, 1), create=True)
                bt.bulk_load((v.vid, b"") for v in rows)
                self.vid_indexes[p] = bt
                self.vid_superstep[p] = 1
        self.gs = GlobalState(False, None, 1)
        self.gs_history[1] = self.gs
        self._write_gs()
        self._leaf_reads_prev = sum(i.leaf_reads for i in self.indexes)
        self._writeback_prev = self.cache.writeback_bytes

    # -------------------------------------------------------------- producers

    def _read_msgs(self, p: int, superstep: int):
        path = self.msg_path(p, superstep)
        if not os.path.exists(path):
            if superstep > 1:
                raise ContractViolation(
                    "missing message file for partition %d superstep %d"
                    % (p, superstep))
            return
        with open(path, "rb") as fh:
            yield from iter_frames(fh, self.program.payload_codec)

    def _apply_pending(self, p: int, ctx: _PartitionCtx) -> None:
        idx = self.indexes[p]
        for vid, rec in ctx.pending:
            idx.upsert(vid, rec)
        ctx.pending.clear()

    def _full_outer_rows(self, p: int, ctx: _PartitionCtx):
        """Merge the sorted message stream with a full index scan, applying
        the deferred vertex updates between scan chunks so the open scan
        never observes its own writes."""
        idx = self.indexes[p]
        msgs = self._read_msgs(p, self.superstep)
        cur = next(msgs, None)
        from_key = None
        while True:
            items, nxt = idx.scan_chunk(from_key, _SCAN_CHUNK)
            for vid, rec in items:
                while cur is not None and cur[0] < vid:
                    yield cur[0], cur[1], None
                    cur = next(msgs, None)
                if cur is not None and cur[0] == vid:
                    yield vid, cur[1], rec
                    cur = next(msgs, None)
                else:
                    yield vid, NULL, rec
            while cur is not None and (nxt is None or cur[0] < nxt):
                yield cur[0], cur[1], None
                cur = next(msgs, None)
            self._apply_pending(p, ctx)
            if nxt is None:
                return
            from_key = nxt

    def _left_outer_rows(self, p: int, ctx: _PartitionCtx):
        """Union of messages and the live-vertex index, probing the vertex
        index per tuple.  Updates can apply immediately: no scan is open on
        the vertex index itself."""
        idx = self.indexes[p]
        vids = self.vid_indexes[p]
        msgs = self._read_msgs(p, self.superstep)
        cur = next(msgs, None)
        for vid, _ in vids.scan():
            while cur is not None and cur[0] < vid:
                yield cur[0], cur[1], idx.lookup(cur[0])
                self._apply_pending(p, ctx)
                cur = next(msgs, None)
            if cur is not None and cur[0] == vid:
                yield vid, cur[1], idx.lookup(vid)
                cur = next(msgs, None)
            else:
                yield vid, NULL, idx.lookup(vid)
            self._apply_pending(p, ctx)
        while cur is not None:
            yield cur[0], cur[1], idx.lookup(cur[0])
            self._apply_pending(p, ctx)
            cur = next(msgs, None)

    def _compute_stream(self, p: int, rows, ctx: _PartitionCtx):
        """Drive the compute UDF over joined rows; yields outgoing messages."""
        prog = self.program
        vc, ec = prog.value_codec, prog.edge_codec
        gs = self.gs
        left_outer = self.plan.join is Join.LEFT_OUTER
        for vid, payload, rec in rows:
            if rec is not None:
                if payload is NULL and rec[0] == 1:
                    continue  # halted and nothing arrived: stays dormant
                vertex = decode_vertex(vid, rec, vc, ec)
                old_halt = vertex.halt
                existed = True
            else:
                vertex = VertexTuple(vid, False, None, [])
                old_halt = True  # did not exist, hence not live
                existed = False
            out = prog.compute(vertex, payload, gs)
            nv = out.vertex
            if nv.vid != vid:
                raise ContractViolation(
                    "compute changed vid %d to %d" % (vid, nv.vid))
            if not out.halt_contribution == ((not out.messages) and nv.halt):
                raise ContractViolation("halt contribution invariant broken")
            ctx.computed += 1
            if not existed:
                ctx.total_delta += 1
            if old_halt and not nv.halt:
                ctx.live_delta += 1
            elif not old_halt and nv.halt:
                ctx.live_delta -= 1
            ctx.halt_and = ctx.halt_and and out.halt_contribution
            if out.aggregate_contributions:
                ctx.agg_bag.extend(out.aggregate_contributions)
            if out.mutations:
                ctx.mutations.extend(out.mutations)
            ctx.pending.append((vid, encode_vertex(nv, vc, ec)))
            if left_outer and not nv.halt:
                ctx.active_vids.append(vid)
            ctx.messages += len(out.messages)
            yield from out.messages

    def _producer(self, p: int, outputs) -> _PartitionCtx:
        """Join, compute, update, sender-side group-by, exchange send."""
        ctx = _PartitionCtx()
        if self.plan.join is Join.LEFT_OUTER:
            rows = self._left_outer_rows(p, ctx)
        else:
            rows = self._full_outer_rows(p, ctx)
        stream = self._compute_stream(p, rows, ctx)
        gb = (hashsort_group_by if self.plan.group_by is GroupBy.HASHSORT
              else sort_group_by)
        combined = gb(stream, self.program.combine,
                      self.spec.groupby_budget_bytes // max(1, self.n),
                      self.program.payload_codec, self.tmp_dir(p),
                      ctx.sender_stats)
        n = self.n
        bsz = self.spec.batch_size
        if self.plan.connector is Connector.MERGE:
            bufs = [[] for _ in range(n)]
            for vid, acc in combined:
                q = partition_fn(vid, n)
                bufs[q].append((vid, acc))
                if len(bufs[q]) >= bsz:
                    outputs[q][p].put(bufs[q])
                    bufs[q] = []
            for q in range(n):
                if bufs[q]:
                    outputs[q][p].put(bufs[q])
                outputs[q][p].close()
        else:
            codec = self.program.payload_codec
            bufs = [[] for _ in range(n)]
            sizes = [0] * n
            for vid, acc in combined:
                q = partition_fn(vid, n)
                bufs[q].append((vid, acc))
                sizes[q] += payload_nbytes(acc, codec)
                if len(bufs[q]) >= bsz:
                    outputs[q].nbytes += sizes[q]
                    outputs[q].put(bufs[q])
                    bufs[q] = []
                    sizes[q] = 0
            for q in range(n):
                if bufs[q]:
                    outputs[q].nbytes += sizes[q]
                    outputs[q].put(bufs[q])
                outputs[q].close_one()
        self._apply_pending(p, ctx)
        return ctx

    # -------------------------------------------------------------- receivers

    def _receiver(self, q: int, source, result: dict) -> None:
        """Receiver-side group-by, then write the next superstep's message
        file for this partition."""
        prog = self.program
        stats = GroupByStats()
        if self.plan.connector is Connector.MERGE:
            def tagged(ch, i):
                seq = 0
                for t in ch:
                    yield t[0], i, seq, t[1]
                    seq += 1
            merged = heapq.merge(*[tagged(ch, i) for i, ch in enumerate(source)])
            stream = ((vid, acc) for vid, _i, _s, acc in merged)
            combined = preclustered_group_by(stream, prog.combine)
        else:
            gb = (hashsort_group_by if self.plan.group_by is GroupBy.HASHSORT
                  else sort_group_by)
            combined = gb(iter(source), prog.combine,
                          self.spec.groupby_budget_bytes // max(1, self.n),
                          prog.payload_codec, self.tmp_dir(q), stats)
        out_path = self.msg_path(q, self.superstep + 1)
        tmp_path = out_path + ".tmp"
        count = 0
        n = self.n
        with open(tmp_path, "wb") as fh:
            for vid, acc in combined:
                if partition_fn(vid, n) != q:
                    raise ContractViolation(
                        "vid %d routed to partition %d" % (vid, q))
                write_frame(fh, vid, acc, prog.payload_codec)
                count += 1
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_path, out_path)
        result["combined"] = count
        result["stats"] = stats

    # -------------------------------------------------------------- mutations

    def _apply_mutations(self, q: int, muts: list) -> tuple:
        """Resolve and apply this partition's mutation bag.  Returns the
        (added, removed) active-vid adjustments for the Vid relation."""
        prog = self.program
        vc, ec = prog.value_codec, prog.edge_codec
        idx = self.indexes[q]
        groups = {}
        for m in muts:
            groups.setdefault(m.vertex.vid, []).append(m)
        added, removed = set(), set()
        for vid in sorted(groups):
            bag = groups[vid]
            effective = prog.resolve(bag) if prog.resolve else default_resolve(bag)
            for m in effective:
                old = idx.lookup(vid)
                if m.kind == MUT_DELETE:
                    if old is not None:
                        idx.delete(vid)
                        self.total[q] -= 1
                        if old[0] == 0:
                            self.live[q] -= 1
                        removed.add(vid)
                        added.discard(vid)
                else:
                    idx.upsert(vid, encode_vertex(m.vertex, vc, ec))
                    if old is None:
                        self.total[q] += 1
                    elif old[0] == 0:
                        self.live[q] -= 1  # replaced a live vertex
                    if not m.vertex.halt:
                        self.live[q] += 1
                        added.add(vid)
                        removed.discard(vid)
                    else:
                        removed.add(vid)
                        added.discard(vid)
        return added, removed

    def _rebuild_vid(self, q: int, ctx: _PartitionCtx, added, removed) -> None:
        if self.plan.join is not Join.LEFT_OUTER:
            return
        active = set(ctx.active_vids)
        active |= added
        active -= removed
        old = self.vid_indexes[q]
        new_s = self.superstep + 1
        bt = BTree(self.cache, self.vid_path(q, new_s), create=True)
        bt.bulk_load((vid, b"") for vid in sorted(active))
        self.vid_indexes[q] = bt
        self.vid_superstep[q] = new_s
        if old is not None:
            old.destroy()

    # ------------------------------------------------------------- superstep

    def _maybe_inject_failure(self) -> None:
        for inj in list(self._pending_injections):
            worker, superstep = inj
            if superstep == self.superstep:
                self._pending_injections.remove(inj)
                self.pmap.blacklist.add(worker)
                raise InjectedFailure(worker, superstep)

    def run_superstep(self) -> SuperstepStats:
        self._maybe_inject_failure()
        t0 = time.monotonic()
        n = self.n
        if self.plan.connector is Connector.MERGE:
            outputs = [[Channel(Policy.SENDER_MATERIALIZING,
                                tmp_dir=self.tmp_dir(q))
                        for _ in range(n)] for q in range(n)]
        else:
            outputs = [_FanIn(n, self.spec.channel_capacity) for _ in range(n)]

        recv_results = [{} for _ in range(n)]
        recv_errors = []

        def recv_task(q):
            try:
                self._receiver(q, outputs[q], recv_results[q])
            except BaseException as e:  # propagated after join
                recv_errors.append(e)

        recv_threads = [threading.Thread(target=recv_task, args=(q,), daemon=True)
                        for q in range(n)]
        for t in recv_threads:
            t.start()

        ctxs = [None] * n
        with ThreadPoolExecutor(max_workers=max(1, min(self.workers, n))) as pool:
            futures = {pool.submit(self._producer, p, outputs): p for p in range(n)}
            errors = []
            for fut, p in futures.items():
                try:
                    ctxs[p] = fut.result()
                except BaseException as e:
                    errors.append(e)
        if errors:
            raise errors[0]
        for t in recv_threads:
            t.join()
        if recv_errors:
            raise recv_errors[0]

        for p in range(n):
            self.live[p] += ctxs[p].live_delta
            self.total[p] += ctxs[p].total_delta

        # route mutations to their home partitions and apply, deletes first
        mut_by_part = [[] for _ in range(n)]
        for ctx in ctxs:
            for m in ctx.mutations:
                mut_by_part[partition_fn(m.vertex.vid, n)].append(m)
        for q in range(n):
            added, removed = self._apply_mutations(q, mut_by_part[q])
            self._rebuild_vid(q, ctxs[q], added, removed)
            self.indexes[q].superstep_boundary()

        # barrier: two-stage aggregation, halt evaluation, global state
        agg = two_stage_aggregate([ctx.agg_bag for ctx in ctxs],
                                  self.program.aggregate)
        halt_and = all(ctx.halt_and for ctx in ctxs)
        combined_total = sum(r.get("combined", 0) for r in recv_results)
        halted = evaluate_termination(halt_and, combined_total)

        stats = SuperstepStats(self.superstep)
        stats.live_vertices = sum(self.live)
        stats.messages = sum(ctx.messages for ctx in ctxs)
        stats.combined_messages = combined_total
        leaf_now = sum(i.leaf_reads for i in self.indexes)
        stats.leaf_reads = leaf_now - self._leaf_reads_prev
        self._leaf_reads_prev = leaf_now
        spill = sum(ctx.sender_stats.spill_bytes for ctx in ctxs)
        spill += sum(r["stats"].spill_bytes for r in recv_results if r.get("stats"))
        spill += self.cache.writeback_bytes - self._writeback_prev
        self._writeback_prev = self.cache.writeback_bytes
        stats.spill_bytes = spill
        if self.plan.connector is Connector.MERGE:
            stats.channel_bytes = sum(ch.bytes_transferred
                                      for row in outputs for ch in row)
        else:
            stats.channel_bytes = sum(f.nbytes for f in outputs)
        stats.wall_millis = int((time.monotonic() - t0) * 1000)

        old_msg = self.superstep
        self.superstep += 1
        self.gs = GlobalState(halted, agg, self.superstep)
        self.gs_history[self.superstep] = self.gs
        self._write_gs()
        self._record_stats(stats)
        # the consumed message files are dead weight once the barrier commits
        for p in range(n):
            path = self.msg_path(p, old_msg)
            if os.path.exists(path):
                os.remove(path)
        return stats

    # ------------------------------------------------------------------- run

    def run(self) -> JobReport:
        from . import recovery

        try:
            self.load_graph()
            reason = "max-supersteps"
            while self.superstep <= self.spec.max_supersteps:
                try:
                    self.run_superstep()
                except InjectedFailure:
                    self.recoveries += 1
                    self.pmap.rebuild()
                    recovery.recover(self)
                    continue
                if self.gs.halt:
                    reason = "converged"
                    break
                if (self.spec.checkpoint_every
                        and (self.superstep - 1) % self.spec.checkpoint_every == 0):
                    recovery.checkpoint(self, self.superstep - 1)
            self.dump_output()
            return JobReport(
                success=True, reason=reason,
                supersteps=self.superstep - 1, global_state=self.gs,
                stats=list(self.stats_rows), recoveries=self.recoveries,
                live_vertices=sum(self.live), total_vertices=sum(self.total))
        finally:
            self.close()

    # ----------------------------------------------------------- output / gs

    def dump_output(self) -> None:
        out = self.spec.output_path
        if not out:
            return
        os.makedirs(out, exist_ok=True)
        prog = self.program
        vc, ec = prog.value_codec, prog.edge_codec
        for p in range(self.n):
            path = os.path.join(out, "part-%d.txt" % p)
            with open(path, "w") as fh:
                for vid, rec in self.indexes[p].scan():
                    v = decode_vertex(vid, rec, vc, ec)
                    fh.write(format_vertex(v, prog) + "\n")

    def _write_gs(self) -> None:
        agg = self.gs.aggregate
        blob = None
        if agg is not None:
            blob = base64.b64encode(
                self.program.aggregate_codec.encode(agg)).decode("ascii")
        doc = {"halt": self.gs.halt, "aggregate": blob,
               "superstep": self.gs.superstep}
        tmp = os.path.join(self.workdir, "gs.json.tmp")
        with open(tmp, "w") as fh:
            json.dump(doc, fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, os.path.join(self.workdir, "gs.json"))

    def _record_stats(self, stats: SuperstepStats) -> None:
        self.stats_rows.append(stats)
        if self.spec.stats_path:
            if self._stats_fh is None:
                self._stats_fh = open(self.spec.stats_path, "w")
                self._stats_fh.write(STATS_HEADER + "\n")
            self._stats_fh.write(stats.csv_row() + "\n")
            self._stats_fh.flush()

    # --------------------------------------------------------------- cleanup

    def close(self) -> None:
        for idx in self.indexes:
            idx.close()
        self.indexes = []
        for bt in self.vid_indexes:
            if bt is not None:
                bt.close()
        self.vid_indexes = [None] * self.n
        if self._stats_fh:
            self._stats_fh.close()
            self._stats_fh = None
        if self._own_workdir:
            shutil.rmtree(self.workdir, ignore_errors=True)
