"""Checkpointing and failure recovery.

A checkpoint for superstep s captures, per partition: the vertex relation
after the superstep's updates and mutations, the already-combined message
file feeding superstep s+1, and (for the left-outer plan) the live-vertex
ids.  A manifest records sha256 digests plus the global state, and a
COMMITTED marker written last seals the checkpoint; readers ignore
directories without the marker.

Recovery finds the newest sealed checkpoint, verifies the digests, then
rebuilds every partition from scratch: records are re-partitioned by vid
hash, sorted, and bulk-loaded into fresh indexes, and the message files are
rewritten.  The job resumes at superstep s+1.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import re
import shutil

from .plan import Join, partition_fn
from .storage.btree import BTree
from .storage.framing import iter_tagged_frames, write_raw_frame, write_tagged_frame
from .storage.vertexindex import VertexIndex
from .types import GlobalState

COMMITTED = "COMMITTED"
_SP_RE = re.compile(r"^sp-(\d+)$")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _fsync_dir(path: str) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def checkpoint(rt, superstep: int) -> str:
    """Capture the runtime's state after the given superstep committed."""
    base = rt.spec.ckpt_dir
    if not base:
        raise ValueError("checkpointing requires a checkpoint directory")
    ckpt = os.path.join(base, "sp-%d" % superstep)
    if os.path.exists(ckpt):
        shutil.rmtree(ckpt)
    os.makedirs(ckpt)
    files = {}

    def seal(name, write):
        path = os.path.join(ckpt, name)
        with open(path, "wb") as fh:
            write(fh)
            fh.flush()
            os.fsync(fh.fileno())
        files[name] = _sha256(path)

    for p in range(rt.n):
        def dump_vertices(fh, p=p):
            for vid, rec in rt.indexes[p].scan():
                write_raw_frame(fh, vid, rec)
        seal("vertex-%d.dat" % p, dump_vertices)

        msg_src = rt.msg_path(p, superstep + 1)
        def copy_msgs(fh, src=msg_src):
            if os.path.exists(src):
                with open(src, "rb") as sf:
                    shutil.copyfileobj(sf, fh)
        seal("msg-%d.dat" % p, copy_msgs)

        if rt.plan.join is Join.LEFT_OUTER:
            def dump_vids(fh, p=p):
                for vid, _ in rt.vid_indexes[p].scan():
                    write_raw_frame(fh, vid, b"")
            seal("vid-%d.dat" % p, dump_vids)

    gs = rt.gs_history[superstep + 1]
    agg_blob = None
    if gs.aggregate is not None:
        agg_blob = base64.b64encode(
            rt.program.aggregate_codec.encode(gs.aggregate)).decode("ascii")
    manifest = {
        "superstep": superstep,
        "partitions": rt.n,
        "files": files,
        "gs": {"halt": gs.halt, "aggregate": agg_blob, "superstep": gs.superstep},
    }
    mpath = os.path.join(ckpt, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.flush()
        os.fsync(fh.fileno())
    marker = os.path.join(ckpt, COMMITTED)
    with open(marker, "w") as fh:
        fh.flush()
        os.fsync(fh.fileno())
    _fsync_dir(ckpt)
    return ckpt


def latest_committed(base: str):
    """Return (superstep, path) of the newest sealed checkpoint, or None."""
    if not base or not os.path.isdir(base):
        return None
    best = None
    for name in os.listdir(base):
        m = _SP_RE.match(name)
        if not m:
            continue
        path = os.path.join(base, name)
        if not os.path.exists(os.path.join(path, COMMITTED)):
            continue
        s = int(m.group(1))
        if best is None or s > best[0]:
            best = (s, path)
    return best


def verify_manifest(ckpt: str) -> dict:
    with open(os.path.join(ckpt, "manifest.json")) as fh:
        manifest = json.load(fh)
    for name, digest in manifest["files"].items():
        actual = _sha256(os.path.join(ckpt, name))
        if actual != digest:
            raise IOError("checkpoint file %s is corrupt (digest mismatch)" % name)
    return manifest


def recover(rt) -> int:
    """Rebuild all partitions of the runtime from the newest checkpoint and
    position it to run superstep s+1.  Raises JobFailure when no sealed
    checkpoint exists."""
    from .runtime import JobFailure

    found = latest_committed(rt.spec.ckpt_dir)
    if found is None:
        raise JobFailure("failure with no committed checkpoint to recover from")
    superstep, ckpt = found
    manifest = verify_manifest(ckpt)
    if manifest["partitions"] != rt.n:
        raise JobFailure("checkpoint partition count mismatch")
    n = rt.n

    for idx in rt.indexes:
        idx.close()
    rt.indexes = []
    for bt in rt.vid_indexes:
        if bt is not None:
            bt.close()
    rt.vid_indexes = [None] * n
    for p in range(n):
        shutil.rmtree(rt.part_dir(p), ignore_errors=True)
        os.makedirs(rt.tmp_dir(p), exist_ok=True)

    # vertices: re-partition by vid hash, sort, bulk load fresh indexes
    vparts = [[] for _ in range(n)]
    for p in range(n):
        with open(os.path.join(ckpt, "vertex-%d.dat" % p), "rb") as fh:
            for vid, _tag, rec in iter_tagged_frames(fh):
                vparts[partition_fn(vid, n)].append((vid, rec))
    for p in range(n):
        rows = sorted(vparts[p])
        idx = VertexIndex(rt.cache, rt.part_dir(p), rt.plan.storage, p,
                          lsm_mem_budget=rt._lsm_budget())
        idx.bulk_load(iter(rows))
        rt.indexes.append(idx)
        rt.total[p] = len(rows)
        rt.live[p] = sum(1 for _vid, rec in rows if rec[0] == 0)
    vparts = None

    # messages for superstep s+1, payload tags preserved
    mparts = [[] for _ in range(n)]
    for p in range(n):
        with open(os.path.join(ckpt, "msg-%d.dat" % p), "rb") as fh:
            for vid, tag, data in iter_tagged_frames(fh):
                mparts[partition_fn(vid, n)].append((vid, tag, data))
    for p in range(n):
        path = rt.msg_path(p, superstep + 1)
        with open(path, "wb") as fh:
            for vid, tag, data in sorted(mparts[p]):
                write_tagged_frame(fh, vid, tag, data)
            fh.flush()
            os.fsync(fh.fileno())
    mparts = None

    if rt.plan.join is Join.LEFT_OUTER:
        viparts = [[] for _ in range(n)]
        for p in range(n):
            with open(os.path.join(ckpt, "vid-%d.dat" % p), "rb") as fh:
                for vid, _tag, _data in iter_tagged_frames(fh):
                    viparts[partition_fn(vid, n)].append(vid)
        for p in range(n):
            bt = BTree(rt.cache, rt.vid_path(p, superstep + 1), create=True)
            bt.bulk_load((vid, b"") for vid in sorted(viparts[p]))
            rt.vid_indexes[p] = bt
            rt.vid_superstep[p] = superstep + 1

    gsdoc = manifest["gs"]
    agg = None
    if gsdoc["aggregate"] is not None:
        agg = rt.program.aggregate_codec.decode(
            base64.b64decode(gsdoc["aggregate"]))
    rt.gs = GlobalState(gsdoc["halt"], agg, gsdoc["superstep"])
    rt.superstep = superstep + 1
    rt.gs_history[rt.superstep] = rt.gs
    rt._write_gs()
    rt._leaf_reads_prev = sum(i.leaf_reads for i in rt.indexes)
    rt._writeback_prev = rt.cache.writeback_bytes
    return superstep
