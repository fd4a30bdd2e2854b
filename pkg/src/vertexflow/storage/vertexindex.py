"""Mode-dispatching facade over the two vertex index structures, plus the
vertex record byte layout.

A record stores everything but the vid (the key carries it):
[halt 1B][value tag 1B][value len 4B][value bytes][edge count 4B]
then per edge: [dest 8B][edge len 4B][edge bytes].
"""

from __future__ import annotations

import os
import struct

from ..plan import Storage
from ..types import VertexTuple
from .btree import BTree
from .cache import BufferCache
from .lsm import LsmIndex

_VHDR = struct.Struct(">BBI")
_EHDR = struct.Struct(">QI")
_NONE_TAG = 0
_VALUE_TAG = 1


def encode_vertex(v: VertexTuple, value_codec, edge_codec) -> bytes:
    if v.value is None:
        vb = b""
        tag = _NONE_TAG
    else:
        vb = value_codec.encode(v.value)
        tag = _VALUE_TAG
    parts = [_VHDR.pack(1 if v.halt else 0, tag, len(vb)), vb,
             struct.pack(">I", len(v.edges))]
    for dest, ev in v.edges:
        eb = edge_codec.encode(ev)
        parts.append(_EHDR.pack(dest, len(eb)))
        parts.append(eb)
    return b"".join(parts)


def decode_vertex(vid: int, data: bytes, value_codec, edge_codec) -> VertexTuple:
    halt, tag, vlen = _VHDR.unpack_from(data, 0)
    off = _VHDR.size
    value = value_codec.decode(data[off : off + vlen]) if tag == _VALUE_TAG else None
    off += vlen
    (ecount,) = struct.unpack_from(">I", data, off)
    off += 4
    edges = []
    for _ in range(ecount):
        dest, elen = _EHDR.unpack_from(data, off)
        off += _EHDR.size
        edges.append((dest, edge_codec.decode(data[off : off + elen])))
        off += elen
    return VertexTuple(vid, bool(halt), value, edges)


class VertexIndex:
    """One partition of the Vertex relation, stored as a B-tree or an LSM
    tree of encoded records."""

    def __init__(
        self,
        cache: BufferCache,
        directory: str,
        mode: Storage,
        partition_id: int,
        lsm_mem_budget: int = 1 << 20,
    ):
        self.mode = mode
        self.partition_id = partition_id
        self.dir = directory
        os.makedirs(directory, exist_ok=True)
        if mode is Storage.BTREE:
            self._impl = BTree(cache, os.path.join(directory, "vertex.btree"))
        else:
            self._impl = LsmIndex(
                cache, os.path.join(directory, "vertex.lsm.d"), lsm_mem_budget
            )

    def bulk_load(self, pairs) -> None:
        self._impl.bulk_load(pairs)

    def lookup(self, key: int):
        return self._impl.lookup(key)

    def upsert(self, key: int, record: bytes) -> None:
        self._impl.upsert(key, record)

    def delete(self, key: int) -> None:
        self._impl.delete(key)

    def scan(self, from_key: int = None):
        return self._impl.scan(from_key)

    def scan_chunk(self, from_key, limit: int):
        return self._impl.scan_chunk(from_key, limit)

    @property
    def count(self) -> int:
        return self._impl.count

    @property
    def leaf_reads(self) -> int:
        if self.mode is Storage.LSM:
            self._impl._collect_leaf_reads()
        return self._impl.leaf_reads

    def superstep_boundary(self, merge_threshold: int = 4) -> None:
        """LSM housekeeping done between supersteps (flush, periodic merge)."""
        if self.mode is Storage.LSM:
            self._impl.flush()
            if len(self._impl._components) > merge_threshold:
                self._impl.merge()

    def flush(self) -> None:
        if self.mode is Storage.BTREE:
            self._impl.flush()
        else:
            self._impl.flush_all()

    def close(self) -> None:
        self._impl.close()

    def destroy(self) -> None:
        self._impl.destroy()
