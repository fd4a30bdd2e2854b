"""Simplified log-structured merge index: one in-memory ordered component
plus N immutable sorted disk components (each a bulk-loaded B-tree).
Deletes are carried as tombstones until a full merge.  Flush and merge are
invoked at superstep boundaries to keep runs deterministic.
"""

from __future__ import annotations

import heapq
import os

from .btree import BTree
from .cache import BufferCache

_TOMBSTONE_FLAG = b"\x00"
_VALUE_FLAG = b"\x01"
_TOMBSTONE = object()


def _tagged(stream, prio):
    return ((k, prio, v) for k, v in stream)


class LsmIndex:
    def __init__(self, cache: BufferCache, directory: str, mem_budget: int):
        self.cache = cache
        self.dir = directory
        self.mem_budget = mem_budget
        os.makedirs(directory, exist_ok=True)
        self._mem = {}  # key -> record bytes or _TOMBSTONE
        self._mem_bytes = 0
        self._components = []  # newest first
        self._next_comp = 0
        self.leaf_reads = 0
        for name in sorted(os.listdir(directory), reverse=True):
            if name.startswith("comp-"):
                seq = int(name.split("-")[1].split(".")[0])
                self._components.append(BTree(cache, os.path.join(directory, name)))
                self._next_comp = max(self._next_comp, seq + 1)

    # -- writes -----------------------------------------------------------

    def bulk_load(self, pairs) -> None:
        comp = self._new_component()
        comp.bulk_load((k, _VALUE_FLAG + rec) for k, rec in pairs)
        self._components.insert(0, comp)

    def upsert(self, key: int, record: bytes) -> None:
        old = self._mem.get(key)
        if old is not None and old is not _TOMBSTONE:
            self._mem_bytes -= len(old)
        self._mem[key] = record
        self._mem_bytes += len(record) + 24
        if self._mem_bytes > self.mem_budget:
            self.flush()

    def delete(self, key: int) -> None:
        old = self._mem.get(key)
        if old is not None and old is not _TOMBSTONE:
            self._mem_bytes -= len(old)
        self._mem[key] = _TOMBSTONE
        self._mem_bytes += 24

    # -- flush / merge ------------------------------------------------------

    def _new_component(self) -> BTree:
        path = os.path.join(self.dir, "comp-%06d.lsm" % self._next_comp)
        self._next_comp += 1
        return BTree(self.cache, path, create=True)

    def flush(self) -> None:
        """Write the in-memory component as a new sorted disk component."""
        if not self._mem:
            return
        comp = self._new_component()
        comp.bulk_load(
            (k, (_TOMBSTONE_FLAG if v is _TOMBSTONE else _VALUE_FLAG + v))
            for k, v in sorted(self._mem.items())
        )
        comp.flush()
        self._components.insert(0, comp)
        self._mem.clear()
        self._mem_bytes = 0

    def merge(self) -> None:
        """Replace all disk components with one, dropping tombstones that no
        longer shadow anything."""
        if not self._components:
            return
        merged = self._merged_disk_items()
        comp = self._new_component()
        comp.bulk_load(merged)
        comp.flush()
        old = self._components
        self._components = [comp]
        for c in old:
            c.destroy()

    @staticmethod
    def _is_tombstone_record(raw: bytes) -> bool:
        return raw[:1] == _TOMBSTONE_FLAG

    def _merged_disk_items(self):
        # newest-wins merge across disk components; tombstones dropped because
        # disk components are the oldest data there is
        streams = [
            _tagged(comp.scan(), prio) for prio, comp in enumerate(self._components)
        ]
        last_key = None
        for key, _prio, raw in heapq.merge(*streams):
            if key == last_key:
                continue
            last_key = key
            if not self._is_tombstone_record(raw):
                yield key, raw

    # -- reads --------------------------------------------------------------

    def lookup(self, key: int):
        hit = self._mem.get(key)
        if hit is not None:
            return None if hit is _TOMBSTONE else hit
        try:
            for comp in self._components:
                raw = comp.lookup(key)
                if raw is not None:
                    return None if self._is_tombstone_record(raw) else raw[1:]
            return None
        finally:
            self._collect_leaf_reads()

    def scan(self, from_key: int = None):
        """Yield (key, record) ascending with newest-component shadowing; the
        index must not be mutated while the scan is open."""
        sources = []
        mem_items = sorted(
            (k, v) for k, v in self._mem.items() if from_key is None or k >= from_key
        )
        sources.append(_tagged(mem_items, 0))
        for prio, comp in enumerate(self._components, start=1):
            sources.append(_tagged(comp.scan(from_key), prio))
        last_key = None
        for key, _prio, raw in heapq.merge(*sources):
            if key == last_key:
                continue
            last_key = key
            if raw is _TOMBSTONE:
                continue
            if _prio == 0:
                yield key, raw
            elif not self._is_tombstone_record(raw):
                yield key, raw[1:]
        self._collect_leaf_reads()

    def scan_chunk(self, from_key, limit: int):
        items = []
        for key, rec in self.scan(from_key):
            items.append((key, rec))
            if len(items) > limit:
                return items[:limit], items[limit][0]
        return items, None

    def _collect_leaf_reads(self):
        for c in self._components:
            self.leaf_reads += c.leaf_reads
            c.leaf_reads = 0

    @property
    def count(self) -> int:
        return sum(1 for _ in self.scan())

    def flush_all(self) -> None:
        self.flush()
        for c in self._components:
            c.flush()

    def close(self) -> None:
        self.flush()
        for c in self._components:
            c.close()

    def destroy(self) -> None:
        for c in self._components:
            c.destroy()
        self._components = []
        self._mem.clear()
