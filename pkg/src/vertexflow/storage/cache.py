"""Bounded LRU buffer cache over fixed-size pages.

All index I/O goes through here so that a single knob bounds the memory
footprint of the access methods.  Pinned pages are never evicted; dirty
pages are written back before their frame is reused.  Frames may carry a
deserialized object alongside the raw bytes so that repeated access to a
cached page does not pay serialization costs; the bytes are materialized
on writeback.
"""

from __future__ import annotations

import os
import threading
from collections import OrderedDict


class CacheExhausted(RuntimeError):
    """All frames pinned and capacity exhausted (cache configured too small)."""


class PagedFile:
    """A file addressed in fixed-size pages."""

    def __init__(self, path: str, page_size: int):
        self.path = path
        self.page_size = page_size
        exists = os.path.exists(path)
        self._fh = open(path, "r+b" if exists else "w+b")
        self.num_pages = os.path.getsize(path) // page_size if exists else 0
        self.file_id = path  # unique per cache
        self.closed = False

    def allocate(self) -> int:
        page_no = self.num_pages
        self.num_pages += 1
        return page_no

    def read_page(self, page_no: int) -> bytes:
        self._fh.seek(page_no * self.page_size)
        data = self._fh.read(self.page_size)
        if len(data) < self.page_size:
            data = data + b"\x00" * (self.page_size - len(data))
        return data

    def write_page(self, page_no: int, data: bytes) -> None:
        assert len(data) <= self.page_size
        self._fh.seek(page_no * self.page_size)
        self._fh.write(data)
        if len(data) < self.page_size:
            self._fh.write(b"\x00" * (self.page_size - len(data)))

    def sync(self) -> None:
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if not self.closed:
            self._fh.close()
            self.closed = True


class Page:
    """One buffer frame: page identity, contents, pin count and dirty bit."""

    __slots__ = ("page_id", "data", "dirty", "pin_count", "obj", "serializer", "_file")

    def __init__(self, page_id, data, file):
        self.page_id = page_id  # (file_id, page_no)
        self.data = data
        self.dirty = False
        self.pin_count = 0
        # parsed representation of the page, plus the callable that turns it
        # back into bytes on writeback
        self.obj = None
        self.serializer = None
        self._file = file


class BufferCache:
    """Shared LRU page cache.  Thread-safe; eviction considers only unpinned
    frames in least-recently-unpinned order."""

    def __init__(self, capacity_pages: int, page_size: int = 4096):
        if capacity_pages < 1:
            raise ValueError("cache needs at least one frame")
        self.capacity = capacity_pages
        self.page_size = page_size
        self._frames = {}  # page_id -> Page
        self._lru = OrderedDict()  # page_id -> None, for unpinned frames
        self._lock = threading.RLock()
        self.reads = 0
        self.writes = 0
        self.writeback_bytes = 0
        self.max_resident = 0

    @property
    def resident(self) -> int:
        return len(self._frames)

    def pin(self, file: PagedFile, page_no: int, new: bool = False,
            miss_cb=None) -> Page:
        """Pin a page frame.  miss_cb (if given) fires, under the cache lock,
        only when the page had to be fetched from disk."""
        page_id = (file.file_id, page_no)
        with self._lock:
            frame = self._frames.get(page_id)
            if frame is not None:
                if frame.pin_count == 0:
                    self._lru.pop(page_id, None)
                frame.pin_count += 1
                return frame
            if len(self._frames) >= self.capacity:
                self._evict_one()
            if new:
                data = b"\x00" * self.page_size
            else:
                data = file.read_page(page_no)
                self.reads += 1
                if miss_cb is not None:
                    miss_cb()
            frame = Page(page_id, data, file)
            frame.pin_count = 1
            self._frames[page_id] = frame
            if len(self._frames) > self.max_resident:
                self.max_resident = len(self._frames)
            return frame

    def unpin(self, frame: Page, dirty: bool = False) -> None:
        with self._lock:
            assert frame.pin_count > 0, "unpin without matching pin"
            frame.dirty = frame.dirty or dirty
            frame.pin_count -= 1
            if frame.pin_count == 0:
                self._lru[frame.page_id] = None

    def _materialize(self, frame: Page) -> None:
        if frame.obj is not None and frame.serializer is not None:
            data = frame.serializer(frame.obj)
            if len(data) < self.page_size:
                data = data + b"\x00" * (self.page_size - len(data))
            frame.data = data

    def _evict_one(self) -> None:
        # caller holds the lock
        try:
            page_id, _ = self._lru.popitem(last=False)
        except KeyError:
            raise CacheExhausted(
                "all %d frames pinned; increase the buffer cache" % self.capacity
            ) from None
        frame = self._frames.pop(page_id)
        if frame.dirty:
            self._materialize(frame)
            frame._file.write_page(page_id[1], frame.data)
            self.writes += 1
            self.writeback_bytes += self.page_size

    def flush_file(self, file: PagedFile) -> None:
        """Write back all dirty frames of a file (frames stay cached)."""
        with self._lock:
            for page_id, frame in self._frames.items():
                if page_id[0] == file.file_id and frame.dirty:
                    self._materialize(frame)
                    frame._file.write_page(page_id[1], frame.data)
                    frame.dirty = False
                    self.writes += 1

    def drop_file(self, file: PagedFile) -> None:
        """Discard all frames of a file without writeback (file is deleted)."""
        with self._lock:
            stale = [pid for pid in self._frames if pid[0] == file.file_id]
            for pid in stale:
                frame = self._frames.pop(pid)
                assert frame.pin_count == 0, "dropping a pinned page"
                self._lru.pop(pid, None)
