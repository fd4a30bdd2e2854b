"""Paged B+-tree keyed by vid, with bulk load, in-place updates and range
scans.  All page access goes through the shared buffer cache.  Records
larger than a quarter page are stored via overflow page chains so that
skewed degree distributions cannot break the leaf layout.
"""

from __future__ import annotations

import struct
from bisect import bisect_left, bisect_right

from .cache import BufferCache, PagedFile

LEAF = 1
INTERIOR = 2
OVERFLOW = 3

_LEAF_HDR = struct.Struct(">BHq")  # type, nkeys, next page (-1 = none)
_INT_HDR = struct.Struct(">BH")  # type, nkeys
_OVF_HDR = struct.Struct(">BqI")  # type, next page (-1 = none), chunk len
_META = struct.Struct(">4sqIQq")  # magic, root, height, count, first leaf
_MAGIC = b"VFBT"

INLINE = 0
OVFREF = 1


class DuplicateKey(ValueError):
    pass


class ContractViolation(ValueError):
    pass


class _Leaf:
    __slots__ = ("keys", "vals", "next", "nbytes")

    def __init__(self, keys=None, vals=None, next=-1):
        self.keys = keys or []
        # vals: (INLINE, bytes) or (OVFREF, first_page, total_len)
        self.vals = vals or []
        self.next = next
        self.nbytes = _LEAF_HDR.size + sum(map(_entry_size, self.vals))


class _Interior:
    __slots__ = ("keys", "children", "nbytes")

    def __init__(self, keys, children):
        self.keys = keys
        self.children = children
        self.nbytes = _INT_HDR.size + 16 * len(keys) + 8


def _entry_size(val) -> int:
    if val[0] == INLINE:
        return 13 + len(val[1])
    return 13 + 16


def _serialize_leaf(node: _Leaf) -> bytes:
    parts = [_LEAF_HDR.pack(LEAF, len(node.keys), node.next)]
    for key, val in zip(node.keys, node.vals):
        if val[0] == INLINE:
            parts.append(struct.pack(">QBI", key, INLINE, len(val[1])))
            parts.append(val[1])
        else:
            parts.append(struct.pack(">QBIQQ", key, OVFREF, 16, val[1], val[2]))
    return b"".join(parts)


def _serialize_interior(node: _Interior) -> bytes:
    parts = [_INT_HDR.pack(INTERIOR, len(node.keys))]
    for k in node.keys:
        parts.append(struct.pack(">Q", k))
    for c in node.children:
        parts.append(struct.pack(">q", c))
    return b"".join(parts)


def _serialize_node(node):
    if isinstance(node, _Leaf):
        return _serialize_leaf(node)
    return _serialize_interior(node)


def _parse_node(data: bytes):
    node_type = data[0]
    if node_type == LEAF:
        _, nkeys, nxt = _LEAF_HDR.unpack_from(data, 0)
        off = _LEAF_HDR.size
        keys, vals = [], []
        for _ in range(nkeys):
            key, flag, n = struct.unpack_from(">QBI", data, off)
            off += 13
            if flag == INLINE:
                vals.append((INLINE, data[off : off + n]))
                off += n
            else:
                first, total = struct.unpack_from(">QQ", data, off)
                off += 16
                vals.append((OVFREF, first, total))
            keys.append(key)
        return _Leaf(keys, vals, nxt)
    if node_type == INTERIOR:
        _, nkeys = _INT_HDR.unpack_from(data, 0)
        off = _INT_HDR.size
        keys = list(struct.unpack_from(">%dQ" % nkeys, data, off))
        off += 8 * nkeys
        children = list(struct.unpack_from(">%dq" % (nkeys + 1), data, off))
        return _Interior(keys, children)
    raise IOError("bad node type %d" % node_type)


class BTree:
    """B+-tree over a PagedFile.  Page 0 holds the metadata."""

    def __init__(self, cache: BufferCache, path: str, create: bool = False):
        self.cache = cache
        self.page_size = cache.page_size
        self.file = PagedFile(path, cache.page_size)
        self.leaf_reads = 0
        self.overflow_threshold = cache.page_size // 4
        self._max_chunk = cache.page_size - _OVF_HDR.size
        if create or self.file.num_pages == 0:
            self.file.num_pages = 0
            self.file.allocate()  # page 0 = meta
            self.root = -1
            self.height = 0
            self.count = 0
            self.first_leaf = -1
            self._write_meta()
        else:
            data = self.file.read_page(0)
            magic, root, height, count, first = _META.unpack_from(data, 0)
            if magic != _MAGIC:
                raise IOError("not a btree file: %s" % path)
            self.root, self.height, self.count, self.first_leaf = (
                root,
                height,
                count,
                first,
            )

    # -- page helpers ---------------------------------------------------

    def _pin(self, page_no, leaf=False):
        # leaf_reads counts leaf pages fetched from disk (buffer misses)
        cb = self._count_leaf_read if leaf else None
        frame = self.cache.pin(self.file, page_no, miss_cb=cb)
        if frame.obj is None:
            frame.obj = _parse_node(frame.data)
            frame.serializer = _serialize_node
        return frame

    def _count_leaf_read(self):
        self.leaf_reads += 1

    def _new_node(self, node):
        page_no = self.file.allocate()
        frame = self.cache.pin(self.file, page_no, new=True)
        frame.obj = node
        frame.serializer = _serialize_node
        return page_no, frame

    def _write_meta(self):
        self.file.write_page(
            0, _META.pack(_MAGIC, self.root, self.height, self.count, self.first_leaf)
        )

    # -- overflow chains ------------------------------------------------

    def _write_overflow(self, record: bytes):
        total = len(record)
        chunks = [
            record[i : i + self._max_chunk] for i in range(0, total, self._max_chunk)
        ]
        pages = [self.file.allocate() for _ in chunks]
        for i, chunk in enumerate(chunks):
            nxt = pages[i + 1] if i + 1 < len(pages) else -1
            self.file.write_page(pages[i], _OVF_HDR.pack(OVERFLOW, nxt, len(chunk)) + chunk)
        return pages[0], total

    def _read_overflow(self, first_page: int, total: int) -> bytes:
        parts = []
        page_no = first_page
        remaining = total
        while page_no != -1 and remaining > 0:
            data = self.file.read_page(page_no)
            _, nxt, n = _OVF_HDR.unpack_from(data, 0)
            parts.append(data[_OVF_HDR.size : _OVF_HDR.size + n])
            remaining -= n
            page_no = nxt
        return b"".join(parts)

    def _make_val(self, record: bytes):
        if len(record) > self.overflow_threshold:
            first, total = self._write_overflow(record)
            return (OVFREF, first, total)
        return (INLINE, record)

    def _read_val(self, val) -> bytes:
        if val[0] == INLINE:
            return val[1]
        return self._read_overflow(val[1], val[2])

    # -- bulk load --------------------------------------------------------

    def bulk_load(self, pairs) -> None:
        """Load a strictly key-ascending (key, record_bytes) stream into an
        empty tree; leaves are packed so all but the last exceed half a page."""
        if self.count or self.root != -1:
            raise ContractViolation("bulk_load requires an empty index")
        level = []  # (first_key, page_no) per leaf
        cur = _Leaf()
        cur_page = None
        prev_frame = None
        last_key = None
        n = 0
        for key, record in pairs:
            if last_key is not None:
                if key == last_key:
                    raise DuplicateKey("duplicate vid %d in bulk load" % key)
                if key < last_key:
                    raise ContractViolation("bulk load input not vid-ascending")
            last_key = key
            n += 1
            val = self._make_val(record)
            esize = _entry_size(val)
            if cur.keys and cur.nbytes + esize > self.page_size:
                page_no, frame = self._new_node(cur)
                if prev_frame is not None:
                    prev_frame.obj.next = page_no
                    self.cache.unpin(prev_frame, dirty=True)
                prev_frame = frame
                level.append((cur.keys[0], page_no))
                if cur_page is None:
                    cur_page = page_no
                cur = _Leaf()
            cur.keys.append(key)
            cur.vals.append(val)
            cur.nbytes += esize
        if cur.keys:
            page_no, frame = self._new_node(cur)
            if prev_frame is not None:
                prev_frame.obj.next = page_no
                self.cache.unpin(prev_frame, dirty=True)
            prev_frame = frame
            level.append((cur.keys[0], page_no))
        if prev_frame is not None:
            self.cache.unpin(prev_frame, dirty=True)
        self.count = n
        if not level:
            self.root, self.height, self.first_leaf = -1, 0, -1
            self._write_meta()
            return
        self.first_leaf = level[0][1]
        height = 1
        while len(level) > 1:
            parent_level = []
            i = 0
            while i < len(level):
                node = _Interior([], [level[i][1]])
                first_key = level[i][0]
                i += 1
                while i < len(level) and node.nbytes + 16 <= self.page_size:
                    node.keys.append(level[i][0])
                    node.children.append(level[i][1])
                    node.nbytes += 16
                    i += 1
                page_no, frame = self._new_node(node)
                self.cache.unpin(frame, dirty=True)
                parent_level.append((first_key, page_no))
            level = parent_level
            height += 1
        self.root = level[0][1]
        self.height = height
        self._write_meta()

    # -- point ops --------------------------------------------------------

    def lookup(self, key: int):
        """Return the record bytes for key, or None."""
        if self.root == -1:
            return None
        page_no = self.root
        for _ in range(self.height - 1):
            frame = self._pin(page_no)
            node = frame.obj
            page_no = node.children[bisect_right(node.keys, key)]
            self.cache.unpin(frame)
        frame = self._pin(page_no, leaf=True)
        node = frame.obj
        i = bisect_left(node.keys, key)
        out = None
        if i < len(node.keys) and node.keys[i] == key:
            out = self._read_val(node.vals[i])
        self.cache.unpin(frame)
        return out

    def _descend(self, key: int):
        """Return ([(page_no, child_idx) interior path], leaf_frame)."""
        path = []
        page_no = self.root
        for _ in range(self.height - 1):
            frame = self._pin(page_no)
            node = frame.obj
            idx = bisect_right(node.keys, key)
            path.append(page_no)
            page_no = node.children[idx]
            self.cache.unpin(frame)
        return path, self._pin(page_no, leaf=True)

    def upsert(self, key: int, record: bytes) -> None:
        if self.root == -1:
            page_no, frame = self._new_node(_Leaf([key], [self._make_val(record)]))
            self.cache.unpin(frame, dirty=True)
            self.root = page_no
            self.first_leaf = page_no
            self.height = 1
            self.count = 1
            return
        path, frame = self._descend(key)
        node = frame.obj
        i = bisect_left(node.keys, key)
        val = self._make_val(record)
        if i < len(node.keys) and node.keys[i] == key:
            node.nbytes += _entry_size(val) - _entry_size(node.vals[i])
            node.vals[i] = val
        else:
            node.keys.insert(i, key)
            node.vals.insert(i, val)
            node.nbytes += _entry_size(val)
            self.count += 1
        if node.nbytes > self.page_size:
            self._split_leaf(path, frame)
        else:
            self.cache.unpin(frame, dirty=True)

    def _split_leaf(self, path, frame):
        node = frame.obj
        mid = len(node.keys) // 2
        right = _Leaf(node.keys[mid:], node.vals[mid:], node.next)
        del node.keys[mid:]
        del node.vals[mid:]
        node.nbytes = _LEAF_HDR.size + sum(map(_entry_size, node.vals))
        right_page, right_frame = self._new_node(right)
        node.next = right_page
        sep = right.keys[0]
        self.cache.unpin(right_frame, dirty=True)
        self.cache.unpin(frame, dirty=True)
        self._insert_into_parent(path, sep, right_page)

    def _insert_into_parent(self, path, sep, new_child):
        if not path:
            root = _Interior([sep], [self.root, new_child])
            self.root, frame = self._new_node(root)
            self.cache.unpin(frame, dirty=True)
            self.height += 1
            return
        parent_page = path[-1]
        frame = self._pin(parent_page)
        node = frame.obj
        i = bisect_right(node.keys, sep)
        node.keys.insert(i, sep)
        node.children.insert(i + 1, new_child)
        node.nbytes += 16
        if node.nbytes > self.page_size:
            mid = len(node.keys) // 2
            up_key = node.keys[mid]
            right = _Interior(node.keys[mid + 1 :], node.children[mid + 1 :])
            del node.keys[mid:]
            del node.children[mid + 1 :]
            node.nbytes = _INT_HDR.size + 16 * len(node.keys) + 8
            right_page, right_frame = self._new_node(right)
            self.cache.unpin(right_frame, dirty=True)
            self.cache.unpin(frame, dirty=True)
            self._insert_into_parent(path[:-1], up_key, right_page)
        else:
            self.cache.unpin(frame, dirty=True)

    def delete(self, key: int) -> bool:
        """Remove key if present (no rebalancing); absent key is a no-op."""
        if self.root == -1:
            return False
        _, frame = self._descend(key)
        node = frame.obj
        i = bisect_left(node.keys, key)
        found = i < len(node.keys) and node.keys[i] == key
        if found:
            node.nbytes -= _entry_size(node.vals[i])
            del node.keys[i]
            del node.vals[i]
            self.count -= 1
            self.cache.unpin(frame, dirty=True)
        else:
            self.cache.unpin(frame)
        return found

    # -- scans ------------------------------------------------------------

    def _leaf_for(self, key):
        if self.root == -1:
            return -1
        page_no = self.root
        for _ in range(self.height - 1):
            frame = self._pin(page_no)
            node = frame.obj
            page_no = node.children[bisect_right(node.keys, key)]
            self.cache.unpin(frame)
        return page_no

    def scan(self, from_key: int = None):
        """Yield (key, record_bytes) ascending, starting at the smallest key
        >= from_key.  The tree must not be mutated while a scan is open; use
        scan_chunk for interleaved updates."""
        if from_key is None:
            page_no = self.first_leaf
            start = 0
        else:
            page_no = self._leaf_for(from_key)
        while page_no != -1:
            frame = self._pin(page_no, leaf=True)
            node = frame.obj
            if from_key is None:
                lo = 0
            else:
                lo = bisect_left(node.keys, from_key)
            items = [
                (node.keys[i], self._read_val(node.vals[i]))
                for i in range(lo, len(node.keys))
            ]
            next_page = node.next
            self.cache.unpin(frame)
            yield from items
            from_key = None
            page_no = next_page

    def scan_chunk(self, from_key, limit: int):
        """Materialize up to limit entries with key >= from_key.  Returns
        (items, next_from) where next_from is None at end of index."""
        items = []
        if from_key is None:
            page_no = self.first_leaf
        else:
            page_no = self._leaf_for(from_key)
        while page_no != -1 and len(items) <= limit:
            frame = self._pin(page_no, leaf=True)
            node = frame.obj
            lo = 0 if from_key is None else bisect_left(node.keys, from_key)
            for i in range(lo, len(node.keys)):
                items.append((node.keys[i], self._read_val(node.vals[i])))
            page_no = node.next
            self.cache.unpin(frame)
            from_key = None
        if len(items) > limit:
            next_from = items[limit][0]
            return items[:limit], next_from
        return items, None

    # -- lifecycle ----------------------------------------------------------

    def flush(self) -> None:
        self.cache.flush_file(self.file)
        self._write_meta()
        self.file.sync()

    def close(self) -> None:
        if not self.file.closed:
            self.cache.flush_file(self.file)
            self._write_meta()
            self.cache.drop_file(self.file)
            self.file.close()

    def destroy(self) -> None:
        import os

        self.cache.drop_file(self.file)
        self.file.close()
        try:
            os.remove(self.file.path)
        except OSError:
            pass
