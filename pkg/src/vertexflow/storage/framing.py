"""On-disk record framing shared by message files, run files and checkpoint
dumps: [vid: 8 bytes big-endian][tag: 1 byte][len: 4 bytes][payload bytes].

Tag 0 marks a NULL payload (always zero length), tag 1 a user payload and
tag 2 a list payload produced by the default combiner.
"""

from __future__ import annotations

import struct

from ..types import NULL, CombinedList

TAG_NULL = 0
TAG_VALUE = 1
TAG_LIST = 2

_HDR = struct.Struct(">QBI")


def encode_payload(payload, codec) -> tuple:
    """Return (tag, bytes) for a payload object."""
    if payload is NULL:
        return TAG_NULL, b""
    if isinstance(payload, CombinedList):
        parts = [struct.pack(">I", len(payload))]
        for item in payload:
            b = codec.encode(item)
            parts.append(struct.pack(">I", len(b)))
            parts.append(b)
        return TAG_LIST, b"".join(parts)
    return TAG_VALUE, codec.encode(payload)


def decode_payload(tag: int, data: bytes, codec):
    if tag == TAG_NULL:
        return NULL
    if tag == TAG_VALUE:
        return codec.decode(data)
    if tag == TAG_LIST:
        (count,) = struct.unpack_from(">I", data, 0)
        off = 4
        out = CombinedList()
        for _ in range(count):
            (n,) = struct.unpack_from(">I", data, off)
            off += 4
            out.append(codec.decode(data[off : off + n]))
            off += n
        return out
    raise ValueError("bad payload tag %d" % tag)


def write_frame(fh, vid: int, payload, codec) -> int:
    tag, data = encode_payload(payload, codec)
    fh.write(_HDR.pack(vid, tag, len(data)))
    fh.write(data)
    return _HDR.size + len(data)


def write_raw_frame(fh, vid: int, data: bytes) -> int:
    fh.write(_HDR.pack(vid, TAG_VALUE, len(data)))
    fh.write(data)
    return _HDR.size + len(data)


def iter_frames(fh, codec):
    """Yield (vid, payload) records until EOF."""
    read = fh.read
    hdr = _HDR
    while True:
        head = read(hdr.size)
        if not head:
            return
        if len(head) < hdr.size:
            raise IOError("truncated frame header")
        vid, tag, n = hdr.unpack(head)
        data = read(n) if n else b""
        if len(data) < n:
            raise IOError("truncated frame payload")
        yield vid, decode_payload(tag, data, codec)


def write_tagged_frame(fh, vid: int, tag: int, data: bytes) -> int:
    fh.write(_HDR.pack(vid, tag, len(data)))
    fh.write(data)
    return _HDR.size + len(data)


def iter_tagged_frames(fh):
    """Yield (vid, tag, bytes) records until EOF, preserving payload tags."""
    read = fh.read
    hdr = _HDR
    while True:
        head = read(hdr.size)
        if not head:
            return
        if len(head) < hdr.size:
            raise IOError("truncated frame header")
        vid, tag, n = hdr.unpack(head)
        data = read(n) if n else b""
        if len(data) < n:
            raise IOError("truncated frame payload")
        yield vid, tag, data


def iter_raw_frames(fh):
    """Yield (vid, bytes) records until EOF."""
    read = fh.read
    hdr = _HDR
    while True:
        head = read(hdr.size)
        if not head:
            return
        if len(head) < hdr.size:
            raise IOError("truncated frame header")
        vid, _tag, n = hdr.unpack(head)
        data = read(n) if n else b""
        if len(data) < n:
            raise IOError("truncated frame payload")
        yield vid, data
