"""Message file framing: [vid 8B][tag 1B][len 4B][payload]."""

import io
import struct

import pytest

from vertexflow.storage.framing import (TAG_LIST, TAG_NULL, TAG_VALUE,
                                        iter_frames, iter_tagged_frames,
                                        write_frame, write_tagged_frame)
from vertexflow.types import NULL, CombinedList, Float64Codec


def test_frame_layout_is_stable():
    buf = io.BytesIO()
    n = write_frame(buf, 0x1122334455667788, 2.5, Float64Codec())
    raw = buf.getvalue()
    assert n == len(raw) == 8 + 1 + 4 + 8
    vid, tag, size = struct.unpack_from(">QBI", raw, 0)
    assert vid == 0x1122334455667788
    assert tag == TAG_VALUE
    assert size == 8
    assert struct.unpack_from(">d", raw, 13)[0] == 2.5


def test_roundtrip_all_payload_kinds():
    codec = Float64Codec()
    buf = io.BytesIO()
    write_frame(buf, 1, NULL, codec)
    write_frame(buf, 2, 7.25, codec)
    write_frame(buf, 3, CombinedList([1.0, 2.0, 3.0]), codec)
    buf.seek(0)
    got = list(iter_frames(buf, codec))
    assert got[0] == (1, NULL)
    assert got[1] == (2, 7.25)
    assert got[2][0] == 3 and list(got[2][1]) == [1.0, 2.0, 3.0]
    assert isinstance(got[2][1], CombinedList)


def test_tagged_frames_preserve_tags():
    codec = Float64Codec()
    buf = io.BytesIO()
    write_frame(buf, 5, NULL, codec)
    write_frame(buf, 6, 1.0, codec)
    buf.seek(0)
    tagged = list(iter_tagged_frames(buf))
    assert [(v, t) for v, t, _ in tagged] == [(5, TAG_NULL), (6, TAG_VALUE)]
    out = io.BytesIO()
    for vid, tag, data in tagged:
        write_tagged_frame(out, vid, tag, data)
    assert out.getvalue() == buf.getvalue()


def test_truncated_file_is_an_error():
    codec = Float64Codec()
    buf = io.BytesIO()
    write_frame(buf, 9, 4.0, codec)
    whole = buf.getvalue()
    for cut in (4, len(whole) - 3):
        with pytest.raises(IOError):
            list(iter_frames(io.BytesIO(whole[:cut]), codec))
