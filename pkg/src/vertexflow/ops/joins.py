"""Index joins that deliver messages to vertices, plus the live-vertex
helpers used by the probe-based plan.

Both joins emit (vid, payload_or_NULL, record_bytes_or_None) with vids
ascending; decoding of vertex records is left to the caller so that pruned
tuples are never deserialized.
"""

from __future__ import annotations

from ..types import NULL, VertexTuple


class SortContractViolation(ValueError):
    pass


def _checked(stream, name):
    last = None
    for vid, payload in stream:
        if last is not None and vid < last:
            raise SortContractViolation("%s stream not vid-ascending" % name)
        last = vid
        yield vid, payload


def index_full_outer_join(msgs, index, from_key=None):
    """Single merge pass over the combined message stream and a full index
    scan.  Covers the inner, left-outer (message without vertex) and
    right-outer (vertex without message) cases."""
    msgs = _checked(msgs, "msg")
    scan = index.scan(from_key)
    msg = next(msgs, None)
    row = next(scan, None)
    while msg is not None or row is not None:
        if row is None or (msg is not None and msg[0] < row[0]):
            yield msg[0], msg[1], None
            msg = next(msgs, None)
        elif msg is None or row[0] < msg[0]:
            yield row[0], NULL, row[1]
            row = next(scan, None)
        else:
            yield msg[0], msg[1], row[1]
            msg = next(msgs, None)
            row = next(scan, None)


def index_left_outer_join(stream, index):
    """Probe the vertex index for each input tuple; no-match pads the vertex
    side with None.  Never touches unprobed keys."""
    for vid, payload in _checked(stream, "probe"):
        yield vid, payload, index.lookup(vid)


def merge_msg_vid(msgs, vids):
    """Set-union by vid of the combined message stream and the live-vertex
    stream; the Msg tuple wins on duplicates.  Realizes the active-or-messaged
    filter for the probe-based plan."""
    msgs = _checked(msgs, "msg")
    vids = _checked(vids, "vid")
    msg = next(msgs, None)
    vid_row = next(vids, None)
    while msg is not None or vid_row is not None:
        if vid_row is None or (msg is not None and msg[0] <= vid_row[0]):
            yield msg
            if vid_row is not None and vid_row[0] == msg[0]:
                vid_row = next(vids, None)
            msg = next(msgs, None)
        else:
            yield vid_row[0], NULL
            vid_row = next(vids, None)


def null_msg(vertex: VertexTuple):
    """Emit the (vid, NULL) live-vertex tuple for an active vertex."""
    if not vertex.halt:
        yield vertex.vid, NULL
