"""Core tuple schemas and the user-facing programming abstraction.

The engine models graph state as three relations: Vertex (vid, halt, value,
edges), Msg (vid, payload) and a single global-state tuple GS (halt,
aggregate, superstep).  User values are opaque to the engine; each program
registers codecs for them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional


class _Null:
    """Distinguished marker for an absent payload (distinct from b'')."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NULL"

    def __reduce__(self):
        return (_Null, ())


#: Singleton NULL payload, produced by outer-join padding and NullMsg tuples.
NULL = _Null()


class CombinedList(list):
    """Payload produced by the default (list gathering) combiner."""

    __slots__ = ()


@dataclass(slots=True)
class VertexTuple:
    vid: int
    halt: bool
    value: Any
    edges: list  # list of (dest_vid, edge_value)

    def copy(self) -> "VertexTuple":
        return VertexTuple(self.vid, self.halt, self.value, list(self.edges))


@dataclass(slots=True)
class MsgTuple:
    vid: int
    payload: Any  # NULL for synthetic tuples


@dataclass(slots=True)
class GlobalState:
    halt: bool
    aggregate: Any
    superstep: int


MUT_INSERT = "insert"
MUT_DELETE = "delete"


@dataclass(slots=True)
class Mutation:
    kind: str  # MUT_INSERT or MUT_DELETE
    vertex: VertexTuple  # delete only uses .vid

    @property
    def vid(self) -> int:
        return self.vertex.vid


@dataclass(slots=True)
class ComputeOutput:
    vertex: VertexTuple
    messages: list = field(default_factory=list)  # list of (dest_vid, payload)
    aggregate_contributions: list = field(default_factory=list)
    mutations: list = field(default_factory=list)

    @property
    def halt_contribution(self) -> bool:
        return halt_contribution(self.vertex, self.messages)


def halt_contribution(vertex: VertexTuple, out_messages: list) -> bool:
    """A vertex contributes halt=true iff it sent nothing and voted to halt."""
    return (not out_messages) and bool(vertex.halt)


def default_combine(payloads: Iterable[Any]) -> CombinedList:
    """Gather all messages for a destination into a list, flattening partial
    lists produced by earlier combine stages."""
    out = CombinedList()
    empty = True
    for p in payloads:
        empty = False
        if isinstance(p, CombinedList):
            out.extend(p)
        else:
            out.append(p)
    if empty:
        raise ValueError("default_combine: empty payload bag")
    return out


class Codec:
    """Encode/decode one opaque user value to/from bytes."""

    def encode(self, obj) -> bytes:
        raise NotImplementedError

    def decode(self, data: bytes):
        raise NotImplementedError

    def size(self, obj) -> int:
        return len(self.encode(obj))


class Float64Codec(Codec):
    _s = struct.Struct(">d")

    def encode(self, obj) -> bytes:
        return self._s.pack(obj)

    def decode(self, data: bytes) -> float:
        return self._s.unpack(data)[0]

    def size(self, obj) -> int:
        return 8


class UInt64Codec(Codec):
    _s = struct.Struct(">Q")

    def encode(self, obj) -> bytes:
        return self._s.pack(obj)

    def decode(self, data: bytes) -> int:
        return self._s.unpack(data)[0]

    def size(self, obj) -> int:
        return 8


class BytesCodec(Codec):
    def encode(self, obj) -> bytes:
        return bytes(obj)

    def decode(self, data: bytes) -> bytes:
        return data

    def size(self, obj) -> int:
        return len(obj)


class EmptyCodec(Codec):
    """For values that carry no information (e.g. unweighted edges)."""

    def encode(self, obj) -> bytes:
        return b""

    def decode(self, data: bytes):
        return None

    def size(self, obj) -> int:
        return 0


class PaddedFloat64Codec(Codec):
    """A float plus opaque padding, for inflating on-disk vertex size."""

    def __init__(self, pad: int):
        self.pad = pad

    def encode(self, obj) -> bytes:
        return struct.pack(">d", obj) + b"\x00" * self.pad

    def decode(self, data: bytes) -> float:
        return struct.unpack_from(">d", data)[0]

    def size(self, obj) -> int:
        return 8 + self.pad


class CountSumCodec(Codec):
    """(count, sum) pairs used by global aggregation."""

    _s = struct.Struct(">Qd")

    def encode(self, obj) -> bytes:
        return self._s.pack(obj[0], obj[1])

    def decode(self, data: bytes):
        return self._s.unpack(data)

    def size(self, obj) -> int:
        return 16


@dataclass
class UserProgram:
    """The four UDF slots plus value codecs and text parsing hooks.

    ``compute`` receives (vertex, combined_payload_or_NULL, global_state) and
    returns a ComputeOutput.  ``combine`` must be commutative and associative
    over payloads.  ``resolve`` maps a same-vid mutation bag to the effective
    mutation list (deletions are applied before insertions).
    """

    name: str
    compute: Callable[[VertexTuple, Any, GlobalState], ComputeOutput]
    combine: Optional[Callable[[list], Any]] = None
    aggregate: Optional[Callable[[list], Any]] = None
    resolve: Optional[Callable[[list], list]] = None
    value_codec: Codec = field(default_factory=BytesCodec)
    edge_codec: Codec = field(default_factory=Float64Codec)
    payload_codec: Codec = field(default_factory=Float64Codec)
    aggregate_codec: Codec = field(default_factory=BytesCodec)
    parse_value: Callable[[str], Any] = lambda s: s
    format_value: Callable[[Any], str] = str
    parse_edge_value: Callable[[str], Any] = float
    format_edge_value: Callable[[Any], str] = repr
    plan_hint: Optional[object] = None

    def combined(self, payloads: list):
        if self.combine is not None:
            return self.combine(payloads)
        return default_combine(payloads)
