"""Built-in vertex programs: shortest paths, PageRank, connected components,
and a scripted graph-mutation exerciser."""

from __future__ import annotations

from .types import (NULL, CombinedList, ComputeOutput, CountSumCodec,
                    Float64Codec, Mutation, UInt64Codec, UserProgram,
                    VertexTuple)

INF = float("inf")


def sssp_program(source: int) -> UserProgram:
    """Single-source shortest paths with a min-combiner.

    Vertex value is the best-known distance (inf until reached).  Distances
    are seeded in the first superstep; a vertex relaxes and re-broadcasts
    whenever a shorter distance arrives, otherwise it stays halted.
    """

    def compute(vertex: VertexTuple, payload, gs) -> ComputeOutput:
        if gs.superstep == 1:
            dist = 0.0 if vertex.vid == source else INF
            vertex.value = dist
        else:
            dist = min(payload) if isinstance(payload, CombinedList) else payload
            if dist >= vertex.value:
                vertex.halt = True
                return ComputeOutput(vertex)
            vertex.value = dist
        msgs = []
        if vertex.value < INF:
            for dest, w in vertex.edges:
                if w < 0:
                    raise ValueError(
                        "negative edge weight %r on %d->%d"
                        % (w, vertex.vid, dest))
                msgs.append((dest, vertex.value + w))
        vertex.halt = True
        return ComputeOutput(vertex, msgs)

    return UserProgram(
        name="sssp",
        compute=compute,
        combine=min,
        value_codec=Float64Codec(),
        edge_codec=Float64Codec(),
        payload_codec=Float64Codec(),
        parse_value=float,
        format_value=repr,
    )


def pagerank_program(iterations: int, damping: float = 0.85) -> UserProgram:
    """PageRank with dangling-mass redistribution via global aggregation.

    The aggregate is a (count, sum) pair: count tallies live vertices and
    sum collects the rank mass of sink vertices from the previous superstep.
    Superstep 1 only counts; superstep 2 assigns the uniform initial rank
    and starts spreading; each later superstep applies one update.  The run
    takes iterations + 2 supersteps in total.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    last = iterations + 2

    def agg(pairs):
        count = 0
        total = 0.0
        for c, s in pairs:
            count += c
            total += s
        return count, total

    def compute(vertex: VertexTuple, payload, gs) -> ComputeOutput:
        s = gs.superstep
        if s == 1:
            vertex.value = 0.0
            vertex.halt = False
            return ComputeOutput(vertex, aggregate_contributions=[(1, 0.0)])
        count, dangling = gs.aggregate
        if s == 2:
            rank = 1.0 / count
        else:
            msgsum = 0.0
            if payload is not NULL:
                msgsum = (sum(payload) if isinstance(payload, CombinedList)
                          else payload)
            rank = (1.0 - damping) / count + damping * (msgsum + dangling / count)
        vertex.value = rank
        if s == last:
            vertex.halt = True
            return ComputeOutput(vertex)
        msgs = []
        sink_mass = 0.0
        if vertex.edges:
            share = rank / len(vertex.edges)
            msgs = [(dest, share) for dest, _ in vertex.edges]
        else:
            sink_mass = rank
        vertex.halt = False
        return ComputeOutput(vertex, msgs,
                             aggregate_contributions=[(1, sink_mass)])

    def combine(payloads):
        return sum(payloads)

    return UserProgram(
        name="pagerank",
        compute=compute,
        combine=combine,
        aggregate=agg,
        value_codec=Float64Codec(),
        edge_codec=Float64Codec(),
        payload_codec=Float64Codec(),
        aggregate_codec=CountSumCodec(),
        parse_value=float,
        format_value=repr,
    )


def cc_program() -> UserProgram:
    """Connected components by min-label propagation along out-edges.

    Labels converge to the component's smallest vid when edges are
    symmetric; feed an undirected graph (both edge directions present).
    """

    def compute(vertex: VertexTuple, payload, gs) -> ComputeOutput:
        if gs.superstep == 1:
            vertex.value = vertex.vid
        else:
            label = min(payload) if isinstance(payload, CombinedList) else payload
            if label >= vertex.value:
                vertex.halt = True
                return ComputeOutput(vertex)
            vertex.value = label
        msgs = [(dest, vertex.value) for dest, _ in vertex.edges
                if vertex.value < dest or gs.superstep == 1]
        vertex.halt = True
        return ComputeOutput(vertex, msgs)

    return UserProgram(
        name="cc",
        compute=compute,
        combine=min,
        value_codec=UInt64Codec(),
        edge_codec=Float64Codec(),
        payload_codec=UInt64Codec(),
        parse_value=int,
        format_value=str,
    )


def mutation_program(script: list, driver: int) -> UserProgram:
    """Replays a scripted mutation sequence from one driver vertex.

    The script is a list of (superstep, kind, vertex) entries where kind is
    MUT_INSERT or MUT_DELETE and vertex is a VertexTuple (deletions only use
    its vid).  Every vertex stays active until the script is exhausted so
    the run lasts exactly max(superstep)+1 supersteps.
    """
    if not script:
        raise ValueError("empty mutation script")
    last = max(s for s, _, _ in script)

    def compute(vertex: VertexTuple, payload, gs) -> ComputeOutput:
        if vertex.value is None:
            vertex.value = 0.0
        muts = []
        if vertex.vid == driver:
            for s, kind, v in script:
                if s == gs.superstep:
                    muts.append(Mutation(kind, v.copy()))
        vertex.halt = gs.superstep > last
        return ComputeOutput(vertex, mutations=muts)

    return UserProgram(
        name="mutate-test",
        compute=compute,
        value_codec=Float64Codec(),
        edge_codec=Float64Codec(),
        payload_codec=Float64Codec(),
        parse_value=float,
        format_value=repr,
    )
