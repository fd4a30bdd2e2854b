"""Graph text format parsing, dumping and synthetic graph generation.

One vertex per line: ``vid<TAB>value<TAB>dest:weight,dest:weight,...``
The value and weight syntax is algorithm specific (the program supplies the
parsers).  Blank lines and lines starting with '#' are ignored.
"""

from __future__ import annotations

import math
import random

from .types import UserProgram, VertexTuple


class GraphParseError(ValueError):
    pass


def parse_graph_line(line: str, line_no: int, program: UserProgram) -> VertexTuple:
    parts = line.rstrip("\n").split("\t")
    if len(parts) < 2:
        raise GraphParseError("line %d: expected vid<TAB>value[<TAB>edges]" % line_no)
    try:
        vid = int(parts[0])
    except ValueError:
        raise GraphParseError("line %d: bad vid %r" % (line_no, parts[0])) from None
    if vid < 0 or vid >= 1 << 64:
        raise GraphParseError("line %d: vid out of 64-bit range" % line_no)
    try:
        value = program.parse_value(parts[1])
    except Exception as e:
        raise GraphParseError("line %d: bad value %r (%s)" % (line_no, parts[1], e)) from None
    edges = []
    if len(parts) > 2 and parts[2]:
        for item in parts[2].split(","):
            dest_s, _, w_s = item.partition(":")
            try:
                dest = int(dest_s)
                weight = program.parse_edge_value(w_s) if w_s else program.parse_edge_value("1")
            except Exception as e:
                raise GraphParseError(
                    "line %d: bad edge %r (%s)" % (line_no, item, e)
                ) from None
            edges.append((dest, weight))
    return VertexTuple(vid, False, value, edges)


def iter_graph_file(path: str, program: UserProgram):
    """Yield (line_no, VertexTuple); raises GraphParseError with line numbers."""
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield line_no, parse_graph_line(line, line_no, program)


def format_vertex(v: VertexTuple, program: UserProgram) -> str:
    edges = ",".join(
        "%d:%s" % (dest, program.format_edge_value(w)) for dest, w in v.edges
    )
    return "%d\t%s\t%s" % (v.vid, program.format_value(v.value), edges)


def gen_graph(kind: str, n: int, avg_degree: float, seed: int, out_path: str,
              value: str = "0", min_vid: int = 1) -> int:
    """Write a deterministic synthetic graph; returns the edge count."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    vids = list(range(min_vid, min_vid + n))
    edge_count = 0
    with open(out_path, "w") as fh:
        if kind == "path":
            for i, vid in enumerate(vids):
                edges = [vids[i + 1]] if i + 1 < n else []
                edge_count += len(edges)
                fh.write(_line(vid, value, edges, rng=None))
        elif kind == "cycle":
            for i, vid in enumerate(vids):
                edges = [vids[(i + 1) % n]] if n > 1 else []
                edge_count += len(edges)
                fh.write(_line(vid, value, edges, rng=None))
        elif kind == "uniform":
            for vid in vids:
                k = max(0, rng.randint(0, int(2 * avg_degree)))
                targets = set()
                while len(targets) < min(k, n - 1):
                    t = rng.choice(vids)
                    if t != vid:
                        targets.add(t)
                edges = sorted(targets)
                edge_count += len(edges)
                fh.write(_line(vid, value, edges, rng))
        elif kind == "powerlaw":
            # out-degree ~ k^-2.2, truncated to [1, min(n-1, 1000)]
            kmax = min(n - 1, 1000) if n > 1 else 1
            weights = [k ** -2.2 for k in range(1, kmax + 1)]
            for vid in vids:
                if n == 1:
                    fh.write(_line(vid, value, [], rng))
                    continue
                k = rng.choices(range(1, kmax + 1), weights=weights)[0]
                targets = set()
                while len(targets) < k:
                    t = rng.choice(vids)
                    if t != vid:
                        targets.add(t)
                edges = sorted(targets)
                edge_count += len(edges)
                fh.write(_line(vid, value, edges, rng))
        else:
            raise ValueError("unknown graph kind %r" % kind)
    return edge_count


def _line(vid, value, targets, rng) -> str:
    if rng is None:
        edges = ",".join("%d:1" % t for t in targets)
    else:
        edges = ",".join("%d:%s" % (t, round(rng.uniform(0.1, 10.0), 3)) for t in targets)
    return "%d\t%s\t%s\n" % (vid, value, edges)
