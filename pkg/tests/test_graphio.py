"""Graph text parsing, error reporting, and deterministic generation."""

import pytest

from vertexflow.algorithms import sssp_program
from vertexflow.graphio import (GraphParseError, format_vertex, gen_graph,
                                iter_graph_file, parse_graph_line)


def _prog():
    return sssp_program(1)


def test_parse_line():
    v = parse_graph_line("7\t2.5\t1:0.5,3:2", 1, _prog())
    assert v.vid == 7 and v.value == 2.5 and not v.halt
    assert v.edges == [(1, 0.5), (3, 2.0)]
    v2 = parse_graph_line("8\tinf\t", 2, _prog())
    assert v2.value == float("inf") and v2.edges == []


def test_parse_errors_carry_line_numbers(tmp_path):
    cases = ["x\t0\t", "1", "1\tnotanumber\t", "2\t0\t3:bad"]
    for i, line in enumerate(cases):
        with pytest.raises(GraphParseError) as err:
            parse_graph_line(line, 41 + i, _prog())
        assert "line %d" % (41 + i) in str(err.value)


def test_comments_and_blanks_skipped(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# header\n\n1\t0\t2:1\n2\t0\t\n")
    rows = list(iter_graph_file(str(p), _prog()))
    assert [v.vid for _, v in rows] == [1, 2]
    assert rows[0][0] == 3  # line numbers of the real rows
    assert rows[1][0] == 4


def test_format_roundtrip():
    prog = _prog()
    line = "5\t1.5\t2:0.25,9:3.0"
    v = parse_graph_line(line, 1, prog)
    assert parse_graph_line(format_vertex(v, prog), 1, prog) == v


@pytest.mark.parametrize("kind", ["uniform", "powerlaw", "path", "cycle"])
def test_gen_graph_deterministic(kind, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    ea = gen_graph(kind, 200, 3.0, seed=42, out_path=str(a))
    eb = gen_graph(kind, 200, 3.0, seed=42, out_path=str(b))
    assert ea == eb
    assert a.read_text() == b.read_text()
    other = tmp_path / "c.txt"
    gen_graph(kind, 200, 3.0, seed=43, out_path=str(other))
    if kind in ("uniform", "powerlaw"):
        assert other.read_text() != a.read_text()


def test_gen_graph_shapes(tmp_path):
    p = tmp_path / "p.txt"
    edges = gen_graph("path", 10, 0, seed=0, out_path=str(p))
    assert edges == 9
    edges = gen_graph("cycle", 10, 0, seed=0, out_path=str(p))
    assert edges == 10
    with pytest.raises(ValueError):
        gen_graph("blob", 10, 1, seed=0, out_path=str(p))
