"""Command line interface: subcommands, flags, exit codes."""

import os

import pytest

from vertexflow.cli import main, output_checksum


def _gen(tmp_path, n=120, value="inf"):
    g = str(tmp_path / "g.txt")
    rc = main(["gen", "--kind", "uniform", "--n", str(n), "--avg-degree", "3",
               "--seed", "7", "--out", g, "--value", value])
    assert rc == 0
    return g


def test_gen_and_run(tmp_path, capsys):
    g = _gen(tmp_path)
    out = str(tmp_path / "out")
    rc = main(["run", "--program", "sssp", "--source", "1",
               "--input", g, "--output", out,
               "--partitions", "2", "--workdir", str(tmp_path / "wd"),
               "--stats", str(tmp_path / "stats.csv")])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "reason=converged" in printed
    assert os.path.exists(os.path.join(out, "part-0.txt"))
    assert (tmp_path / "stats.csv").read_text().startswith("superstep,")


def test_run_plan_flags(tmp_path):
    g = _gen(tmp_path, n=60)
    rc = main(["run", "--program", "sssp", "--source", "1", "--input", g,
               "--output", str(tmp_path / "out"),
               "--workdir", str(tmp_path / "wd"),
               "--join", "leftouter", "--groupby", "preclustered",
               "--connector", "merge", "--storage", "lsm"])
    assert rc == 0


def test_invalid_plan_combination_exits_2(tmp_path):
    g = _gen(tmp_path, n=20)
    rc = main(["run", "--program", "sssp", "--source", "1", "--input", g,
               "--output", str(tmp_path / "out"),
               "--workdir", str(tmp_path / "wd"),
               "--groupby", "preclustered", "--connector", "pipelined"])
    assert rc == 2


def test_missing_source_exits_2(tmp_path):
    g = _gen(tmp_path, n=20)
    rc = main(["run", "--program", "sssp", "--input", g,
               "--output", str(tmp_path / "out")])
    assert rc == 2


def test_bad_graph_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1\t0\t\nnot-a-vid\t0\t\n")
    rc = main(["run", "--program", "cc", "--input", str(bad),
               "--output", str(tmp_path / "out"),
               "--workdir", str(tmp_path / "wd")])
    assert rc == 2
    assert "line 2" in capsys.readouterr().err


def test_unknown_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["run", "--bogus"])
    assert err.value.code == 2


def test_recover_test_subcommand(tmp_path, capsys):
    g = _gen(tmp_path, n=150)
    rc = main(["recover-test", "--program", "sssp", "--source", "1",
               "--input", g, "--partitions", "3",
               "--fail-superstep", "4", "--checkpoint-every", "2"])
    assert rc == 0
    assert "match=True" in capsys.readouterr().out


def test_bench_plans_checksums_agree(tmp_path, capsys):
    g = _gen(tmp_path, n=80)
    capsys.readouterr()  # discard the gen message
    rc = main(["bench-plans", "--program", "sssp", "--source", "1",
               "--input", g, "--partitions", "2"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 17  # header + 16 plans
    checksums = {line.rsplit(",", 1)[1] for line in lines[1:]}
    assert len(checksums) == 1


def test_output_checksum_is_order_independent(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(); b.mkdir()
    (a / "part-0.txt").write_text("1\t0.5\t\n2\t1.5\t\n")
    (a / "part-1.txt").write_text("3\t2.5\t\n")
    (b / "part-0.txt").write_text("3\t2.5\t\n")
    (b / "part-1.txt").write_text("2\t1.5\t\n1\t0.5\t\n")
    assert output_checksum(str(a)) == output_checksum(str(b))
