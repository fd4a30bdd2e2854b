"""Command line entry points.

Subcommands: run (execute a program over a graph), gen (synthesize a
graph), bench-plans (run all sixteen plan variants and report per-plan
timing plus an output checksum), recover-test (inject a worker failure and
verify the recovered output matches a clean run).

Exit codes: 0 success, 1 job failure, 2 bad arguments or invalid job.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import shutil
import sys
import tempfile

from .algorithms import cc_program, mutation_program, pagerank_program, sssp_program
from .graphio import GraphParseError, gen_graph
from .job import JobSpec, validate_job
from .plan import Connector, GroupBy, Join, PlanConfig, Storage, enumerate_plans
from .runtime import STATS_HEADER, JobFailure, JobRuntime
from .types import MUT_DELETE, MUT_INSERT, VertexTuple

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class SystemExit2(Exception):
    """Usage-level error: reported on stderr with exit code 2."""


def _build_program(args):
    if args.program == "sssp":
        if args.source is None:
            raise SystemExit2("--source is required for sssp")
        return sssp_program(args.source)
    if args.program == "pagerank":
        return pagerank_program(args.iterations, args.damping)
    if args.program == "cc":
        return cc_program()
    if args.program == "mutate-test":
        # a small fixed exercise: drop one vertex, add two, overwrite one
        script = [
            (1, MUT_DELETE, VertexTuple(2, True, None, [])),
            (2, MUT_INSERT, VertexTuple(1_000_001, True, 1.0, [])),
            (2, MUT_INSERT, VertexTuple(1_000_002, True, 2.0, [(1, 1.0)])),
            (3, MUT_DELETE, VertexTuple(1_000_001, True, None, [])),
            (3, MUT_INSERT, VertexTuple(1_000_001, True, 3.0, [])),
        ]
        return mutation_program(script, driver=1)
    raise SystemExit2("unknown program %r" % args.program)


def _plan_from_args(args) -> PlanConfig:
    return PlanConfig(
        join=Join(args.join),
        group_by=GroupBy(args.groupby),
        connector=Connector(args.connector),
        storage=Storage(args.storage),
    )


def _spec_from_args(args, program, plan, workdir=None, output=None) -> JobSpec:
    return JobSpec(
        program=program,
        input_path=args.input,
        output_path=output if output is not None else args.output,
        num_partitions=args.partitions,
        plan=plan,
        checkpoint_every=getattr(args, "checkpoint_every", 0),
        max_supersteps=args.max_supersteps,
        workers=args.workers,
        workdir=workdir if workdir is not None else args.workdir,
        ckpt_dir=getattr(args, "ckpt_dir", None),
        buffer_cache_bytes=args.buffer_cache_mb * 1024 * 1024,
        groupby_budget_bytes=args.groupby_mb * 1024 * 1024,
        stats_path=getattr(args, "stats", None),
    )


def _add_plan_flags(p):
    p.add_argument("--join", choices=[j.value for j in Join], default="outer")
    p.add_argument("--groupby", choices=[g.value for g in GroupBy], default="sort")
    p.add_argument("--connector", choices=[c.value for c in Connector],
                   default="pipelined")
    p.add_argument("--storage", choices=[s.value for s in Storage], default="btree")


def _add_run_flags(p):
    p.add_argument("--program", required=True,
                   choices=["pagerank", "sssp", "cc", "mutate-test"])
    p.add_argument("--input", required=True)
    p.add_argument("--partitions", type=int, default=4)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--workdir", default=None,
                   help="defaults to $PREGELIX_WORKDIR or a temp dir")
    p.add_argument("--max-supersteps", type=int, default=1_000_000)
    p.add_argument("--buffer-cache-mb", type=int, default=64)
    p.add_argument("--groupby-mb", type=int, default=64)
    p.add_argument("--source", type=int, default=None, help="sssp source vid")
    p.add_argument("--iterations", type=int, default=10, help="pagerank iterations")
    p.add_argument("--damping", type=float, default=0.85)


def output_checksum(out_dir: str) -> str:
    """Order-independent digest of the dumped vertex lines."""
    lines = []
    for name in sorted(os.listdir(out_dir)):
        if name.startswith("part-"):
            with open(os.path.join(out_dir, name)) as fh:
                lines.extend(fh)
    h = hashlib.sha256()
    for line in sorted(lines):
        h.update(line.encode())
    return h.hexdigest()[:16]


def cmd_run(args) -> int:
    program = _build_program(args)
    plan = _plan_from_args(args)
    spec = _spec_from_args(args, program, plan)
    problems = validate_job(spec)
    if problems:
        for msg in problems:
            print("error:", msg, file=sys.stderr)
        return EXIT_USAGE
    report = JobRuntime(spec).run()
    print("supersteps=%d reason=%s live=%d total=%d recoveries=%d"
          % (report.supersteps, report.reason, report.live_vertices,
             report.total_vertices, report.recoveries))
    return EXIT_OK


def cmd_gen(args) -> int:
    edges = gen_graph(args.kind, args.n, args.avg_degree, args.seed,
                      args.out, value=args.value)
    print("wrote %d vertices, %d edges to %s" % (args.n, edges, args.out))
    return EXIT_OK


def cmd_bench_plans(args) -> int:
    program_factory = lambda: _build_program(args)
    base = tempfile.mkdtemp(prefix="vf-bench-")
    print("join,groupby,connector,storage,supersteps,wallMillis,messages,checksum")
    checksums = set()
    try:
        for i, plan in enumerate(enumerate_plans()):
            out = os.path.join(base, "out-%d" % i)
            wd = os.path.join(base, "wd-%d" % i)
            spec = _spec_from_args(args, program_factory(), plan,
                                   workdir=wd, output=out)
            report = JobRuntime(spec).run()
            wall = sum(s.wall_millis for s in report.stats)
            msgs = sum(s.messages for s in report.stats)
            digest = output_checksum(out)
            checksums.add(digest)
            print("%s,%s,%s,%s,%d,%d,%d,%s"
                  % (plan.join.value, plan.group_by.value, plan.connector.value,
                     plan.storage.value, report.supersteps, wall, msgs, digest))
        if len(checksums) != 1:
            print("error: plan outputs disagree", file=sys.stderr)
            return EXIT_FAILURE
    finally:
        shutil.rmtree(base, ignore_errors=True)
    return EXIT_OK


def cmd_recover_test(args) -> int:
    plan = _plan_from_args(args)
    if args.workers is None:
        # losing the sole worker would be unrecoverable
        args.workers = max(2, os.cpu_count() or 1)
    base = tempfile.mkdtemp(prefix="vf-recover-")
    try:
        clean_out = os.path.join(base, "clean")
        spec = _spec_from_args(args, _build_program(args), plan,
                               workdir=os.path.join(base, "wd-clean"),
                               output=clean_out)
        spec.checkpoint_every = 0
        clean = JobRuntime(spec).run()
        if clean.supersteps <= args.fail_superstep:
            print("error: job finished in %d supersteps, before the injected "
                  "failure at %d" % (clean.supersteps, args.fail_superstep),
                  file=sys.stderr)
            return EXIT_USAGE
        rec_out = os.path.join(base, "recovered")
        spec = _spec_from_args(args, _build_program(args), plan,
                               workdir=os.path.join(base, "wd-rec"),
                               output=rec_out)
        spec.ckpt_dir = os.path.join(base, "ckpt")
        spec.checkpoint_every = args.checkpoint_every
        spec.failure_injections = [(args.fail_worker, args.fail_superstep)]
        report = JobRuntime(spec).run()
        ok = output_checksum(clean_out) == output_checksum(rec_out)
        print("recoveries=%d supersteps=%d match=%s"
              % (report.recoveries, report.supersteps, ok))
        return EXIT_OK if ok and report.recoveries > 0 else EXIT_FAILURE
    finally:
        shutil.rmtree(base, ignore_errors=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vertexflow",
        description="single-box iterative-dataflow graph engine")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="execute a vertex program over a graph")
    _add_run_flags(p)
    _add_plan_flags(p)
    p.add_argument("--output", required=True)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--ckpt-dir", default=None)
    p.add_argument("--stats", default=None,
                   help="write a per-superstep CSV (%s)" % STATS_HEADER)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("gen", help="generate a synthetic graph")
    p.add_argument("--kind", required=True,
                   choices=["uniform", "powerlaw", "path", "cycle"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--avg-degree", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--value", default="0", help="initial vertex value text")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("bench-plans",
                       help="run all 16 plan variants and compare outputs")
    _add_run_flags(p)
    p.set_defaults(fn=cmd_bench_plans)

    p = sub.add_parser("recover-test",
                       help="verify checkpoint recovery reproduces a clean run")
    _add_run_flags(p)
    _add_plan_flags(p)
    p.add_argument("--checkpoint-every", type=int, default=2)
    p.add_argument("--fail-worker", type=int, default=0)
    p.add_argument("--fail-superstep", type=int, default=4)
    p.set_defaults(fn=cmd_recover_test)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit2 as e:
        print("error:", e, file=sys.stderr)
        return EXIT_USAGE
    except (GraphParseError, ValueError) as e:
        print("error:", e, file=sys.stderr)
        return EXIT_USAGE
    except (JobFailure, OSError) as e:
        print("job failed:", e, file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
