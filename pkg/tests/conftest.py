import heapq
import os
import random

import pytest

from vertexflow import JobRuntime, JobSpec, PlanConfig


def write_graph(path, adj, value="inf", weights=None):
    """adj: {vid: [dest, ...]}; weights: {(src, dest): w} or None for 1."""
    with open(path, "w") as fh:
        for vid in sorted(adj):
            edges = ",".join(
                "%d:%s" % (d, (weights or {}).get((vid, d), 1))
                for d in adj[vid])
            fh.write("%d\t%s\t%s\n" % (vid, value, edges))


def random_graph(rng, n, avg_degree=3.0, weighted=True):
    adj = {v: [] for v in range(1, n + 1)}
    weights = {}
    for v in adj:
        for _ in range(rng.randint(0, int(2 * avg_degree))):
            d = rng.randint(1, n)
            if d != v and d not in adj[v]:
                adj[v].append(d)
                if weighted:
                    weights[(v, d)] = round(rng.uniform(0.1, 10.0), 3)
    return adj, weights


def run_job(program, input_path, out_dir, workdir, plan=None, partitions=2, **kw):
    spec = JobSpec(program=program, input_path=input_path, output_path=out_dir,
                   num_partitions=partitions, plan=plan or PlanConfig(),
                   workdir=workdir, **kw)
    return JobRuntime(spec).run()


def read_output(out_dir, parse=float):
    got = {}
    for name in os.listdir(out_dir):
        if not name.startswith("part-"):
            continue
        with open(os.path.join(out_dir, name)) as fh:
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                got[int(parts[0])] = parse(parts[1])
    return got


def dijkstra(adj, weights, src):
    dist = {v: float("inf") for v in adj}
    if src not in dist:
        return dist
    dist[src] = 0.0
    pq = [(0.0, src)]
    while pq:
        d, u = heapq.heappop(pq)
        if d > dist[u]:
            continue
        for v in adj[u]:
            nd = d + weights.get((u, v), 1)
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                heapq.heappush(pq, (nd, v))
    return dist


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
