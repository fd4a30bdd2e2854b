"""Job configuration and validation."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

from .plan import PlanConfig
from .types import UserProgram

DEFAULT_MAX_SUPERSTEPS = 1_000_000
PAGE_SIZE = 4096


def default_workers() -> int:
    return os.cpu_count() or 1


@dataclass
class JobSpec:
    program: UserProgram
    input_path: str
    output_path: str
    num_partitions: int = 1
    plan: PlanConfig = field(default_factory=PlanConfig)
    checkpoint_every: int = 0  # 0 = never
    max_supersteps: int = DEFAULT_MAX_SUPERSTEPS
    workers: Optional[int] = None  # default: logical core count
    workdir: Optional[str] = None  # default: PREGELIX_WORKDIR or a temp dir
    ckpt_dir: Optional[str] = None
    buffer_cache_bytes: int = 64 * 1024 * 1024
    groupby_budget_bytes: int = 64 * 1024 * 1024
    page_size: int = PAGE_SIZE
    channel_capacity: int = 64  # batches
    batch_size: int = 512  # tuples per channel batch
    stats_path: Optional[str] = None
    # test hook: list of (worker_id, superstep) interruptions to inject
    failure_injections: list = field(default_factory=list)


def validate_job(spec: JobSpec) -> list:
    """Return a list of human-readable violations; empty means runnable."""
    out = []
    if spec.num_partitions < 1:
        out.append("numPartitions must be >= 1")
    if spec.checkpoint_every < 0:
        out.append("checkpointEvery must be >= 0")
    if spec.max_supersteps is not None and spec.max_supersteps < 1:
        out.append("maxSupersteps must be >= 1")
    if spec.workers is not None and spec.workers < 1:
        out.append("workers must be >= 1")
    if spec.buffer_cache_bytes < 8 * spec.page_size:
        out.append("buffer cache must hold at least 8 pages")
    if spec.program is None:
        out.append("a user program is required")
    out.extend(spec.plan.violations())
    return out
