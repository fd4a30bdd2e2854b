"""vertexflow: a single-box Pregel engine executed as an iterative dataflow
of relational operators over partitioned on-disk indexes."""

from .algorithms import cc_program, mutation_program, pagerank_program, sssp_program
from .job import JobSpec, validate_job
from .plan import (Connector, GroupBy, Join, PlanConfig, Storage,
                   enumerate_plans, partition_fn)
from .runtime import (JobFailure, JobReport, JobRuntime, PartitionMap,
                      PhysicalPlan, SuperstepStats, evaluate_termination,
                      generate_plan, two_stage_aggregate)
from .types import (NULL, CombinedList, ComputeOutput, GlobalState, Mutation,
                    MUT_DELETE, MUT_INSERT, UserProgram, VertexTuple,
                    default_combine)

__version__ = "0.1.0"

__all__ = [
    "CombinedList", "ComputeOutput", "Connector", "GlobalState", "GroupBy",
    "JobFailure", "JobReport", "JobRuntime", "JobSpec", "Join", "MUT_DELETE",
    "MUT_INSERT", "Mutation", "NULL", "PartitionMap", "PhysicalPlan",
    "PlanConfig", "Storage", "SuperstepStats", "UserProgram", "VertexTuple",
    "cc_program", "default_combine", "enumerate_plans", "evaluate_termination",
    "generate_plan", "mutation_program", "pagerank_program", "partition_fn",
    "sssp_program", "two_stage_aggregate", "validate_job",
]
