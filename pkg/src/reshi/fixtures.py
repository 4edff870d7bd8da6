"""Synthetic but plausible inputs: machine catalog, workflows, runtime matrices, traces.

The catalog mimics nine EC2-like families in three sizes. Runtimes follow
each task's CPU/memory/IO mix against the node's per-group benchmark ranks,
with multiplicative noise on top.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import CPUS, MEMORY, Cluster, NodeProfile, RuntimeMatrix, TaskDescriptor, WorkflowDag, save_workflow
from .profiling import TaskTraceRecord, rank_features, save_profiles, save_traces
from .simulator import save_runtimes
from .tree import TreeParams

GIB = 1 << 30

BENCHMARKS = (
    ("jtr_hashes_per_s", True),
    ("blk_seconds", False),
    ("ram_copy_mb_s", True),
    ("ram_scale_mb_s", True),
    ("ram_add_mb_s", True),
    ("ram_triad_mb_s", True),
    ("fio_seq_read_mb_s", True),
    ("fio_seq_write_mb_s", True),
    ("fio_rand_read_iops", True),
    ("fio_rand_write_iops", True),
)
CPU_COLS = (0, 1)
MEM_COLS = (2, 3, 4, 5)
IO_COLS = (6, 7, 8, 9)

TRACE_METRICS = ("cpu_usage_pct", "bytes_read", "bytes_written", "peak_mem_bytes", "avg_mem_bytes")

# family: (cpu speed, memory bandwidth, io speed, GiB per vCPU)
FAMILIES = {
    "m5": (1.00, 1.00, 1.00, 4.0),
    "c5": (1.25, 1.05, 0.95, 2.0),
    "r5": (1.00, 1.10, 1.00, 8.0),
    "m5a": (0.85, 0.90, 0.95, 4.0),
    "c5a": (1.15, 0.95, 0.90, 2.0),
    "r5a": (0.85, 0.95, 0.95, 8.0),
    "m4": (0.75, 0.80, 0.70, 4.0),
    "c4": (1.00, 0.85, 0.70, 1.875),
    "i3": (0.90, 1.00, 1.60, 7.625),
}
SIZES = {"large": 2, "xlarge": 4, "2xlarge": 8}

# Tree size for the fixture workflows. About 7 processes x 27 machine types
# with per-pair affinities saturate a depth-8 tree.
FIXTURE_TREE = TreeParams(max_depth=16, min_samples_leaf=2)


def synthetic_catalog(seed: int = 7) -> Cluster:
    """27 machine types, one node each, id equal to the machine type. Scores carry 2% noise."""
    rng = np.random.default_rng(seed)
    nodes = []
    for fam, (cpu, mem, io, gib) in FAMILIES.items():
        for size, vcpus in SIZES.items():
            scale = {"large": 1.0, "xlarge": 1.3, "2xlarge": 1.7}[size]
            raw = [
                6000.0 * cpu * vcpus,
                900.0 / (cpu * vcpus ** 0.8),
                11000.0 * mem * vcpus ** 0.3,
                10500.0 * mem * vcpus ** 0.3,
                12000.0 * mem * vcpus ** 0.3,
                12200.0 * mem * vcpus ** 0.3,
                140.0 * io * scale,
                120.0 * io * scale,
                3000.0 * io * scale,
                2800.0 * io * scale,
            ]
            noisy = [round(x * (1 + rng.normal(0, 0.02)), 2) for x in raw]
            mtype = f"{fam}.{size}"
            nodes.append(NodeProfile(
                id=mtype,
                machine_type=mtype,
                capacities={CPUS: float(vcpus), MEMORY: int(gib * vcpus * GIB)},
                benchmark_scores=noisy,
            ))
    return Cluster(tuple(nodes), [b[0] for b in BENCHMARKS], [b[1] for b in BENCHMARKS])


def group_slowness(profiled_catalog: Cluster) -> dict[str, np.ndarray]:
    """Per machine type: mean normalised rank (0 best, 1 worst) of the cpu, memory and io groups."""
    ranks = np.array([n.benchmark_ranks for n in profiled_catalog.nodes], dtype=float)
    top = ranks.max(axis=0)
    norm = np.where(top > 1, (ranks - 1) / np.maximum(top - 1, 1), 0.0)
    out = {}
    for i, n in enumerate(profiled_catalog.nodes):
        out[n.machine_type] = np.array([
            norm[i, list(CPU_COLS)].mean(),
            norm[i, list(MEM_COLS)].mean(),
            norm[i, list(IO_COLS)].mean(),
        ])
    return out


@dataclass(frozen=True)
class Process:
    name: str
    cpus: int
    memory_gib: float
    base_runtime: float
    mix: tuple[float, float, float]  # cpu, memory, io weights


# per-sample chains, then fan-in steps over all samples
WORKFLOW_SHAPES = {
    "chipseq": {
        "per_sample": [
            Process("fastqc", 2, 2, 120, (0.5, 0.1, 0.4)),
            Process("trimgalore", 2, 2, 300, (0.6, 0.1, 0.3)),
            Process("bwa_mem", 4, 8, 900, (0.8, 0.15, 0.05)),
            Process("samtools_sort", 2, 6, 240, (0.2, 0.3, 0.5)),
            Process("picard_markdup", 2, 8, 420, (0.2, 0.6, 0.2)),
            Process("macs2_callpeak", 1, 4, 360, (0.6, 0.3, 0.1)),
        ],
        "edges": [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)],
        "fan_in": [
            Process("consensus_peaks", 2, 4, 240, (0.4, 0.4, 0.2)),
            Process("multiqc", 1, 2, 90, (0.3, 0.2, 0.5)),
        ],
        "fan_in_sources": {0: [5], 1: [0, 4]},
    },
    "eager": {
        "per_sample": [
            Process("fastqc", 2, 2, 150, (0.5, 0.1, 0.4)),
            Process("adapterremoval", 2, 4, 420, (0.7, 0.1, 0.2)),
            Process("bwa_aln", 4, 8, 1100, (0.85, 0.1, 0.05)),
            Process("damageprofiler", 1, 6, 260, (0.3, 0.6, 0.1)),
        ],
        "edges": [],
        "fan_in": [Process("multiqc", 1, 2, 90, (0.3, 0.2, 0.5))],
        "fan_in_sources": {0: [0, 1, 2, 3]},
    },
    "viralrecon": {
        "per_sample": [
            Process("fastp", 2, 2, 180, (0.6, 0.1, 0.3)),
            Process("bowtie2", 4, 4, 600, (0.85, 0.1, 0.05)),
            Process("ivar_trim", 1, 2, 200, (0.4, 0.2, 0.4)),
            Process("ivar_variants", 1, 4, 260, (0.5, 0.4, 0.1)),
            Process("ivar_consensus", 1, 4, 220, (0.5, 0.3, 0.2)),
        ],
        "edges": [(0, 1), (1, 2), (2, 3), (2, 4)],
        "fan_in": [
            Process("variants_summary", 1, 2, 150, (0.4, 0.4, 0.2)),
            Process("multiqc", 1, 2, 90, (0.3, 0.2, 0.5)),
        ],
        "fan_in_sources": {0: [3, 4], 1: [0, 2]},
    },
}


@dataclass
class FixtureWorkflow:
    dag: WorkflowDag
    runtimes: RuntimeMatrix
    traces: list[TaskTraceRecord]
    metric_names: tuple[str, ...] = TRACE_METRICS


def _task_metrics(proc: Process, size: float) -> tuple[float, ...]:
    wc, wm, wi = proc.mix
    peak = proc.memory_gib * GIB * (0.5 + 0.4 * wm)
    return (
        round(100.0 * proc.cpus * (0.4 + 0.6 * wc), 3),
        round(size * 1e9 * (1 + 4 * wi)),
        round(size * 0.4e9 * (1 + 3 * wi)),
        round(peak * (0.9 + 0.2 * size / 2)),
        round(0.6 * peak),
    )


def synthetic_workflow(
    kind: str,
    profiled_catalog: Cluster,
    samples: int = 16,
    noise: float = 0.10,
    jitter: float = 0.02,
    runs: int = 2,
    run_noise: float = 0.03,
    seed: int = 11,
    alpha: float = 1.2,
) -> FixtureWorkflow:
    """Build a workflow, its true runtime matrix and historical traces.

    Runtime of a task on machine type m is
    ``base * size * sum_g mix_g * (1 + alpha * slowness_g(m)) * (1 + eps) * (1 + delta)``.
    ``eps ~ N(0, noise)`` is drawn once per (process, machine type): an
    affinity the benchmarks do not capture, shared by all instances of the
    process. ``delta ~ N(0, jitter)`` varies per task instance. Both are
    clipped to 2.5 standard deviations.
    """
    shape = WORKFLOW_SHAPES[kind]
    rng = np.random.default_rng(seed)
    slowness = group_slowness(profiled_catalog)
    types = sorted(slowness)

    procs: dict[str, tuple[Process, float]] = {}
    edges: dict[tuple[str, str], float] = {}
    per_sample = shape["per_sample"]
    for s in range(samples):
        size = float(np.clip(rng.lognormal(0.0, 0.35), 0.4, 3.0))
        ids = [f"{p.name}_{s:02d}" for p in per_sample]
        for p, tid in zip(per_sample, ids):
            procs[tid] = (p, size)
        for a, b in shape["edges"]:
            edges[(ids[a], ids[b])] = 0.0
    for k, p in enumerate(shape["fan_in"]):
        procs[p.name] = (p, 1.0)
        for src_idx in shape["fan_in_sources"][k]:
            for s in range(samples):
                edges[(f"{per_sample[src_idx].name}_{s:02d}", p.name)] = 0.0
    for (src, dst) in edges:
        p, size = procs[src]
        edges[(src, dst)] = float(_task_metrics(p, size)[2])

    names = sorted({p.name for p, _ in procs.values()})
    affinity = {
        (name, m): float(np.clip(rng.normal(0.0, noise), -2.5 * noise, 2.5 * noise))
        for name in names for m in types
    }
    runtimes = {}
    for tid in sorted(procs):
        p, size = procs[tid]
        mix = np.array(p.mix)
        for m in types:
            delta = float(np.clip(rng.normal(0.0, jitter), -2.5 * jitter, 2.5 * jitter))
            r = p.base_runtime * size * float(mix @ (1 + alpha * slowness[m])) * (1 + affinity[(p.name, m)]) * (1 + delta)
            runtimes[(tid, m)] = round(r, 3)
    matrix = RuntimeMatrix(runtimes)

    traces = []
    for tid in sorted(procs):
        p, size = procs[tid]
        metrics = _task_metrics(p, size)
        for m in types:
            for _ in range(runs):
                r = matrix[(tid, m)] * (1 + float(np.clip(rng.normal(0.0, run_noise), -0.1, 0.1)))
                traces.append(TaskTraceRecord(tid, m, round(r, 3), metrics))

    avg = {}
    for rec in traces:
        avg.setdefault(rec.task_id, []).append(rec.runtime)
    tasks = []
    for tid in sorted(procs):
        p, size = procs[tid]
        tasks.append(TaskDescriptor(
            id=tid,
            resource_requests={CPUS: float(p.cpus), MEMORY: int(p.memory_gib * GIB)},
            avg_historical_runtime=float(np.mean(avg[tid])),
            trace_features=_task_metrics(p, size),
        ))
    dag = WorkflowDag(tasks, edges, name=kind, feature_names=TRACE_METRICS)
    return FixtureWorkflow(dag, matrix, traces)


def write_fixture_bundle(out_dir, samples: int = 16, seed: int = 11, workflows=("chipseq", "eager", "viralrecon"),
                         cluster_count: int = 200, nodes_per_cluster: int = 40) -> Path:
    """Write catalog, workflows, runtimes, traces and an experiment plan; return the plan path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    catalog = synthetic_catalog()
    save_profiles(catalog, out / "catalog.csv")
    profiled = rank_features(catalog)
    entries = []
    for i, kind in enumerate(workflows):
        fx = synthetic_workflow(kind, profiled, samples=samples, seed=seed + i)
        save_workflow(fx.dag, out / f"{kind}.json")
        save_runtimes(fx.runtimes, out / f"{kind}_runtimes.csv")
        save_traces(fx.traces, fx.metric_names, out / f"{kind}_traces.csv")
        entries.append({
            "name": kind,
            "dag": f"{kind}.json",
            "runtimes": f"{kind}_runtimes.csv",
            "traces": f"{kind}_traces.csv",
        })
    plan = {
        "format": "reshi-plan",
        "version": 1,
        "catalog": "catalog.csv",
        "workflows": entries,
        "cluster_count": cluster_count,
        "nodes_per_cluster": nodes_per_cluster,
        "strategies": ["heft", "reshi-c", "reshi-m", "minmin", "rr"],
        "distributions": ["normal", "exponential"],
        "err_levels": [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5],
        "seed": 2022,
        "tree": {"max_depth": FIXTURE_TREE.max_depth, "min_samples_leaf": FIXTURE_TREE.min_samples_leaf},
    }
    path = out / "plan.json"
    path.write_text(json.dumps(plan, indent=1) + "\n")
    return path
