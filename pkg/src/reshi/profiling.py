"""Node benchmark ingestion, per-feature rank normalisation and training-set assembly."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import CPUS, MEMORY, Cluster, NodeProfile, TaskDescriptor
from .errors import (
    DimensionMismatch,
    EmptyDataset,
    ParseError,
    UnknownMachineType,
    UnknownTask,
    ValidationError,
)
from .formats import fmt_float, parse_float, read_versioned_csv, write_versioned_csv

PROFILES_FORMAT = "reshi-profiles"
TRACES_FORMAT = "reshi-traces"

HIGHER = "higher"
LOWER = "lower"

TARGET_NORMALIZED = "normalized"
TARGET_RAW = "raw"


@dataclass(frozen=True)
class TaskTraceRecord:
    task_id: str
    machine_type: str
    runtime: float
    metrics: tuple[float, ...]

    def __post_init__(self):
        if not self.runtime > 0:
            raise ValidationError(f"non-positive runtime {self.runtime} for task {self.task_id!r}")


def dense_rank(values: Sequence[float], higher_is_better: bool) -> list[int]:
    """Ties share a rank, the next distinct value gets the next integer; rank 1 is best."""
    distinct = sorted(set(values), reverse=higher_is_better)
    position = {v: i + 1 for i, v in enumerate(distinct)}
    return [position[v] for v in values]


def rank_features(cluster: Cluster, orientations: Sequence[bool] | None = None) -> Cluster:
    """Return a copy of ``cluster`` whose nodes carry dense per-feature ranks.

    ``orientations[k]`` is True when a higher raw score is better. Defaults to
    the orientations stored on the cluster.
    """
    if orientations is None:
        orientations = cluster.orientations
    orientations = tuple(bool(o) for o in orientations)
    w = len(orientations)
    for node in cluster.nodes:
        if len(node.benchmark_scores) != w:
            raise DimensionMismatch(
                f"node {node.id!r} has {len(node.benchmark_scores)} scores, expected {w}"
            )
    columns = [
        dense_rank([n.benchmark_scores[k] for n in cluster.nodes], orientations[k])
        for k in range(w)
    ]
    nodes = [
        NodeProfile(
            id=n.id,
            machine_type=n.machine_type,
            capacities=n.capacities,
            benchmark_scores=n.benchmark_scores,
            benchmark_ranks=tuple(col[i] for col in columns),
        )
        for i, n in enumerate(cluster.nodes)
    ]
    return Cluster(tuple(nodes), cluster.benchmark_names, orientations)


def ranks_by_machine_type(profiled: Cluster) -> dict[str, tuple[int, ...]]:
    if not profiled.is_profiled:
        raise ValidationError("cluster has not been rank-normalised")
    out: dict[str, tuple[int, ...]] = {}
    for node in profiled.nodes:
        out.setdefault(node.machine_type, node.benchmark_ranks)
    return out


# -- profile file ------------------------------------------------------------

_PROFILE_FIXED = ["id", "machine_type", "cpus", "memory_bytes"]


def load_profiles(path) -> Cluster:
    """Parse a node profile file. Benchmark columns are named ``<name>:higher|lower``."""
    header, rows = read_versioned_csv(path, PROFILES_FORMAT)
    if header[:4] != _PROFILE_FIXED:
        raise ParseError(f"header must start with {','.join(_PROFILE_FIXED)}", row=2, path=path)
    names, orientations = [], []
    for col in header[4:]:
        name, sep, orient = col.rpartition(":")
        if not sep or orient not in (HIGHER, LOWER):
            raise ParseError("benchmark column needs ':higher' or ':lower' suffix", row=2, column=col, path=path)
        names.append(name)
        orientations.append(orient == HIGHER)
    if not rows:
        raise EmptyDataset(f"{path}: no nodes")
    nodes = []
    for line, values in rows:
        try:
            nodes.append(NodeProfile(
                id=values[0],
                machine_type=values[1],
                capacities={
                    CPUS: parse_float(values[2], line, "cpus", path),
                    MEMORY: int(parse_float(values[3], line, "memory_bytes", path)),
                },
                benchmark_scores=[parse_float(v, line, header[4 + k], path) for k, v in enumerate(values[4:])],
            ))
        except ValidationError as exc:
            raise ParseError(str(exc), row=line, path=path) from None
    try:
        return Cluster(tuple(nodes), names, orientations)
    except ValidationError as exc:
        raise ParseError(str(exc), path=path) from None


def save_profiles(cluster: Cluster, path) -> None:
    header = _PROFILE_FIXED + [
        f"{name}:{HIGHER if hi else LOWER}"
        for name, hi in zip(cluster.benchmark_names, cluster.orientations)
    ]
    rows = [
        [n.id, n.machine_type, fmt_float(n.capacity(CPUS)), str(int(n.capacity(MEMORY)))]
        + [fmt_float(s) for s in n.benchmark_scores]
        for n in cluster.nodes
    ]
    write_versioned_csv(path, PROFILES_FORMAT, header, rows)


# -- trace file --------------------------------------------------------------

_TRACE_FIXED = ["task_id", "machine_type", "runtime_s"]


def load_traces(path) -> tuple[list[TaskTraceRecord], list[str]]:
    """Parse a trace file into records plus the ordered metric names."""
    header, rows = read_versioned_csv(path, TRACES_FORMAT)
    if header[:3] != _TRACE_FIXED:
        raise ParseError(f"header must start with {','.join(_TRACE_FIXED)}", row=2, path=path)
    metric_names = header[3:]
    if not rows:
        raise EmptyDataset(f"{path}: header only, no trace rows")
    records = []
    for line, values in rows:
        runtime = parse_float(values[2], line, "runtime_s", path)
        if not runtime > 0:
            raise ParseError(f"non-positive runtime {runtime}", row=line, column="runtime_s", path=path)
        metrics = tuple(parse_float(v, line, metric_names[k], path) for k, v in enumerate(values[3:]))
        records.append(TaskTraceRecord(values[0], values[1], runtime, metrics))
    return records, metric_names


def save_traces(records: Sequence[TaskTraceRecord], metric_names: Sequence[str], path) -> None:
    rows = [
        [r.task_id, r.machine_type, fmt_float(r.runtime)] + [fmt_float(m) for m in r.metrics]
        for r in records
    ]
    write_versioned_csv(path, TRACES_FORMAT, _TRACE_FIXED + list(metric_names), rows)


def task_catalog_from_traces(records: Sequence[TaskTraceRecord]) -> dict[str, TaskDescriptor]:
    """Per task: mean runtime over all runs and mean metric vector. Requests default to zero."""
    grouped: dict[str, list[TaskTraceRecord]] = {}
    for r in records:
        grouped.setdefault(r.task_id, []).append(r)
    catalog = {}
    for tid in sorted(grouped):
        runs = grouped[tid]
        catalog[tid] = TaskDescriptor(
            id=tid,
            resource_requests={CPUS: 0, MEMORY: 0},
            avg_historical_runtime=float(np.mean([r.runtime for r in runs])),
            trace_features=np.mean([r.metrics for r in runs], axis=0),
        )
    return catalog


# -- design matrix -----------------------------------------------------------

@dataclass(frozen=True)
class TrainingSet:
    X: np.ndarray
    targets: np.ndarray
    runtimes: np.ndarray
    task_ids: tuple[str, ...]
    machine_types: tuple[str, ...]
    target_mode: str

    @property
    def shape(self):
        return self.X.shape


def build_training_set(
    traces: Sequence[TaskTraceRecord],
    profiled_cluster: Cluster,
    task_catalog: Mapping[str, TaskDescriptor] | None = None,
    target: str = TARGET_NORMALIZED,
) -> TrainingSet:
    """Rows are task metrics followed by node ranks, one row per trace record.

    With ``target="normalized"`` each runtime is divided by the fastest
    runtime observed for the same task, so 1.0 marks the best machine.
    """
    if not traces:
        raise EmptyDataset("no trace records")
    if target not in (TARGET_NORMALIZED, TARGET_RAW):
        raise ValidationError(f"unknown target mode {target!r}")
    ranks = ranks_by_machine_type(profiled_cluster)
    v = len(traces[0].metrics)
    for r in traces:
        if r.machine_type not in ranks:
            raise UnknownMachineType(r.machine_type)
        if task_catalog is not None and r.task_id not in task_catalog:
            raise UnknownTask(r.task_id)
        if len(r.metrics) != v:
            raise DimensionMismatch(f"trace for {r.task_id!r} has {len(r.metrics)} metrics, expected {v}")

    order = sorted(range(len(traces)), key=lambda i: (traces[i].task_id, traces[i].machine_type, i))
    rows = [traces[i] for i in order]
    w = len(next(iter(ranks.values())))
    X = np.array([list(r.metrics) + list(ranks[r.machine_type]) for r in rows], dtype=np.float64)
    X = X.reshape(len(rows), v + w)
    runtimes = np.array([r.runtime for r in rows], dtype=np.float64)
    if target == TARGET_NORMALIZED:
        fastest: dict[str, float] = {}
        for r in rows:
            fastest[r.task_id] = min(fastest.get(r.task_id, np.inf), r.runtime)
        targets = runtimes / np.array([fastest[r.task_id] for r in rows])
    else:
        targets = runtimes.copy()
    return TrainingSet(
        X=X,
        targets=targets,
        runtimes=runtimes,
        task_ids=tuple(r.task_id for r in rows),
        machine_types=tuple(r.machine_type for r in rows),
        target_mode=target,
    )
