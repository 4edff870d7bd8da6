"""Core data types: tasks, workflow DAGs, nodes, clusters and the runtime matrix.

All types are frozen after construction and safe to share between
concurrent simulations.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .errors import CycleDetected, ParseError, UnknownTask, ValidationError

CPUS = "cpus"
MEMORY = "memory"
DEFAULT_RESOURCES = (CPUS, MEMORY)

WORKFLOW_FORMAT = "reshi-workflow"
WORKFLOW_VERSION = 1


@dataclass(frozen=True)
class TaskDescriptor:
    id: str
    resource_requests: Mapping[str, float] = field(default_factory=dict)
    avg_historical_runtime: float | None = None
    trace_features: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValidationError("task id must be nonempty")
        for kind, qty in self.resource_requests.items():
            if qty < 0:
                raise ValidationError(f"task {self.id!r}: negative {kind} request")
        if self.avg_historical_runtime is not None and self.avg_historical_runtime <= 0:
            raise ValidationError(f"task {self.id!r}: avg_historical_runtime must be > 0")
        object.__setattr__(self, "resource_requests", dict(self.resource_requests))
        object.__setattr__(self, "trace_features", tuple(float(x) for x in self.trace_features))

    def request(self, kind: str) -> float:
        return self.resource_requests.get(kind, 0)


@dataclass(frozen=True)
class NodeProfile:
    id: str
    machine_type: str
    capacities: Mapping[str, float]
    benchmark_scores: tuple[float, ...] = ()
    benchmark_ranks: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("node id must be nonempty")
        for kind in DEFAULT_RESOURCES:
            if self.capacities.get(kind, 0) <= 0:
                raise ValidationError(f"node {self.id!r}: {kind} capacity must be > 0")
        object.__setattr__(self, "capacities", dict(self.capacities))
        object.__setattr__(self, "benchmark_scores", tuple(float(x) for x in self.benchmark_scores))
        if self.benchmark_ranks is not None:
            ranks = tuple(int(r) for r in self.benchmark_ranks)
            if any(r < 1 for r in ranks):
                raise ValidationError(f"node {self.id!r}: ranks must be >= 1")
            object.__setattr__(self, "benchmark_ranks", ranks)

    def capacity(self, kind: str) -> float:
        return self.capacities.get(kind, 0)


@dataclass(frozen=True)
class Cluster:
    """A sequence of nodes plus the names and orientation of their benchmark columns.

    ``orientations[k]`` is True when a higher raw score is better for feature k.
    """

    nodes: tuple[NodeProfile, ...]
    benchmark_names: tuple[str, ...] = ()
    orientations: tuple[bool, ...] = ()

    def __post_init__(self):
        nodes = tuple(self.nodes)
        if not nodes:
            raise ValidationError("cluster must contain at least one node")
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate node ids in cluster")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "benchmark_names", tuple(self.benchmark_names))
        object.__setattr__(self, "orientations", tuple(bool(o) for o in self.orientations))
        object.__setattr__(self, "_by_id", {n.id: n for n in nodes})

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def node(self, node_id: str) -> NodeProfile:
        return self._by_id[node_id]

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    @property
    def machine_types(self) -> list[str]:
        return sorted({n.machine_type for n in self.nodes})

    @property
    def is_profiled(self) -> bool:
        return all(n.benchmark_ranks is not None for n in self.nodes)


class RuntimeMatrix(Mapping):
    """Measured true runtime in seconds, keyed by ``(task_id, machine_type)``."""

    def __init__(self, runtimes: Mapping[tuple[str, str], float]):
        data = {}
        for key, value in runtimes.items():
            value = float(value)
            if not value > 0:
                raise ValidationError(f"runtime for {key} must be > 0, got {value}")
            data[key] = value
        self._data = data

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def scaled(self, factor: float) -> "RuntimeMatrix":
        """Uniformly stretch every runtime, standing in for long-running extrapolation."""
        if factor <= 0:
            raise ValidationError("runtime scale factor must be > 0")
        return RuntimeMatrix({k: v * factor for k, v in self._data.items()})

    def missing(self, task_ids: Iterable[str], machine_types: Iterable[str]) -> list[tuple[str, str]]:
        machine_types = list(machine_types)
        return [(t, m) for t in task_ids for m in machine_types if (t, m) not in self._data]


class WorkflowDag:
    """Tasks plus precedence edges carrying a data volume in bytes."""

    def __init__(
        self,
        tasks: Iterable[TaskDescriptor],
        edges: Mapping[tuple[str, str], float] | Iterable[tuple[str, str]] = (),
        name: str = "workflow",
        feature_names: Sequence[str] = (),
    ):
        self.name = name
        self.feature_names = tuple(feature_names)
        task_map: dict[str, TaskDescriptor] = {}
        for task in tasks:
            if task.id in task_map:
                raise ValidationError(f"duplicate task id {task.id!r}")
            task_map[task.id] = task
        widths = {len(t.trace_features) for t in task_map.values()}
        if len(widths) > 1:
            raise ValidationError("trace_features length differs between tasks")

        if not isinstance(edges, Mapping):
            pairs = list(edges)
            edge_map = {}
            for pair in pairs:
                if pair in edge_map:
                    raise ValidationError(f"duplicate edge {pair[0]} -> {pair[1]}")
                edge_map[pair] = 0.0
            edges = edge_map
        children: dict[str, list[str]] = {t: [] for t in task_map}
        parents: dict[str, list[str]] = {t: [] for t in task_map}
        for (src, dst), volume in edges.items():
            for end in (src, dst):
                if end not in task_map:
                    raise UnknownTask(f"edge endpoint {end!r} is not a task")
            if src == dst:
                raise ValidationError(f"self-edge on {src!r}")
            if volume < 0:
                raise ValidationError(f"negative data volume on {src} -> {dst}")
            children[src].append(dst)
            parents[dst].append(src)

        self._tasks = task_map
        self._edges = {k: float(v) for k, v in edges.items()}
        self._children = {k: tuple(sorted(v)) for k, v in children.items()}
        self._parents = {k: tuple(sorted(v)) for k, v in parents.items()}
        self._order = self._toposort()

    def _toposort(self) -> tuple[str, ...]:
        indeg = {t: len(p) for t, p in self._parents.items()}
        heap = [t for t, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            t = heapq.heappop(heap)
            order.append(t)
            for c in self._children[t]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, c)
        if len(order) != len(self._tasks):
            stuck = sorted(t for t, d in indeg.items() if d > 0)
            for t in stuck:
                for c in self._children[t]:
                    if indeg[c] > 0:
                        raise CycleDetected((t, c))
        return tuple(order)

    @property
    def tasks(self) -> Mapping[str, TaskDescriptor]:
        return MappingProxyType(self._tasks)

    @property
    def edges(self) -> Mapping[tuple[str, str], float]:
        return MappingProxyType(self._edges)

    @property
    def task_ids(self) -> list[str]:
        return sorted(self._tasks)

    def task(self, task_id: str) -> TaskDescriptor:
        try:
            return self._tasks[task_id]
        except KeyError:
            raise UnknownTask(task_id) from None

    def children(self, task_id: str) -> tuple[str, ...]:
        if task_id not in self._children:
            raise UnknownTask(task_id)
        return self._children[task_id]

    def parents(self, task_id: str) -> tuple[str, ...]:
        if task_id not in self._parents:
            raise UnknownTask(task_id)
        return self._parents[task_id]

    def data_volume(self, src: str, dst: str) -> float:
        return self._edges.get((src, dst), 0.0)

    def __len__(self):
        return len(self._tasks)


def topological_order(dag: WorkflowDag) -> list[str]:
    """Kahn's order with ties broken by ascending task id."""
    return list(dag._order)


def children_count(dag: WorkflowDag, task_id: str) -> int:
    return len(dag.children(task_id))


def ready_tasks(dag: WorkflowDag, finished: Iterable[str]) -> set[str]:
    done = set(finished)
    return {
        t for t in dag.tasks
        if t not in done and all(p in done for p in dag.parents(t))
    }


# -- workflow file -----------------------------------------------------------

def workflow_to_dict(dag: WorkflowDag) -> dict:
    tasks = []
    for tid in dag.task_ids:
        t = dag.task(tid)
        entry = {
            "id": t.id,
            "cpus": t.request(CPUS),
            "memory_bytes": int(t.request(MEMORY)),
        }
        extra = {k: v for k, v in t.resource_requests.items() if k not in DEFAULT_RESOURCES}
        if extra:
            entry["resources"] = extra
        if t.avg_historical_runtime is not None:
            entry["avg_runtime_s"] = t.avg_historical_runtime
        if dag.feature_names:
            entry["features"] = dict(zip(dag.feature_names, t.trace_features))
        tasks.append(entry)
    edges = [
        {"from": s, "to": d, "data_volume_bytes": v}
        for (s, d), v in sorted(dag.edges.items())
    ]
    return {
        "format": WORKFLOW_FORMAT,
        "version": WORKFLOW_VERSION,
        "name": dag.name,
        "trace_features": list(dag.feature_names),
        "tasks": tasks,
        "edges": edges,
    }


def workflow_from_dict(doc: dict) -> WorkflowDag:
    if doc.get("format") != WORKFLOW_FORMAT:
        raise ParseError(f"expected format {WORKFLOW_FORMAT!r}, got {doc.get('format')!r}")
    if doc.get("version") != WORKFLOW_VERSION:
        raise ParseError(f"unsupported workflow version {doc.get('version')!r}")
    feature_names = list(doc.get("trace_features", []))
    tasks = []
    for i, entry in enumerate(doc.get("tasks", [])):
        try:
            requests = {CPUS: float(entry.get("cpus", 0)), MEMORY: int(entry.get("memory_bytes", 0))}
            requests.update(entry.get("resources", {}))
            feats = entry.get("features", {})
            unknown = set(feats) - set(feature_names)
            if unknown:
                raise ParseError(f"unknown feature fields {sorted(unknown)}", row=i, column="features")
            tasks.append(TaskDescriptor(
                id=str(entry["id"]),
                resource_requests=requests,
                avg_historical_runtime=entry.get("avg_runtime_s"),
                trace_features=[float(feats[name]) for name in feature_names],
            ))
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", row=i) from None
    edges = {}
    for i, entry in enumerate(doc.get("edges", [])):
        pair = (str(entry["from"]), str(entry["to"]))
        if pair in edges:
            raise ParseError(f"duplicate edge {pair[0]} -> {pair[1]}", row=i)
        edges[pair] = float(entry.get("data_volume_bytes", 0))
    return WorkflowDag(tasks, edges, name=doc.get("name", "workflow"), feature_names=feature_names)


def load_workflow(path) -> WorkflowDag:
    with open(path) as fh:
        return workflow_from_dict(json.load(fh))


def save_workflow(dag: WorkflowDag, path) -> None:
    Path(path).write_text(json.dumps(workflow_to_dict(dag), indent=1) + "\n")
