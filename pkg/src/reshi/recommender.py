"""Per-task node ranking: allocatable-node filter, model scoring and priority lists."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .domain import CPUS, MEMORY, Cluster, TaskDescriptor
from .errors import DimensionMismatch, IncompatibleModel, NoAllocatableNode, ParseError
from .profiling import (
    TARGET_NORMALIZED,
    TaskTraceRecord,
    build_training_set,
    task_catalog_from_traces,
)
from .tree import RegressionTree, TreeParams, train

MODEL_FORMAT = "reshi-model"
MODEL_VERSION = 1


@dataclass
class RecommenderModel:
    tree: RegressionTree
    task_feature_names: tuple[str, ...]
    node_feature_names: tuple[str, ...]
    orientations: tuple[bool, ...]
    target_mode: str = TARGET_NORMALIZED
    tasks: dict[str, TaskDescriptor] = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.task_feature_names) + len(self.node_feature_names)

    def check_compatible(self, cluster: Cluster) -> None:
        if tuple(cluster.benchmark_names) != self.node_feature_names:
            raise IncompatibleModel(
                f"cluster benchmarks {list(cluster.benchmark_names)} do not match "
                f"model features {list(self.node_feature_names)}"
            )
        if tuple(cluster.orientations) != self.orientations:
            raise IncompatibleModel("benchmark orientation flags differ from the model's")


def fit_model(
    traces: Sequence[TaskTraceRecord],
    metric_names: Sequence[str],
    profiled_cluster: Cluster,
    task_catalog: Mapping[str, TaskDescriptor] | None = None,
    target: str = TARGET_NORMALIZED,
    params: TreeParams | None = None,
    seed: int = 0,
) -> RecommenderModel:
    if task_catalog is None:
        task_catalog = task_catalog_from_traces(traces)
    data = build_training_set(traces, profiled_cluster, task_catalog, target=target)
    tree = train(data.X, data.targets, params, seed=seed)
    return RecommenderModel(
        tree=tree,
        task_feature_names=tuple(metric_names),
        node_feature_names=tuple(profiled_cluster.benchmark_names),
        orientations=tuple(profiled_cluster.orientations),
        target_mode=target,
        tasks=dict(task_catalog),
    )


def _blocking_resource(node, task: TaskDescriptor) -> str | None:
    for kind, qty in sorted(task.resource_requests.items()):
        if node.capacity(kind) < qty:
            return kind
    return None


def filter_allocatable(cluster: Cluster, task: TaskDescriptor) -> set[str]:
    """Nodes whose total capacity covers every resource the task requests."""
    return {n.id for n in cluster.nodes if _blocking_resource(n, task) is None}


@dataclass(frozen=True)
class PriorityList:
    node_ids: tuple[str, ...]
    scores: tuple[float, ...]

    def __iter__(self):
        return iter(self.node_ids)

    def __len__(self):
        return len(self.node_ids)

    def __getitem__(self, i):
        return self.node_ids[i]


def rank_nodes(model, task: TaskDescriptor, profiled_cluster: Cluster) -> PriorityList:
    """Score every allocatable node for ``task``; lowest predicted score first.

    ``model`` may be a bare RegressionTree or a RecommenderModel.
    """
    tree = model.tree if isinstance(model, RecommenderModel) else model
    allocatable = filter_allocatable(profiled_cluster, task)
    if not allocatable:
        kinds = [_blocking_resource(n, task) for n in profiled_cluster.nodes]
        raise NoAllocatableNode(task.id, min(k for k in kinds if k))
    nodes = [n for n in profiled_cluster.nodes if n.id in allocatable]
    if any(n.benchmark_ranks is None for n in nodes):
        raise IncompatibleModel("cluster must be rank-normalised before ranking")
    width = len(task.trace_features) + len(nodes[0].benchmark_ranks)
    if width != tree.n_features:
        raise DimensionMismatch(f"feature vector has length {width}, model expects {tree.n_features}")
    X = np.array([list(task.trace_features) + list(n.benchmark_ranks) for n in nodes], dtype=np.float64)
    scores = tree.predict(X)
    order = sorted(range(len(nodes)), key=lambda i: (scores[i], nodes[i].id))
    return PriorityList(
        tuple(nodes[i].id for i in order),
        tuple(float(scores[i]) for i in order),
    )


# -- persistence -------------------------------------------------------------

def _task_to_dict(t: TaskDescriptor) -> dict:
    return {
        "id": t.id,
        "resource_requests": dict(t.resource_requests),
        "avg_historical_runtime": t.avg_historical_runtime,
        "trace_features": list(t.trace_features),
    }


def model_to_dict(model: RecommenderModel) -> dict:
    p = model.tree.params
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "target": model.target_mode,
        "seed": model.tree.seed,
        "hyperparameters": {
            "max_depth": p.max_depth,
            "min_samples_leaf": p.min_samples_leaf,
            "min_variance_reduction": p.min_variance_reduction,
        },
        "task_features": list(model.task_feature_names),
        "node_features": list(model.node_feature_names),
        "orientations": ["higher" if o else "lower" for o in model.orientations],
        "tasks": [_task_to_dict(model.tasks[k]) for k in sorted(model.tasks)],
        "tree": model.tree.to_dict(),
    }


def model_from_dict(doc: dict) -> RecommenderModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ParseError(f"expected format {MODEL_FORMAT!r}, got {doc.get('format')!r}")
    if doc.get("version") != MODEL_VERSION:
        raise ParseError(f"unsupported model version {doc.get('version')!r}")
    params = TreeParams(**doc["hyperparameters"])
    tree = RegressionTree.from_dict(doc["tree"], params, doc.get("seed", 0))
    task_names = tuple(doc["task_features"])
    node_names = tuple(doc["node_features"])
    if tree.n_features != len(task_names) + len(node_names):
        raise ParseError("tree dimensionality does not match declared feature names")
    tasks = {}
    for entry in doc.get("tasks", []):
        tasks[entry["id"]] = TaskDescriptor(
            id=entry["id"],
            resource_requests=entry.get("resource_requests", {CPUS: 0, MEMORY: 0}),
            avg_historical_runtime=entry.get("avg_historical_runtime"),
            trace_features=entry.get("trace_features", ()),
        )
    return RecommenderModel(
        tree=tree,
        task_feature_names=task_names,
        node_feature_names=node_names,
        orientations=tuple(o == "higher" for o in doc["orientations"]),
        target_mode=doc["target"],
        tasks=tasks,
    )


def save_model(model: RecommenderModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> RecommenderModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
