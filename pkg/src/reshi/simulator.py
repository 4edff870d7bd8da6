"""Discrete-event workflow execution.

Schedulers see error-injected runtime predictions; the engine always bills
the true runtime from the runtime matrix. Time is kept in integer
microseconds.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import Cluster, RuntimeMatrix, WorkflowDag
from .errors import (
    Deadlock,
    MissingRuntime,
    NonPositiveRuntime,
    ParseError,
    SchedulerError,
    ValidationError,
)
from .formats import fmt_float, parse_float, read_versioned_csv, write_versioned_csv
from .recommender import RecommenderModel
from .schedulers import (
    NEEDS_MODEL,
    NEEDS_ORACLE,
    US_PER_S,
    ClusterState,
    Strategy,
    comm_us,
    make_strategy,
    to_us,
)

RUNTIMES_FORMAT = "reshi-runtimes"

NONE = "none"
NORMAL = "normal"
EXPONENTIAL = "exponential"
DISTRIBUTIONS = (NONE, NORMAL, EXPONENTIAL)

CLAMP_FLOOR = 0.001


@dataclass(frozen=True)
class PredictionErrorModel:
    distribution: str = NONE
    err: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValidationError(f"unknown error distribution {self.distribution!r}")
        if not self.err >= 0:
            raise ValidationError("err must be >= 0")

    @property
    def is_identity(self) -> bool:
        return self.distribution == NONE or self.err == 0


def perturb(r, x, sign, err):
    """``r * (1 + sign * x * err)``, floored at ``0.001 * r``. Works elementwise on arrays."""
    return np.maximum(r * (1 + sign * x * err), CLAMP_FLOOR * r)


def draw_factors(distribution: str, size: int, rng: np.random.Generator):
    """Magnitudes x ~ N(1, 0.5) or Exp(1), and fair random signs."""
    if distribution == NORMAL:
        x = rng.normal(1.0, 0.5, size)
    elif distribution == EXPONENTIAL:
        x = rng.exponential(1.0, size)
    else:
        x = np.zeros(size)
    signs = rng.integers(0, 2, size) * 2 - 1
    return x, signs


def draw_predictions(true, model: PredictionErrorModel, rng: np.random.Generator) -> np.ndarray:
    """Error-injected predictions for an array of true runtimes.

    A draw that would put the prediction at or below ``0.001 * r`` is redrawn
    rather than clamped: clamping maps every such pair to a value ordered
    like the true runtimes, which hands the scheduler exact ground truth.
    """
    true = np.asarray(true, dtype=np.float64)
    if model.is_identity:
        return true.copy()
    x, signs = draw_factors(model.distribution, true.size, rng)
    factor = 1 + signs * x * model.err
    bad = np.flatnonzero(factor <= CLAMP_FLOOR)
    while bad.size:
        x2, s2 = draw_factors(model.distribution, bad.size, rng)
        factor[bad] = 1 + s2 * x2 * model.err
        bad = bad[factor[bad] <= CLAMP_FLOOR]
    return true * factor


def inject_error(r: float, model: PredictionErrorModel, stream: np.random.Generator) -> float:
    if not r > 0:
        raise NonPositiveRuntime(f"runtime must be > 0, got {r}")
    return float(draw_predictions(np.array([r]), model, stream)[0])


def lookup_runtime(matrix: RuntimeMatrix, task_id: str, machine_type: str) -> float:
    try:
        return matrix[(task_id, machine_type)]
    except KeyError:
        raise MissingRuntime(task_id, machine_type) from None


class PredictionTable:
    """Predicted runtime for every (task, node) pair, drawn once per simulation.

    Draws happen in sorted (task id, node id) order so the table depends only
    on the inputs and the seed, never on the order a scheduler asks.
    """

    def __init__(self, dag: WorkflowDag, cluster: Cluster, matrix: RuntimeMatrix,
                 model: PredictionErrorModel):
        pairs = [(t, n.id, n.machine_type) for t in dag.task_ids for n in sorted(cluster.nodes, key=lambda n: n.id)]
        true = np.array([lookup_runtime(matrix, t, m) for t, _, m in pairs], dtype=np.float64)
        predicted = draw_predictions(true, model, np.random.default_rng(model.seed))
        self._values = {(t, n): float(p) for (t, n, _), p in zip(pairs, predicted)}

    def __call__(self, task_id: str, node_id: str) -> float:
        return self._values[(task_id, node_id)]


COMPLETION = 0
DISPATCH = 1


class EventQueue:
    """Events pop in time order; at equal times completions precede dispatch rounds,
    then ascending task id."""

    def __init__(self):
        self._heap: list[tuple[int, int, str, str]] = []

    def push(self, time: int, kind: int, task_id: str = "", node_id: str = "") -> None:
        heapq.heappush(self._heap, (time, kind, task_id, node_id))

    def pop(self):
        return heapq.heappop(self._heap)

    def __bool__(self):
        return bool(self._heap)


@dataclass(frozen=True)
class TaskRecord:
    node: str
    start: float
    finish: float
    true_runtime: float
    predicted_runtime: float


@dataclass
class SimulationResult:
    strategy: str
    makespan: float
    records: dict[str, TaskRecord]
    decisions: list[tuple[float, str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "makespan_s": self.makespan,
            "tasks": [
                {"id": tid, "node": r.node, "start_s": r.start, "finish_s": r.finish,
                 "true_runtime_s": r.true_runtime, "predicted_runtime_s": r.predicted_runtime}
                for tid, r in sorted(self.records.items())
            ],
            "decisions": [{"time_s": t, "task": task, "node": node} for t, task, node in self.decisions],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimulationResult":
        records = {
            e["id"]: TaskRecord(e["node"], e["start_s"], e["finish_s"], e["true_runtime_s"], e["predicted_runtime_s"])
            for e in doc["tasks"]
        }
        decisions = [(d["time_s"], d["task"], d["node"]) for d in doc["decisions"]]
        return cls(doc["strategy"], doc["makespan_s"], records, decisions)


def simulate(
    dag: WorkflowDag,
    cluster: Cluster,
    strategy: str | Strategy,
    runtimes: RuntimeMatrix,
    error_model: PredictionErrorModel | None = None,
    seed: int | None = None,
    model: RecommenderModel | None = None,
    bandwidth: float = math.inf,
) -> SimulationResult:
    """Run one workflow on one cluster. ``seed`` overrides the error model's seed."""
    error_model = error_model or PredictionErrorModel()
    if seed is not None:
        error_model = PredictionErrorModel(error_model.distribution, error_model.err, seed)
    machine_types = cluster.machine_types
    for pair in runtimes.missing(dag.task_ids, machine_types):
        raise MissingRuntime(*pair)

    predictions = PredictionTable(dag, cluster, runtimes, error_model)
    if isinstance(strategy, str):
        strategy = make_strategy(
            strategy,
            oracle=predictions if strategy in NEEDS_ORACLE else None,
            model=model if strategy in NEEDS_MODEL else None,
            bandwidth=bandwidth,
        )

    state = ClusterState(dag, cluster)
    strategy.prepare(dag, cluster, state)
    for tid in dag.task_ids:
        if not state.static_nodes(tid):
            raise Deadlock(f"task {tid!r} fits on no node of the cluster")

    machine_of = {n.id: n.machine_type for n in cluster.nodes}
    waiting = {t: len(dag.parents(t)) for t in dag.tasks}
    ready = [t for t in dag.task_ids if waiting[t] == 0]
    pending: list[str] = []
    placed: dict[str, str] = {}
    start_us: dict[str, int] = {}
    finish_us: dict[str, int] = {}
    decisions: list[tuple[float, str, str]] = []
    running = 0

    queue = EventQueue()
    queue.push(0, DISPATCH)
    dispatch_at = {0}
    while queue:
        now, kind, tid, nid = queue.pop()
        if kind == COMPLETION:
            state.release(tid, nid)
            running -= 1
            for child in dag.children(tid):
                waiting[child] -= 1
                if waiting[child] == 0:
                    pending.append(child)
            if now not in dispatch_at:
                dispatch_at.add(now)
                queue.push(now, DISPATCH)
            continue

        dispatch_at.discard(now)
        ready.extend(sorted(pending))
        pending.clear()
        while ready:
            decision = strategy.next_decision(ready, state)
            if decision is None:
                break
            tid, nid = decision
            if tid not in ready:
                raise SchedulerError(f"{strategy.name} picked non-ready task {tid!r}")
            state.allocate(tid, nid)
            ready.remove(tid)
            data_ready = now
            for p in dag.parents(tid):
                delay = 0 if placed[p] == nid else comm_us(dag.data_volume(p, tid), bandwidth)
                data_ready = max(data_ready, finish_us[p] + delay)
            runtime = to_us(lookup_runtime(runtimes, tid, machine_of[nid]))
            placed[tid] = nid
            start_us[tid] = now
            finish_us[tid] = data_ready + runtime
            decisions.append((now / US_PER_S, tid, nid))
            queue.push(finish_us[tid], COMPLETION, tid, nid)
            running += 1
        if ready and running == 0:
            raise Deadlock(f"no progress possible; smallest waiting task is {min(ready)!r}")

    if len(finish_us) != len(dag):
        raise Deadlock("simulation ended with unfinished tasks")
    records = {
        t: TaskRecord(
            node=placed[t],
            start=start_us[t] / US_PER_S,
            finish=finish_us[t] / US_PER_S,
            true_runtime=lookup_runtime(runtimes, t, machine_of[placed[t]]),
            predicted_runtime=predictions(t, placed[t]),
        )
        for t in dag.task_ids
    }
    if records:
        makespan = (max(finish_us.values()) - min(start_us.values())) / US_PER_S
    else:
        makespan = 0.0
    return SimulationResult(strategy.name, makespan, records, decisions)


def audit(result: SimulationResult, dag: WorkflowDag, cluster: Cluster) -> list[str]:
    """Post-hoc check of precedence and per-node capacity; returns violations."""
    problems = []
    recs = result.records
    for (src, dst) in dag.edges:
        if recs[dst].start < recs[src].finish:
            problems.append(f"{dst} starts at {recs[dst].start} before {src} finishes at {recs[src].finish}")
    kinds = sorted({k for t in dag.tasks.values() for k in t.resource_requests})
    by_node: dict[str, list[str]] = {}
    for tid, r in recs.items():
        by_node.setdefault(r.node, []).append(tid)
    for nid, tids in by_node.items():
        node = cluster.node(nid)
        for t0 in sorted({recs[t].start for t in tids}):
            active = [t for t in tids if recs[t].start <= t0 < recs[t].finish]
            for k in kinds:
                used = sum(dag.task(t).request(k) for t in active)
                if used > node.capacity(k) + 1e-9:
                    problems.append(f"node {nid} over {k} capacity at t={t0}: {used} > {node.capacity(k)}")
    return problems


# -- files -------------------------------------------------------------------

def load_runtimes(path) -> RuntimeMatrix:
    header, rows = read_versioned_csv(path, RUNTIMES_FORMAT)
    if header != ["task_id", "machine_type", "runtime_s"]:
        raise ParseError("header must be task_id,machine_type,runtime_s", row=2, path=path)
    data = {}
    for line, (task, machine, value) in rows:
        runtime = parse_float(value, line, "runtime_s", path)
        if not runtime > 0:
            raise ParseError(f"non-positive runtime {runtime}", row=line, column="runtime_s", path=path)
        if (task, machine) in data:
            raise ParseError(f"duplicate entry for ({task}, {machine})", row=line, path=path)
        data[(task, machine)] = runtime
    return RuntimeMatrix(data)


def save_runtimes(matrix: RuntimeMatrix, path) -> None:
    rows = [[t, m, fmt_float(v)] for (t, m), v in sorted(matrix.items())]
    write_versioned_csv(path, RUNTIMES_FORMAT, ["task_id", "machine_type", "runtime_s"], rows)


def save_result(result: SimulationResult, path) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=1) + "\n")


def load_result(path) -> SimulationResult:
    with open(path) as fh:
        return SimulationResult.from_dict(json.load(fh))
