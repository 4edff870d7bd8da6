"""Dispatch strategies: Round-Robin, MinMin, HEFT, Reshi-C and Reshi-M.

Dynamic strategies are asked for one ``(task, node)`` decision at a time by
the simulator, at time zero and after every completion, until they return
None. HEFT computes a full static plan in :meth:`Heft.prepare` and then
replays it: a ready task is dispatched to its planned node as soon as that
node has room, in plan order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .domain import Cluster, WorkflowDag, topological_order
from .errors import (
    MissingHistoricalRuntime,
    MissingPrediction,
    NoFit,
    SchedulerError,
    ValidationError,
)
from .recommender import PriorityList, RecommenderModel, rank_nodes

Oracle = Callable[[str, str], float]

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    """Seconds to integer microseconds, never below 1."""
    return max(1, int(round(seconds * US_PER_S)))


def comm_us(volume: float, bandwidth: float) -> int:
    if volume <= 0 or math.isinf(bandwidth):
        return 0
    return int(round(volume / bandwidth * US_PER_S))


class ClusterState:
    """Free capacity per node, in the resource kinds the workflow requests."""

    def __init__(self, dag: WorkflowDag, cluster: Cluster):
        kinds = sorted({k for t in dag.tasks.values() for k in t.resource_requests})
        self.kinds = tuple(kinds)
        self.node_ids = sorted(cluster.node_ids)
        self.capacity = {n.id: tuple(n.capacity(k) for k in kinds) for n in cluster.nodes}
        self.free = {nid: list(cap) for nid, cap in self.capacity.items()}
        self.requests = {tid: tuple(t.request(k) for k in kinds) for tid, t in dag.tasks.items()}
        self.resident: dict[str, set[str]] = {nid: set() for nid in self.node_ids}

    def fits(self, task_id: str, node_id: str) -> bool:
        free = self.free[node_id]
        return all(r <= f for r, f in zip(self.requests[task_id], free))

    def fits_statically(self, task_id: str, node_id: str) -> bool:
        return all(r <= c for r, c in zip(self.requests[task_id], self.capacity[node_id]))

    def static_nodes(self, task_id: str) -> list[str]:
        return [n for n in self.node_ids if self.fits_statically(task_id, n)]

    def allocate(self, task_id: str, node_id: str) -> None:
        if not self.fits(task_id, node_id):
            raise SchedulerError(f"task {task_id!r} does not fit on node {node_id!r}")
        free = self.free[node_id]
        for i, r in enumerate(self.requests[task_id]):
            free[i] -= r
        self.resident[node_id].add(task_id)

    def release(self, task_id: str, node_id: str) -> None:
        free = self.free[node_id]
        for i, r in enumerate(self.requests[task_id]):
            free[i] += r
        self.resident[node_id].discard(task_id)
        cap = self.capacity[node_id]
        if not self.resident[node_id]:
            # snap back to exact capacity; float requests may not cancel exactly
            self.free[node_id] = list(cap)


class Strategy:
    name = "strategy"
    uses_predictions = False

    def prepare(self, dag: WorkflowDag, cluster: Cluster, state: ClusterState) -> None:
        pass

    def next_decision(self, ready: Sequence[str], state: ClusterState) -> tuple[str, str] | None:
        raise NotImplementedError


class RoundRobin(Strategy):
    """Head of the FIFO ready queue goes to the next node, in id order, that has room."""

    name = "rr"

    def __init__(self):
        self.pointer = 0
        self.nodes: list[str] = []

    def prepare(self, dag, cluster, state):
        self.nodes = list(state.node_ids)
        self.pointer = 0
        for tid in sorted(dag.tasks):
            if not state.static_nodes(tid):
                raise NoFit(f"task {tid!r} fits on no node in the cluster")

    def next_decision(self, ready, state):
        if not ready:
            return None
        head = ready[0]
        n = len(self.nodes)
        for step in range(n):
            idx = (self.pointer + step) % n
            if state.fits(head, self.nodes[idx]):
                self.pointer = (idx + 1) % n
                return head, self.nodes[idx]
        return None


class MinMin(Strategy):
    """Ready task with the smallest best-case predicted runtime, on that fastest fitting node."""

    name = "minmin"
    uses_predictions = True

    def __init__(self, oracle: Oracle):
        self.oracle = oracle
        self.candidates: dict[str, list[tuple[float, str]]] = {}

    def prepare(self, dag, cluster, state):
        self.candidates = {}
        for tid in dag.tasks:
            entries = []
            for nid in state.static_nodes(tid):
                try:
                    entries.append((float(self.oracle(tid, nid)), nid))
                except KeyError:
                    raise MissingPrediction(f"no prediction for task {tid!r} on node {nid!r}") from None
            entries.sort()
            self.candidates[tid] = entries

    def next_decision(self, ready, state):
        best = None
        for tid in ready:
            for pred, nid in self.candidates[tid]:
                if state.fits(tid, nid):
                    key = (pred, tid, nid)
                    if best is None or key < best:
                        best = key
                    break
        if best is None:
            return None
        return best[1], best[2]


@dataclass(frozen=True)
class HeftPlan:
    """Static plan in integer microseconds; ``order`` is the upward-rank processing order."""

    assignment: dict[str, tuple[str, int, int]]
    order: tuple[str, ...]
    upward_rank: dict[str, float]

    @property
    def makespan_us(self) -> int:
        return max(f for _, _, f in self.assignment.values())

    @property
    def makespan(self) -> float:
        return self.makespan_us / US_PER_S

    def node_of(self, task_id: str) -> str:
        return self.assignment[task_id][0]


def _window_fits(intervals, start, end, req, cap) -> bool:
    points = [start] + [s for s, _, _ in intervals if start < s < end]
    for p in points:
        used = [0.0] * len(req)
        for s, e, r in intervals:
            if s <= p < e:
                for i, x in enumerate(r):
                    used[i] += x
        if any(u + x > c for u, x, c in zip(used, req, cap)):
            return False
    return True


def earliest_start(intervals, ready: int, duration: int, req, cap) -> int:
    """Earliest start >= ready at which ``req`` fits on the node for ``duration``.

    Candidate starts are the ready time and every later interval end, which
    lets a task slip into an idle or partially used gap.
    """
    candidates = sorted({ready} | {e for _, e, _ in intervals if e > ready})
    for s in candidates:
        if _window_fits(intervals, s, s + duration, req, cap):
            return s
    raise SchedulerError("no feasible start; request exceeds node capacity")


def heft_plan(dag: WorkflowDag, cluster: Cluster, oracle: Oracle, bandwidth: float = math.inf,
              state: ClusterState | None = None) -> HeftPlan:
    if not bandwidth > 0:
        if any(v > 0 for v in dag.edges.values()):
            raise ValidationError("bandwidth must be > 0 when edges carry data")
        bandwidth = math.inf
    state = state or ClusterState(dag, cluster)
    fitting: dict[str, list[str]] = {}
    cost: dict[str, dict[str, int]] = {}
    for tid in dag.tasks:
        nodes = state.static_nodes(tid)
        if not nodes:
            raise NoFit(f"task {tid!r} fits on no node in the cluster")
        fitting[tid] = nodes
        try:
            cost[tid] = {nid: to_us(oracle(tid, nid)) for nid in nodes}
        except KeyError:
            raise MissingPrediction(f"missing prediction for task {tid!r}") from None

    rank: dict[str, float] = {}
    for tid in reversed(topological_order(dag)):
        mean_cost = sum(cost[tid].values()) / len(cost[tid])
        tail = max(
            (comm_us(dag.data_volume(tid, c), bandwidth) + rank[c] for c in dag.children(tid)),
            default=0.0,
        )
        rank[tid] = mean_cost + tail
    order = sorted(dag.tasks, key=lambda t: (-rank[t], t))

    timelines: dict[str, list[tuple[int, int, tuple]]] = {nid: [] for nid in state.node_ids}
    assignment: dict[str, tuple[str, int, int]] = {}
    for tid in order:
        req = state.requests[tid]
        best = None
        for nid in fitting[tid]:
            ready = 0
            for p in dag.parents(tid):
                pnode, _, pfinish = assignment[p]
                delay = 0 if pnode == nid else comm_us(dag.data_volume(p, tid), bandwidth)
                ready = max(ready, pfinish + delay)
            dur = cost[tid][nid]
            start = earliest_start(timelines[nid], ready, dur, req, state.capacity[nid])
            key = (start + dur, nid)
            if best is None or key < best:
                best = key
                choice = (nid, start, start + dur)
        assignment[tid] = choice
        timelines[choice[0]].append((choice[1], choice[2], req))
    return HeftPlan(assignment, tuple(order), rank)


class Heft(Strategy):
    name = "heft"
    uses_predictions = True

    def __init__(self, oracle: Oracle, bandwidth: float = math.inf):
        self.oracle = oracle
        self.bandwidth = bandwidth
        self.plan: HeftPlan | None = None
        self.position: dict[str, int] = {}

    def prepare(self, dag, cluster, state):
        self.plan = heft_plan(dag, cluster, self.oracle, self.bandwidth, state)
        self.position = {t: i for i, t in enumerate(self.plan.order)}

    def next_decision(self, ready, state):
        for tid in sorted(ready, key=self.position.__getitem__):
            nid = self.plan.node_of(tid)
            if state.fits(tid, nid):
                return tid, nid
        return None


class _ReshiBase(Strategy):
    """Orders the ready queue by a task priority and walks each task's node priority list."""

    def __init__(self, model: RecommenderModel):
        self.model = model
        self.priority: dict[str, PriorityList] = {}
        self.key: dict[str, tuple] = {}

    def task_key(self, dag: WorkflowDag, tid: str) -> tuple:
        raise NotImplementedError

    def prepare(self, dag, cluster, state):
        self.key = {tid: self.task_key(dag, tid) for tid in dag.tasks}
        self.priority = {tid: rank_nodes(self.model, dag.task(tid), cluster) for tid in sorted(dag.tasks)}

    def next_decision(self, ready, state):
        for tid in sorted(ready, key=self.key.__getitem__):
            for nid in self.priority[tid].node_ids:
                if state.fits(tid, nid):
                    return tid, nid
        return None


class ReshiC(_ReshiBase):
    name = "reshi-c"

    def task_key(self, dag, tid):
        return (-len(dag.children(tid)), tid)


class ReshiM(_ReshiBase):
    name = "reshi-m"

    def task_key(self, dag, tid):
        avg = dag.task(tid).avg_historical_runtime
        if avg is None:
            raise MissingHistoricalRuntime(f"task {tid!r} has no historical runtime")
        return (-avg, tid)


STRATEGY_NAMES = ("rr", "minmin", "heft", "reshi-c", "reshi-m")
NEEDS_ORACLE = {"minmin", "heft"}
NEEDS_MODEL = {"reshi-c", "reshi-m"}


def make_strategy(name: str, *, oracle: Oracle | None = None, model: RecommenderModel | None = None,
                  bandwidth: float = math.inf) -> Strategy:
    """Build a strategy, enforcing that it gets exactly the input it reads."""
    if name not in STRATEGY_NAMES:
        raise ValidationError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGY_NAMES)}")
    if name in NEEDS_ORACLE and oracle is None:
        raise ValidationError(f"{name} needs a runtime oracle")
    if name in NEEDS_MODEL and model is None:
        raise ValidationError(f"{name} needs a recommender model")
    if name in NEEDS_ORACLE and model is not None:
        raise ValidationError(f"{name} reads predicted runtimes, not a recommender model")
    if name not in NEEDS_ORACLE and oracle is not None:
        raise ValidationError(f"{name} must not be given predicted runtimes")
    if name == "rr":
        return RoundRobin()
    if name == "minmin":
        return MinMin(oracle)
    if name == "heft":
        return Heft(oracle, bandwidth)
    if name == "reshi-c":
        return ReshiC(model)
    return ReshiM(model)
