"""Random cluster generation, scheduler sweeps and makespan aggregation."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import Cluster, NodeProfile, RuntimeMatrix, WorkflowDag, load_workflow
from .errors import EmptyCatalog, EmptyCell, ReshiError, ValidationError
from .profiling import TARGET_NORMALIZED, load_profiles, load_traces, rank_features
from .recommender import RecommenderModel, fit_model
from .schedulers import STRATEGY_NAMES
from .simulator import DISTRIBUTIONS, PredictionErrorModel, load_runtimes, simulate
from .tree import TreeParams

log = logging.getLogger(__name__)

PLAN_FORMAT = "reshi-plan"
PLAN_VERSION = 1

# row order used in reports
STRATEGY_ORDER = ("heft", "reshi-c", "reshi-m", "minmin", "rr")


def generate_clusters(catalog: Cluster, cluster_count: int, nodes_per_cluster: int, seed: int) -> list[Cluster]:
    """Draw machine types uniformly with replacement; node ids are ``c{k}-n{j}``.

    Nodes keep the scores and ranks of their catalog entry, so ranks are
    relative to the whole catalog.
    """
    if catalog is None or len(catalog.nodes) == 0:
        raise EmptyCatalog("machine catalog is empty")
    if cluster_count < 1 or nodes_per_cluster < 1:
        raise ValidationError("cluster_count and nodes_per_cluster must be >= 1")
    entries = sorted(catalog.nodes, key=lambda n: n.machine_type)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x636C]))
    picks = rng.integers(0, len(entries), size=(cluster_count, nodes_per_cluster))
    clusters = []
    for k in range(cluster_count):
        nodes = tuple(
            NodeProfile(
                id=f"c{k}-n{j}",
                machine_type=entries[i].machine_type,
                capacities=entries[i].capacities,
                benchmark_scores=entries[i].benchmark_scores,
                benchmark_ranks=entries[i].benchmark_ranks,
            )
            for j, i in enumerate(picks[k])
        )
        clusters.append(Cluster(nodes, catalog.benchmark_names, catalog.orientations))
    return clusters


def error_seed(master: int, cluster_index: int, strategy: str, err: float) -> int:
    ss = np.random.SeedSequence([master, cluster_index, zlib.crc32(strategy.encode()), int(round(err * 1e6))])
    return int(ss.generate_state(1)[0])


# -- plan --------------------------------------------------------------------

@dataclass
class WorkflowEntry:
    name: str
    dag: str
    runtimes: str
    traces: str


@dataclass
class ExperimentPlan:
    workflows: list[WorkflowEntry]
    catalog: str
    cluster_count: int = 200
    nodes_per_cluster: int = 40
    strategies: list[str] = field(default_factory=lambda: list(STRATEGY_ORDER))
    distributions: list[str] = field(default_factory=lambda: ["normal", "exponential"])
    err_levels: list[float] = field(default_factory=lambda: [0.15])
    seed: int = 0
    bandwidth: float = math.inf
    runtime_scale: float = 1.0
    target: str = TARGET_NORMALIZED
    tree: TreeParams = field(default_factory=TreeParams)
    base_dir: Path = Path(".")

    def validate(self) -> None:
        if not self.workflows:
            raise ValidationError("plan lists no workflows")
        if not self.strategies:
            raise ValidationError("plan lists no strategies")
        for s in self.strategies:
            if s not in STRATEGY_NAMES:
                raise ValidationError(f"unknown strategy {s!r}")
        if not self.distributions:
            raise ValidationError("plan lists no error distributions")
        for d in self.distributions:
            if d not in DISTRIBUTIONS:
                raise ValidationError(f"unknown distribution {d!r}")
        if not self.err_levels or any(e < 0 for e in self.err_levels):
            raise ValidationError("err_levels must be nonempty and >= 0")
        if self.cluster_count < 1 or self.nodes_per_cluster < 1:
            raise ValidationError("cluster_count and nodes_per_cluster must be >= 1")

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p


def plan_from_dict(doc: dict, base_dir=".") -> ExperimentPlan:
    if doc.get("format") != PLAN_FORMAT or doc.get("version") != PLAN_VERSION:
        raise ValidationError(f"plan must declare format {PLAN_FORMAT!r} version {PLAN_VERSION}")
    tree = TreeParams(**doc.get("tree", {}))
    plan = ExperimentPlan(
        workflows=[WorkflowEntry(**w) for w in doc["workflows"]],
        catalog=doc["catalog"],
        cluster_count=doc.get("cluster_count", 200),
        nodes_per_cluster=doc.get("nodes_per_cluster", 40),
        strategies=list(doc.get("strategies", STRATEGY_ORDER)),
        distributions=list(doc.get("distributions", ["normal", "exponential"])),
        err_levels=[float(e) for e in doc.get("err_levels", [0.15])],
        seed=int(doc.get("seed", 0)),
        bandwidth=float(doc.get("bandwidth", math.inf) or math.inf),
        runtime_scale=float(doc.get("runtime_scale", 1.0)),
        target=doc.get("target", TARGET_NORMALIZED),
        tree=tree,
        base_dir=Path(base_dir),
    )
    plan.validate()
    return plan


def load_plan(path) -> ExperimentPlan:
    path = Path(path)
    return plan_from_dict(json.loads(path.read_text()), base_dir=path.parent)


# -- sweep -------------------------------------------------------------------

@dataclass
class PreparedWorkflow:
    name: str
    dag: WorkflowDag
    runtimes: RuntimeMatrix
    model: RecommenderModel


@dataclass(frozen=True)
class RunRecord:
    workflow: str
    cluster: int
    strategy: str
    distribution: str
    err: float
    makespan: float | None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.makespan is not None


def prepare_workflows(plan: ExperimentPlan, profiled_catalog: Cluster) -> list[PreparedWorkflow]:
    prepared = []
    for entry in plan.workflows:
        dag = load_workflow(plan.resolve(entry.dag))
        runtimes = load_runtimes(plan.resolve(entry.runtimes))
        if plan.runtime_scale != 1.0:
            runtimes = runtimes.scaled(plan.runtime_scale)
        traces, metric_names = load_traces(plan.resolve(entry.traces))
        model = fit_model(traces, metric_names, profiled_catalog, dag.tasks, target=plan.target, params=plan.tree,
                          seed=plan.seed)
        prepared.append(PreparedWorkflow(entry.name, dag, runtimes, model))
    return prepared


def _run_cell(plan: ExperimentPlan, wf: PreparedWorkflow, k: int, cluster: Cluster) -> list[RunRecord]:
    out = []
    for strategy in plan.strategies:
        for dist in plan.distributions:
            for err in plan.err_levels:
                em = PredictionErrorModel(dist, err, error_seed(plan.seed, k, strategy, err))
                try:
                    res = simulate(wf.dag, cluster, strategy, wf.runtimes, em, model=wf.model,
                                   bandwidth=plan.bandwidth)
                    out.append(RunRecord(wf.name, k, strategy, dist, err, res.makespan))
                except ReshiError as exc:
                    out.append(RunRecord(wf.name, k, strategy, dist, err, None, f"{exc.code}: {exc}"))
    return out


_WORKER: dict = {}


def _init_worker(plan, prepared, clusters):
    _WORKER.update(plan=plan, prepared=prepared, clusters=clusters)


def _worker_cell(args):
    w, k = args
    return _run_cell(_WORKER["plan"], _WORKER["prepared"][w], k, _WORKER["clusters"][k])


def run_sweep(plan: ExperimentPlan, jobs: int = 1, prepared: Sequence[PreparedWorkflow] | None = None,
              catalog: Cluster | None = None) -> list[RunRecord]:
    """One record per (workflow, cluster, strategy, distribution, err), failures included."""
    plan.validate()
    if catalog is None:
        catalog = load_profiles(plan.resolve(plan.catalog))
    profiled = catalog if catalog.is_profiled else rank_features(catalog)
    if prepared is None:
        prepared = prepare_workflows(plan, profiled)
    clusters = generate_clusters(profiled, plan.cluster_count, plan.nodes_per_cluster, plan.seed)
    cells = [(w, k) for w in range(len(prepared)) for k in range(len(clusters))]
    if jobs > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(plan, list(prepared), clusters)) as pool:
            chunks = list(pool.map(_worker_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        chunks = [_run_cell(plan, prepared[w], k, clusters[k]) for w, k in cells]
    records = [r for chunk in chunks for r in chunk]
    failures = [r for r in records if not r.ok]
    if failures:
        log.warning("%d of %d runs failed; first: %s", len(failures), len(records), failures[0].error)
    return records


RESULT_COLUMNS = ["workflow", "cluster", "strategy", "distribution", "err", "makespan_s", "error"]


def save_records(records: Sequence[RunRecord], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in records:
        w.writerow([r.workflow, r.cluster, r.strategy, r.distribution, repr(r.err),
                    "" if r.makespan is None else repr(r.makespan), r.error])
    Path(path).write_text(buf.getvalue())


def load_records(path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            RunRecord(row["workflow"], int(row["cluster"]), row["strategy"], row["distribution"],
                      float(row["err"]), float(row["makespan_s"]) if row["makespan_s"] else None, row["error"])
            for row in reader
        ]


# -- aggregation -------------------------------------------------------------

def nearest_rank(sorted_values: Sequence[float], p: float) -> float:
    """Value at 1-based index ceil(p * n) of an ascending sample."""
    n = len(sorted_values)
    if n == 0:
        raise EmptyCell("no values")
    idx = max(1, math.ceil(p * n - 1e-9))
    return sorted_values[idx - 1]


def relative_change(value: float, best_mean: float) -> float:
    return (value / best_mean - 1.0) * 100.0


@dataclass(frozen=True)
class ReportRow:
    workflow: str
    distribution: str
    err: float
    strategy: str
    n: int
    mean: float
    p90: float
    p95: float
    max: float
    mean_pct: float
    p90_pct: float
    p95_pct: float
    max_pct: float


@dataclass
class AggregateReport:
    rows: list[ReportRow]

    def cell(self, workflow: str, distribution: str, err: float) -> list[ReportRow]:
        return [r for r in self.rows if (r.workflow, r.distribution, r.err) == (workflow, distribution, err)]

    def row(self, workflow, distribution, err, strategy) -> ReportRow:
        for r in self.cell(workflow, distribution, err):
            if r.strategy == strategy:
                return r
        raise KeyError((workflow, distribution, err, strategy))


def _strategy_key(name: str):
    return (STRATEGY_ORDER.index(name) if name in STRATEGY_ORDER else len(STRATEGY_ORDER), name)


def aggregate(records: Sequence[RunRecord]) -> AggregateReport:
    """Mean, nearest-rank p90/p95 and max per strategy in each (workflow, distribution, err) cell.

    Relative columns are percentages against the lowest mean in the cell.
    """
    groups: dict[tuple, dict[str, list[float]]] = {}
    for r in records:
        if not r.ok:
            continue
        groups.setdefault((r.workflow, r.distribution, r.err), {}).setdefault(r.strategy, []).append(r.makespan)
    if not groups:
        raise EmptyCell("no successful runs to aggregate")
    rows = []
    for key in sorted(groups):
        per_strategy = groups[key]
        stats = {}
        for s, values in per_strategy.items():
            values = sorted(values)
            if not values:
                raise EmptyCell(f"no runs for {s} in {key}")
            stats[s] = (len(values), float(np.mean(values)), nearest_rank(values, 0.90),
                        nearest_rank(values, 0.95), values[-1])
        best = min(v[1] for v in stats.values())
        for s in sorted(stats, key=_strategy_key):
            n, mean, p90, p95, mx = stats[s]
            rows.append(ReportRow(
                *key, s, n, mean, p90, p95, mx,
                relative_change(mean, best), relative_change(p90, best),
                relative_change(p95, best), relative_change(mx, best),
            ))
    return AggregateReport(rows)


REPORT_COLUMNS = ["workflow", "distribution", "err", "strategy", "n", "mean", "p90", "p95", "max",
                  "mean_pct", "p90_pct", "p95_pct", "max_pct"]


def report_to_csv(report: AggregateReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in report.rows:
        w.writerow([r.workflow, r.distribution, repr(r.err), r.strategy, r.n]
                   + [repr(getattr(r, c)) for c in REPORT_COLUMNS[5:]])
    return buf.getvalue()


def report_from_csv(text: str) -> AggregateReport:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append(ReportRow(
            row["workflow"], row["distribution"], float(row["err"]), row["strategy"], int(row["n"]),
            *(float(row[c]) for c in REPORT_COLUMNS[5:]),
        ))
    return AggregateReport(rows)


def report_to_markdown(report: AggregateReport) -> str:
    lines = []
    cells: dict[tuple, list[ReportRow]] = {}
    for r in report.rows:
        cells.setdefault((r.workflow, r.distribution, r.err), []).append(r)
    for (wf, dist, err), rows in cells.items():
        lines.append(f"### {wf}, {dist} error, err={err:g}")
        lines.append("")
        lines.append("| Strategy | Mean % | 90p % | 95p % | Max % | Mean (s) |")
        lines.append("|---|---:|---:|---:|---:|---:|")
        for r in rows:
            lines.append(f"| {r.strategy} | {r.mean_pct:.2f} | {r.p90_pct:.2f} | {r.p95_pct:.2f} "
                         f"| {r.max_pct:.2f} | {r.mean:.1f} |")
        lines.append("")
    return "\n".join(lines)


def report_series(report: AggregateReport) -> dict:
    """Plot-ready: workflow -> distribution -> strategy -> metric -> list aligned with ``err``."""
    out: dict = {}
    for r in report.rows:
        s = out.setdefault(r.workflow, {}).setdefault(r.distribution, {}).setdefault(
            r.strategy, {"err": [], "mean": [], "p90": [], "p95": [], "max": []})
        s["err"].append(r.err)
        for k in ("mean", "p90", "p95", "max"):
            s[k].append(getattr(r, k))
    return out


def emit_report(report: AggregateReport, path, fmt: str = "csv") -> Path:
    if not report.rows:
        raise EmptyCell("report is empty")
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "md":
        text = report_to_markdown(report)
    elif fmt == "json":
        text = json.dumps(report_series(report), indent=1, sort_keys=True) + "\n"
    else:
        raise ValidationError(f"unknown report format {fmt!r}")
    path = Path(path)
    path.write_text(text)
    return path


def parse_report(path) -> AggregateReport:
    return report_from_csv(Path(path).read_text())
