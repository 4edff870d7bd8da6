"""Command-line entry point: ``reshi <command> ...``.

Failures exit nonzero and print a JSON error summary on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .domain import load_workflow
from .errors import ReshiError, UnknownTask
from .experiment import (
    aggregate,
    emit_report,
    load_plan,
    load_records,
    report_to_csv,
    report_to_markdown,
    run_sweep,
    save_records,
)
from .fixtures import write_fixture_bundle
from .profiling import TARGET_NORMALIZED, TARGET_RAW, load_profiles, load_traces, rank_features
from .recommender import fit_model, load_model, rank_nodes, save_model
from .schedulers import STRATEGY_NAMES
from .simulator import DISTRIBUTIONS, PredictionErrorModel, load_runtimes, save_result, simulate
from .tree import TreeParams


def _profiled(path, orientations=None):
    cluster = load_profiles(path)
    return rank_features(cluster, orientations)


def cmd_train(args) -> dict:
    traces, metric_names = load_traces(args.traces)
    catalog = _profiled(args.profiles)
    tasks = load_workflow(args.dag).tasks if args.dag else None
    params = TreeParams(max_depth=args.max_depth, min_samples_leaf=args.min_samples_leaf)
    model = fit_model(traces, metric_names, catalog, tasks, target=args.target, params=params, seed=args.seed)
    save_model(model, args.out)
    return {"model": str(args.out), "nodes": model.tree.node_count, "depth": model.tree.depth,
            "tasks": len(model.tasks)}


def cmd_rank(args) -> dict:
    model = load_model(args.model)
    cluster = _profiled(args.profiles, model.orientations)
    model.check_compatible(cluster)
    if args.task_id not in model.tasks:
        raise UnknownTask(f"task {args.task_id!r} is not in the model's task catalog")
    plist = rank_nodes(model, model.tasks[args.task_id], cluster)
    return {"task": args.task_id, "nodes": [{"node": n, "score": s} for n, s in zip(plist.node_ids, plist.scores)]}


def cmd_simulate(args) -> dict:
    dag = load_workflow(args.dag)
    runtimes = load_runtimes(args.runtimes)
    model = load_model(args.model) if args.model else None
    cluster = _profiled(args.cluster, model.orientations if model else None)
    if model:
        model.check_compatible(cluster)
    em = PredictionErrorModel(args.dist, args.err, args.seed)
    result = simulate(dag, cluster, args.strategy, runtimes, em, model=model, bandwidth=args.bandwidth)
    if args.out:
        save_result(result, args.out)
    return {"strategy": result.strategy, "makespan_s": result.makespan, "tasks": len(result.records)}


def cmd_experiment(args) -> dict:
    plan = load_plan(args.plan)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = run_sweep(plan, jobs=args.jobs)
    save_records(records, out / "results.csv")
    report = aggregate(records)
    emit_report(report, out / "report.csv", "csv")
    emit_report(report, out / "report.md", "md")
    emit_report(report, out / "series.json", "json")
    failed = sum(not r.ok for r in records)
    return {"runs": len(records), "failed": failed, "out": str(out)}


def cmd_report(args):
    records = load_records(Path(args.indir) / "results.csv")
    report = aggregate(records)
    text = report_to_csv(report) if args.format == "csv" else report_to_markdown(report)
    sys.stdout.write(text)
    return None


def cmd_fixtures(args) -> dict:
    plan = write_fixture_bundle(args.out, samples=args.samples, seed=args.seed,
                                cluster_count=args.clusters, nodes_per_cluster=args.nodes)
    return {"plan": str(plan)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reshi", description="Workflow task placement via node rankings.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit the ranking tree on task traces")
    t.add_argument("--traces", required=True)
    t.add_argument("--profiles", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--target", choices=[TARGET_NORMALIZED, TARGET_RAW], default=TARGET_NORMALIZED)
    t.add_argument("--max-depth", type=int, default=8)
    t.add_argument("--min-samples-leaf", type=int, default=3)
    t.add_argument("--dag", help="workflow file supplying resource requests for the stored task catalog")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("rank", help="priority list of nodes for one task")
    r.add_argument("--model", required=True)
    r.add_argument("--task-id", required=True)
    r.add_argument("--profiles", required=True)
    r.set_defaults(func=cmd_rank)

    s = sub.add_parser("simulate", help="run one workflow on one cluster")
    s.add_argument("--dag", required=True)
    s.add_argument("--cluster", required=True)
    s.add_argument("--runtimes", required=True)
    s.add_argument("--strategy", choices=STRATEGY_NAMES, required=True)
    s.add_argument("--err", type=float, default=0.0)
    s.add_argument("--dist", choices=DISTRIBUTIONS, default="none")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--model", help="trained model, required by reshi-c and reshi-m")
    s.add_argument("--bandwidth", type=float, default=math.inf, help="bytes per second between nodes")
    s.add_argument("--out", help="write the full schedule as JSON")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="run a sweep described by a plan file")
    e.add_argument("--plan", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_experiment)

    rp = sub.add_parser("report", help="aggregate results.csv from an experiment directory")
    rp.add_argument("--in", dest="indir", required=True)
    rp.add_argument("--format", choices=["csv", "md"], default="md")
    rp.set_defaults(func=cmd_report)

    f = sub.add_parser("fixtures", help="write the synthetic catalog, workflows and a plan")
    f.add_argument("--out", required=True)
    f.add_argument("--samples", type=int, default=16)
    f.add_argument("--seed", type=int, default=11)
    f.add_argument("--clusters", type=int, default=200)
    f.add_argument("--nodes", type=int, default=40)
    f.set_defaults(func=cmd_fixtures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        summary = args.func(args)
    except ReshiError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "IoError", "message": str(exc)}), file=sys.stderr)
        return 1
    if summary is not None:
        print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
