"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the verdicts are
repeated in the terminal summary.
"""

import json

import numpy as np
import pytest
from scipy import integrate, stats

from reshi.cli import main
from reshi.domain import WorkflowDag
from reshi.experiment import ExperimentPlan, PreparedWorkflow, RunRecord, WorkflowEntry, aggregate, run_sweep
from reshi.fixtures import FIXTURE_TREE, synthetic_catalog, synthetic_workflow
from reshi.profiling import rank_features
from reshi.recommender import RecommenderModel, fit_model, rank_nodes
from reshi.schedulers import US_PER_S, heft_plan
from reshi.simulator import PredictionErrorModel, draw_predictions
from reshi.tree import TreeParams, train, training_mse

from _util import cluster, node, task

WORKFLOWS = ("chipseq", "eager", "viralrecon")
SEED = 2022
# E|X| for X ~ N(1, 0.5), computed by quadrature before the build
E_ABS_NORMAL = 1.0084907026185528


@pytest.fixture(scope="module")
def catalog():
    return rank_features(synthetic_catalog())


@pytest.fixture(scope="module")
def prepared(catalog):
    """The shipped fixture workflows, seeded as the bundle writer seeds them."""
    out = {}
    for i, kind in enumerate(WORKFLOWS):
        fx = synthetic_workflow(kind, catalog, samples=16, seed=11 + i)
        model = fit_model(fx.traces, fx.metric_names, catalog, fx.dag.tasks, params=FIXTURE_TREE)
        out[kind] = PreparedWorkflow(kind, fx.dag, fx.runtimes, model)
    return out


def sweep(catalog, wf, **kw):
    plan = ExperimentPlan(workflows=[WorkflowEntry(wf.name, "", "", "")], catalog="", seed=SEED, **kw)
    records = run_sweep(plan, prepared=[wf], catalog=catalog)
    assert all(r.ok for r in records), [r.error for r in records if not r.ok][:3]
    return records


def test_criterion_1_reshi_and_rr_ignore_prediction_error(catalog, prepared, criterion):
    errs = [0.0, 0.15, 0.3, 0.5]
    records = sweep(catalog, prepared["chipseq"], cluster_count=20, strategies=["reshi-c", "reshi-m", "rr"],
                    distributions=["normal", "exponential"], err_levels=errs)
    by_cell: dict[tuple, set] = {}
    for r in records:
        by_cell.setdefault((r.cluster, r.strategy), set()).add(r.makespan)
    varying = [k for k, v in by_cell.items() if len(v) != 1]
    criterion(1, not varying and len(by_cell) == 60,
              f"{len(by_cell)} (cluster, strategy) cells over 8 error settings, {len(varying)} not bit-identical")


def test_criterion_2_baselines_degrade_with_error(catalog, prepared, criterion):
    errs = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    records = sweep(catalog, prepared["chipseq"], cluster_count=50, strategies=["heft", "minmin"],
                    distributions=["exponential"], err_levels=errs)
    report = aggregate(records)
    bad, series = [], {}
    for s in ("heft", "minmin"):
        means = [report.row("chipseq", "exponential", e, s).mean for e in errs]
        series[s] = [round(m, 1) for m in means]
        bad += [(s, errs[i + 1]) for i in range(len(errs) - 1) if means[i + 1] < means[i] * (1 - 0.02)]
    criterion(2, not bad, f"chipseq exponential means {series}; steps dropping > 2%: {bad}")


def test_criterion_3_relative_change_arithmetic(criterion):
    means = {"heft": 1055.8, "reshi-c": 1000.0, "reshi-m": 1143.2, "minmin": 1087.1, "rr": 1694.1}
    expected = {"heft": 5.58, "reshi-c": 0.00, "reshi-m": 14.32, "minmin": 8.71, "rr": 69.41}
    report = aggregate([RunRecord("chipseq", 0, s, "normal", 0.15, m) for s, m in means.items()])
    got = {r.strategy: r.mean_pct for r in report.rows}
    worst = max(abs(got[s] - expected[s]) for s in expected)
    criterion(3, worst <= 0.01, f"max deviation from published relative means {worst:.4f} (tol 0.01)")


def test_criterion_4_error_model_statistics(criterion):
    e_abs, _ = integrate.quad(lambda x: abs(x) * stats.norm.pdf(x, 1.0, 0.5), -np.inf, np.inf)
    assert e_abs == pytest.approx(E_ABS_NORMAL, rel=1e-9)
    err, n = 0.15, 1_000_000
    lines, ok = [], True
    for dist, expect in (("exponential", err * 1.0), ("normal", err * E_ABS_NORMAL)):
        pred = draw_predictions(np.ones(n), PredictionErrorModel(dist, err), np.random.default_rng(SEED))
        mean = float(np.mean(np.abs(pred - 1.0)))
        rel = abs(mean / expect - 1)
        ok &= rel <= 0.015
        lines.append(f"{dist} {mean:.5f} vs {expect:.5f} ({rel:.2%})")
    criterion(4, ok, "; ".join(lines) + " (tol 1.5%)")


def replay_makespan(dag, c, durations, plan):
    """Place tasks in plan order on their planned nodes at the earliest integer second that fits."""
    finish, placed = {}, {nid: [] for nid in c.node_ids}
    for tid in plan.order:
        nid = plan.node_of(tid)
        cap = c.node(nid).capacity("cpus")
        need = dag.task(tid).request("cpus")
        d = durations[(tid, nid)]
        t = max((finish[p] for p in dag.parents(tid)), default=0)
        while True:
            if all(need + sum(r for s, e, r in placed[nid] if s <= x < e) <= cap for x in range(t, t + d)):
                break
            t += 1
        placed[nid].append((t, t + d, need))
        finish[tid] = t + d
    return max(finish.values())


def plan_is_valid(dag, c, plan):
    a = plan.assignment
    for src, dst in dag.edges:
        if a[dst][1] < a[src][2]:
            return False
    for nid in c.node_ids:
        on = [(s, f, dag.task(t).request("cpus")) for t, (n, s, f) in a.items() if n == nid]
        for s0, _, _ in on:
            if sum(r for s, f, r in on if s <= s0 < f) > c.node(nid).capacity("cpus"):
                return False
    return True


def test_criterion_5_heft_matches_brute_force_replay(criterion):
    rng = np.random.default_rng(SEED)
    matches = valid = 0
    for _ in range(100):
        n_tasks, n_nodes = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        ids = [f"t{i}" for i in range(n_tasks)]
        edges = [(ids[i], ids[j]) for j in range(n_tasks) for i in range(j) if rng.random() < 0.4]
        dag = WorkflowDag([task(t, cpus=int(rng.integers(1, 4)), mem=0) for t in ids], edges)
        c = cluster(*[node(f"n{k}", cpus=4 if k == 0 else int(rng.integers(1, 5))) for k in range(n_nodes)])
        durations = {(t, nid): int(rng.integers(1, 10)) for t in ids for nid in c.node_ids}
        plan = heft_plan(dag, c, lambda t, nid: durations[(t, nid)])
        matches += plan.makespan_us == replay_makespan(dag, c, durations, plan) * US_PER_S
        valid += plan_is_valid(dag, c, plan)

    dag = WorkflowDag([task("A", cpus=4), task("B", cpus=4)], [("A", "B")])
    c = cluster(node("n1"), node("n2"))
    table = {("A", "n1"): 10, ("A", "n2"): 20, ("B", "n1"): 30, ("B", "n2"): 15}
    chain = heft_plan(dag, c, lambda t, nid: table[(t, nid)])
    chain_ok = (chain.node_of("A"), chain.node_of("B"), chain.makespan) == ("n1", "n2", 25.0)
    criterion(5, matches == 100 and valid == 100 and chain_ok,
              f"replay matches {matches}/100, valid plans {valid}/100, chain example exact: {chain_ok}")


def test_criterion_6_tree_purity_on_separable_data(criterion):
    rng = np.random.default_rng(SEED)
    pure = ordered = 0
    params = TreeParams(max_depth=None, min_samples_leaf=1)
    for _ in range(50):
        w, levels = int(rng.integers(2, 6)), int(rng.integers(2, 7))
        k = int(rng.integers(0, w))
        g = np.cumsum(rng.uniform(0.5, 5.0, levels))  # strictly increasing in the rank
        reps = int(rng.integers(2, 5))
        key_ranks = np.repeat(np.arange(1, levels + 1), reps)
        X = rng.integers(1, levels + 1, (len(key_ranks), w)).astype(float)
        X[:, k] = key_ranks
        X = np.hstack([np.ones((len(X), 1)), X])  # one constant task metric
        y = g[key_ranks - 1]
        tree = train(X, y, params)
        pure += training_mse(tree, X, y) == 0.0

        model = RecommenderModel(tree, ("m",), tuple(f"f{i}" for i in range(w)), (True,) * w)
        picks = [int(rng.choice(np.flatnonzero(key_ranks == r))) for r in range(1, levels + 1)]
        order = rng.permutation(levels)
        nodes = [node(f"n{i}", ranks=tuple(int(v) for v in X[picks[j], 1:])) for i, j in enumerate(order)]
        plist = rank_nodes(model, task("t", mem=0, features=(1.0,)), cluster(*nodes))
        got = [X[picks[order[int(nid[1:])]], 1 + k] for nid in plist]
        ordered += got == sorted(got) and len(set(got)) == levels
    criterion(6, pure == 50 and ordered == 50, f"zero training MSE {pure}/50, exact rank order {ordered}/50")


def test_criterion_7_reshi_beats_heft_at_desk_scale(catalog, prepared, criterion):
    lines, ok = [], True
    for kind in WORKFLOWS:
        records = sweep(catalog, prepared[kind], cluster_count=100, strategies=["heft", "reshi-c", "reshi-m"],
                        distributions=["normal", "exponential"], err_levels=[0.15])
        report = aggregate(records)
        for dist in ("normal", "exponential"):
            heft = report.row(kind, dist, 0.15, "heft")
            best = min((report.row(kind, dist, 0.15, s) for s in ("reshi-c", "reshi-m")), key=lambda r: r.mean)
            cell_ok = best.mean <= heft.mean and best.p95 <= heft.p90
            ok &= cell_ok
            lines.append(f"{kind}/{dist} {best.strategy} mean {best.mean:.0f} vs {heft.mean:.0f}, "
                         f"p95 {best.p95:.0f} vs HEFT p90 {heft.p90:.0f}{'' if cell_ok else ' FAIL'}")
    criterion(7, ok, "; ".join(lines))


def test_criterion_8_experiment_reports_are_byte_identical(tmp_path, criterion):
    bundle = tmp_path / "fx"
    assert main(["fixtures", "--out", str(bundle), "--samples", "3", "--clusters", "6", "--nodes", "12"]) == 0
    plan = json.loads((bundle / "plan.json").read_text())
    plan["err_levels"] = [0.0, 0.15, 0.5]
    (bundle / "plan.json").write_text(json.dumps(plan))
    names = ("results.csv", "report.csv", "report.md", "series.json")
    runs = []
    for i, jobs in enumerate((1, 2)):
        out = tmp_path / f"run{i}"
        assert main(["experiment", "--plan", str(bundle / "plan.json"), "--out", str(out), "--jobs", str(jobs)]) == 0
        runs.append({n: (out / n).read_bytes() for n in names})
    same = [n for n in names if runs[0][n] == runs[1][n]]
    criterion(8, len(same) == len(names), f"identical files: {same} (serial vs 2 workers)")
