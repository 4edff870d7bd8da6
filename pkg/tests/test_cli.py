import json

import pytest

from reshi.cli import main


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("fx")
    assert main(["fixtures", "--out", str(out), "--samples", "1", "--clusters", "2", "--nodes", "4"]) == 0
    plan = json.loads((out / "plan.json").read_text())
    plan["workflows"] = plan["workflows"][:1]
    plan["err_levels"] = [0.0, 0.3]
    (out / "plan.json").write_text(json.dumps(plan))
    return out


def last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_train_rank_simulate(bundle, capsys):
    model = bundle / "model.json"
    args = ["train", "--traces", str(bundle / "chipseq_traces.csv"), "--profiles", str(bundle / "catalog.csv"),
            "--dag", str(bundle / "chipseq.json"), "--out", str(model)]
    assert main(args) == 0
    assert last_json(capsys)["depth"] <= 8

    tid = json.loads((bundle / "chipseq.json").read_text())["tasks"][0]["id"]
    assert main(["rank", "--model", str(model), "--task-id", tid, "--profiles", str(bundle / "catalog.csv")]) == 0
    ranking = last_json(capsys)["nodes"]
    scores = [e["score"] for e in ranking]
    assert scores == sorted(scores)

    sim = ["simulate", "--dag", str(bundle / "chipseq.json"), "--cluster", str(bundle / "catalog.csv"),
           "--runtimes", str(bundle / "chipseq_runtimes.csv")]
    assert main(sim + ["--strategy", "reshi-m", "--model", str(model), "--out", str(bundle / "r.json")]) == 0
    assert last_json(capsys)["makespan_s"] > 0
    assert json.loads((bundle / "r.json").read_text())["strategy"] == "reshi-m"
    assert main(sim + ["--strategy", "heft", "--err", "0.15", "--dist", "exponential", "--seed", "3"]) == 0
    assert last_json(capsys)["strategy"] == "heft"


def test_errors_exit_nonzero_with_json(bundle, capsys):
    sim = ["simulate", "--dag", str(bundle / "chipseq.json"), "--cluster", str(bundle / "catalog.csv"),
           "--runtimes", str(bundle / "chipseq_runtimes.csv"), "--strategy", "reshi-c"]
    assert main(sim) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ValidationError"
    assert main(["train", "--traces", str(bundle / "missing.csv"), "--profiles", "x", "--out", "y"]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "IoError"


def test_experiment_and_report(bundle, capsys):
    out = bundle / "run"
    assert main(["experiment", "--plan", str(bundle / "plan.json"), "--out", str(out)]) == 0
    summary = last_json(capsys)
    assert summary == {"runs": 2 * 5 * 2 * 2, "failed": 0, "out": str(out)}
    for name in ("results.csv", "report.csv", "report.md", "series.json"):
        assert (out / name).exists()
    assert main(["report", "--in", str(out), "--format", "csv"]) == 0
    assert capsys.readouterr().out == (out / "report.csv").read_text()
    assert main(["report", "--in", str(out), "--format", "md"]) == 0
    assert capsys.readouterr().out.startswith("### chipseq")
