import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reshi.domain import (
    WorkflowDag,
    children_count,
    load_workflow,
    ready_tasks,
    save_workflow,
    topological_order,
    workflow_from_dict,
    workflow_to_dict,
)
from reshi.errors import CycleDetected, ParseError, UnknownTask, ValidationError

from _util import node, task


def diamond():
    return WorkflowDag([task(t) for t in "ABCD"], [("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")])


def test_topological_order_diamond():
    assert topological_order(diamond()) == ["A", "B", "C", "D"]


def test_topological_order_empty():
    assert topological_order(WorkflowDag([])) == []


def test_cycle_is_reported_with_an_edge():
    with pytest.raises(CycleDetected) as exc:
        WorkflowDag([task("A"), task("B")], [("A", "B"), ("B", "A")])
    assert exc.value.edge in {("A", "B"), ("B", "A")}


def test_children_count():
    dag = WorkflowDag([task(t) for t in "ABC"], [("A", "B"), ("A", "C")])
    assert children_count(dag, "A") == 2
    assert children_count(dag, "B") == 0
    with pytest.raises(UnknownTask):
        children_count(dag, "Z")


def test_duplicate_edge_rejected():
    with pytest.raises(ValidationError):
        WorkflowDag([task("A"), task("B")], [("A", "B"), ("A", "B")])


@pytest.mark.parametrize("edges, exc", [
    ([("A", "A")], ValidationError),
    ([("A", "Z")], UnknownTask),
])
def test_bad_edges(edges, exc):
    with pytest.raises(exc):
        WorkflowDag([task("A")], edges)


def test_duplicate_task_rejected():
    with pytest.raises(ValidationError):
        WorkflowDag([task("A"), task("A")])


def test_ready_tasks_examples():
    dag = WorkflowDag([task(t) for t in "ABC"], [("A", "B"), ("A", "C")])
    assert ready_tasks(dag, set()) == {"A"}
    assert ready_tasks(dag, {"A"}) == {"B", "C"}
    assert ready_tasks(dag, {"A", "B", "C"}) == set()


def test_invalid_task_and_node_fields():
    with pytest.raises(ValidationError):
        task("")
    with pytest.raises(ValidationError):
        task("A", cpus=-1)
    with pytest.raises(ValidationError):
        node("n1", cpus=0)


@st.composite
def random_dags(draw):
    n = draw(st.integers(0, 9))
    ids = [f"t{i}" for i in range(n)]
    edges = set()
    for j in range(n):
        for i in range(j):
            if draw(st.booleans()):
                edges.add((ids[i], ids[j]))
    # relabel so the id order is not the construction order
    perm = draw(st.permutations(ids))
    rename = dict(zip(ids, perm))
    return WorkflowDag([task(t) for t in perm], [(rename[a], rename[b]) for a, b in sorted(edges)])


@settings(max_examples=60, deadline=None)
@given(random_dags())
def test_topological_order_properties(dag):
    order = topological_order(dag)
    assert sorted(order) == sorted(dag.tasks)
    assert order == topological_order(dag)
    pos = {t: i for i, t in enumerate(order)}
    for a, b in dag.edges:
        assert pos[a] < pos[b]


@settings(max_examples=60, deadline=None)
@given(random_dags())
def test_ready_rounds_reach_all_tasks(dag):
    finished = set()
    for _ in range(len(dag)):
        ready = ready_tasks(dag, finished)
        assert not ready & finished
        finished |= ready
    assert finished == set(dag.tasks)


def test_workflow_file_round_trip(tmp_path):
    dag = WorkflowDag(
        [task("A", cpus=2, mem=3, avg=5.0, features=(1.0, 2.0)), task("B", avg=1.5, features=(0.5, 0.0))],
        {("A", "B"): 123.0},
        name="demo",
        feature_names=("cpu", "io"),
    )
    path = tmp_path / "wf.json"
    save_workflow(dag, path)
    back = load_workflow(path)
    assert workflow_to_dict(back) == workflow_to_dict(dag)
    assert back.data_volume("A", "B") == 123.0
    assert back.task("A").trace_features == (1.0, 2.0)


def test_workflow_parse_errors():
    base = {"format": "reshi-workflow", "version": 1, "trace_features": ["cpu"], "tasks": [], "edges": []}
    with pytest.raises(ParseError):
        workflow_from_dict({**base, "version": 2})
    with pytest.raises(ParseError):
        workflow_from_dict({**base, "tasks": [{"cpus": 1}]})
    with pytest.raises(ParseError):
        workflow_from_dict({**base, "tasks": [{"id": "A", "features": {"gpu": 1}}]})
    doc = {**base, "tasks": [{"id": "A", "features": {"cpu": 1}}, {"id": "B", "features": {"cpu": 1}}],
           "edges": [{"from": "A", "to": "B"}, {"from": "A", "to": "B"}]}
    with pytest.raises(ParseError):
        workflow_from_dict(json.loads(json.dumps(doc)))
    doc["edges"] = [{"from": "A", "to": "B"}, {"from": "B", "to": "A"}]
    with pytest.raises(CycleDetected):
        workflow_from_dict(doc)
