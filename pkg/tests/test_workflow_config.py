from __future__ import annotations

import json

import pytest

from agwf.demos import BUNDLE_NAMES, demo_rules_backend, demo_workflow
from agwf.task_kinds import RouterGuard
from agwf.workflow_config import (
    WorkflowConfigError,
    load_workflow,
    parse_scripted_rules,
    parse_workflow,
)
from agwf.workflow_engine import validate


def minimal_doc(**overrides):
    doc = {
        "schema_version": 1,
        "agents": [{"id": "a", "role_prompt": "You help."}],
        "tasks": [
            {"id": "T1", "agent": "a", "instruction": "do it", "prec": []},
            {"id": "T2", "agent": "a", "instruction": "finish", "prec": ["T1"]},
        ],
        "initial_task": "T1",
        "final_task": "T2",
    }
    doc.update(overrides)
    return doc


def test_parse_minimal_document():
    spec = parse_workflow(minimal_doc())
    assert [t.id for t in spec.tasks] == ["T1", "T2"]
    assert spec.prec["T2"] == frozenset({"T1"})
    assert validate(spec) == []


def test_schema_version_is_required():
    doc = minimal_doc()
    del doc["schema_version"]
    with pytest.raises(WorkflowConfigError):
        parse_workflow(doc)


def test_wrong_schema_version_rejected():
    with pytest.raises(WorkflowConfigError) as err:
        parse_workflow(minimal_doc(schema_version=2))
    assert "schema_version" in str(err.value)


def test_unknown_top_level_key_rejected():
    with pytest.raises(WorkflowConfigError) as err:
        parse_workflow(minimal_doc(surprise=True))
    assert "surprise" in str(err.value)


def test_unknown_task_key_rejected():
    doc = minimal_doc()
    doc["tasks"][0]["colour"] = "blue"
    with pytest.raises(WorkflowConfigError) as err:
        parse_workflow(doc)
    assert "tasks[0]" in str(err.value) and "colour" in str(err.value)


def test_unknown_agent_key_rejected():
    doc = minimal_doc()
    doc["agents"][0]["nickname"] = "sam"
    with pytest.raises(WorkflowConfigError):
        parse_workflow(doc)


def test_guard_and_evaluator_parse():
    doc = minimal_doc()
    doc["agents"].append({"id": "r", "role_prompt": "You route."})
    doc["tasks"] = [
        {"id": "T1", "kind": "router", "agent": "r", "instruction": "route", "prec": []},
        {
            "id": "T2", "agent": "a", "instruction": "branch", "prec": ["T1"],
            "guard": {"router_task_id": "T1", "expected_route_token": "go"},
        },
        {
            "id": "T3", "kind": "evaluator", "agent": "a", "instruction": "grade",
            "prec": ["T2"],
            "evaluator": {"threshold": 6.0, "target_task_id": "T2", "max_retries": 1},
        },
    ]
    doc["final_task"] = "T3"
    spec = parse_workflow(doc)
    assert spec.task("T2").guard == RouterGuard("T1", "go")
    config = spec.task("T3").evaluator_config
    assert config.threshold == 6.0 and config.max_retries == 1


def test_guard_unknown_key_rejected():
    doc = minimal_doc()
    doc["tasks"][1]["guard"] = {"router_task_id": "T1", "token": "go"}
    with pytest.raises(WorkflowConfigError):
        parse_workflow(doc)


def test_bad_json_file_reports_path(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(WorkflowConfigError) as err:
        load_workflow(path)
    assert "broken.json" in str(err.value)


def test_temperature_type_checked():
    doc = minimal_doc()
    doc["agents"][0]["temperature"] = "hot"
    with pytest.raises(WorkflowConfigError):
        parse_workflow(doc)


@pytest.mark.parametrize("name", BUNDLE_NAMES)
def test_bundled_workflows_are_valid(name):
    spec = demo_workflow(name)
    assert validate(spec) == []
    backend = demo_rules_backend(name)
    assert backend.rules


# ---------------------------------------------------------------------------
# Scripted-rules files
# ---------------------------------------------------------------------------

def test_rules_object_form():
    backend = parse_scripted_rules(
        {"rules": [{"match": "x", "response": "y"}], "fallback": "f"}
    )
    assert backend.fallback == "f"
    assert backend.rules[0].responses == ("y",)


def test_rules_bare_list_form():
    backend = parse_scripted_rules([{"match": "x", "responses": ["a", "b"]}])
    assert backend.fallback == ""
    assert backend.rules[0].responses == ("a", "b")


def test_rules_need_response():
    with pytest.raises(WorkflowConfigError):
        parse_scripted_rules([{"match": "x"}])


def test_rules_unknown_key_rejected():
    with pytest.raises(WorkflowConfigError):
        parse_scripted_rules([{"match": "x", "response": "y", "mode": "loose"}])


def test_rules_regex_flag_type_checked():
    with pytest.raises(WorkflowConfigError):
        parse_scripted_rules([{"match": "x", "response": "y", "regex": "yes"}])
