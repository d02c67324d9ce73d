from __future__ import annotations

import pytest

from agwf.task_kinds import (
    EVALUATOR,
    ROUTER,
    EvaluatorResult,
    RouteMissing,
    ScoreMissing,
    ScoreOutOfRange,
    apply_wrap_back,
    build_prompt,
    parse_route,
    parse_score,
)
from agwf.workflow_engine import EvaluatorConfig, TaskSpec

from conftest import plain_task


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------

def test_build_prompt_plain():
    task = plain_task("t1", instruction="list the problems", expected_output="a list")
    prompt = build_prompt(task, "STATE")
    assert prompt.startswith("STATE")
    assert "Task: list the problems" in prompt
    assert prompt.endswith("Expected output: a list")
    assert "ROUTE:" not in prompt and "SCORE:" not in prompt


def test_build_prompt_includes_tool_output():
    task = plain_task("t1")
    prompt = build_prompt(task, "STATE", tool_output="TOOLTEXT")
    assert "Tool output:\nTOOLTEXT" in prompt
    assert prompt.index("STATE") < prompt.index("TOOLTEXT")


def test_build_prompt_router_lists_options():
    task = plain_task("r", kind=ROUTER, instruction="pick a branch")
    prompt = build_prompt(task, "STATE", route_options=["code_gen", "llm_insights"])
    assert "code_gen, llm_insights" in prompt
    assert 'ROUTE: <option>' in prompt


def test_build_prompt_evaluator_score_instruction():
    task = plain_task(
        "e", kind=EVALUATOR,
        evaluator_config=EvaluatorConfig(threshold=5.0, target_task_id="t"),
    )
    prompt = build_prompt(task, "STATE")
    assert 'SCORE: <value>' in prompt
    assert "between 1.0 and 10.0" in prompt


def test_build_prompt_is_pure():
    task = plain_task("t1")
    assert build_prompt(task, "S", "T") == build_prompt(task, "S", "T")


# ---------------------------------------------------------------------------
# ROUTE protocol
# ---------------------------------------------------------------------------

def test_parse_route_token():
    assert parse_route("thinking...\nROUTE: code_gen") == "code_gen"


def test_parse_route_missing():
    with pytest.raises(RouteMissing):
        parse_route("no routing here")


def test_parse_route_last_wins():
    assert parse_route("ROUTE: a\nmore\nROUTE: b") == "b"


# ---------------------------------------------------------------------------
# SCORE protocol
# ---------------------------------------------------------------------------

def test_parse_score_value_and_rationale():
    result = parse_score("weak evidence\nSCORE: 3.0")
    assert result == EvaluatorResult(score=3.0, rationale="weak evidence")


def test_parse_score_out_of_range():
    with pytest.raises(ScoreOutOfRange):
        parse_score("SCORE: 11")
    with pytest.raises(ScoreOutOfRange):
        parse_score("SCORE: 0.5")


def test_parse_score_missing():
    with pytest.raises(ScoreMissing):
        parse_score("fine")


def test_parse_score_last_line_wins():
    assert parse_score("SCORE: 2.0\nrevised\nSCORE: 9.5").score == 9.5


# ---------------------------------------------------------------------------
# Wrap-back decision
# ---------------------------------------------------------------------------

def evaluator_task(threshold=5.0, max_retries=2):
    return plain_task(
        "grade", kind=EVALUATOR,
        evaluator_config=EvaluatorConfig(
            threshold=threshold, target_task_id="t", max_retries=max_retries
        ),
    )


def test_wrap_back_retries_below_threshold():
    task = evaluator_task()
    assert apply_wrap_back(task, EvaluatorResult(3.0, ""), 0) == "retry"


def test_wrap_back_accepts_good_score():
    task = evaluator_task()
    assert apply_wrap_back(task, EvaluatorResult(9.0, ""), 0) == "accept"


def test_wrap_back_accepts_after_exhaustion():
    task = evaluator_task(max_retries=2)
    assert apply_wrap_back(task, EvaluatorResult(3.0, ""), 2) == "accept"


def test_wrap_back_requires_config():
    with pytest.raises(ValueError):
        apply_wrap_back(plain_task("x"), EvaluatorResult(3.0, ""), 0)


def test_evaluator_config_rejects_out_of_range_threshold():
    with pytest.raises(ValueError):
        EvaluatorConfig(threshold=0.5, target_task_id="t")
