#!/usr/bin/env python3
"""Run every bundled workflow on its scripted rules and print a summary.

Quick end-to-end smoke check of the whole stack (parsing, tools, engine,
demos) without touching any network backend.
"""

from __future__ import annotations

from agwf.demos import BUNDLE_NAMES, demo_inquiry, demo_rules_backend, demo_workflow
from agwf.workflow_engine import execute, linearize


def main() -> None:
    for name in BUNDLE_NAMES:
        spec = demo_workflow(name)
        record = execute(spec, demo_inquiry(name), demo_rules_backend(name))
        assert list(record.task_sequence) == linearize(spec)
        print(f"== {name}: {len(record.task_sequence)} tasks, "
              f"{len(record.final_state)} chars of final state")
        for task_id in record.task_sequence:
            detail = record.details[task_id]
            tool = detail.selected_tool or "-"
            flag = " [skipped]" if detail.skipped else ""
            print(f"   {task_id:<20} tool={tool}{flag}")
        print(f"   final answer: {record.task_output(record.task_sequence[-1])[:100]}...")
        print()


if __name__ == "__main__":
    main()
