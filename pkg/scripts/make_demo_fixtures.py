#!/usr/bin/env python3
"""Regenerate the bundled demo event logs under src/agwf/data/.

Both logs are synthetic and fully deterministic (fixed seed), so the
shipped demos and the acceptance suite are reproducible byte for byte.

  purchase_log.xes  — small purchasing process with two planted problems:
                      some orders skip the approval step, and one case
                      pays the same invoice twice (non-consecutively).
  fairness_log.xes  — 40 cases; the 20 cases with gender="F" are the only
                      ones routed through the extra review step, so the
                      edge (Request, Extra Check) exists only in that group.
"""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone
from pathlib import Path
from xml.sax.saxutils import escape

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "agwf" / "data"

BASE = datetime(2024, 5, 6, 8, 0, 0, tzinfo=timezone.utc)


def _attr(indent: str, type_tag: str, key: str, value) -> str:
    if isinstance(value, datetime):
        value = value.isoformat()
    return f'{indent}<{type_tag} key="{escape(str(key))}" value="{escape(str(value))}"/>'


def write_xes(path: Path, traces: list[dict]) -> None:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        "<!-- Synthetic fixture generated by scripts/make_demo_fixtures.py -->",
        '<log xes.version="1.0" xmlns="http://www.xes-standard.org/">',
    ]
    for trace in traces:
        lines.append("  <trace>")
        lines.append(_attr("    ", "string", "concept:name", trace["case_id"]))
        for key, value in trace.get("attributes", {}).items():
            type_tag = "int" if isinstance(value, int) else "string"
            lines.append(_attr("    ", type_tag, key, value))
        for activity, moment in trace["events"]:
            lines.append("    <event>")
            lines.append(_attr("      ", "string", "concept:name", activity))
            lines.append(_attr("      ", "date", "time:timestamp", moment))
            lines.append("    </event>")
        lines.append("  </trace>")
    lines.append("</log>")
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(traces)} traces)")


def schedule(start: datetime, activities: list[str], gaps_minutes: list[int]):
    events = [(activities[0], start)]
    moment = start
    for activity, gap in zip(activities[1:], gaps_minutes):
        moment = moment + timedelta(minutes=gap)
        events.append((activity, moment))
    return events


def purchase_log() -> list[dict]:
    rng = random.Random(7)
    normal = [
        "Create Requisition", "Approve Requisition", "Create Purchase Order",
        "Receive Goods", "Receive Invoice", "Pay Invoice",
    ]
    skip_approval = [
        "Create Requisition", "Create Purchase Order",
        "Receive Goods", "Receive Invoice", "Pay Invoice",
    ]
    double_payment = [
        "Create Requisition", "Approve Requisition", "Create Purchase Order",
        "Receive Goods", "Receive Invoice", "Pay Invoice",
        "Receive Invoice", "Pay Invoice",
    ]
    shapes = [normal, normal, skip_approval, normal, double_payment, skip_approval, normal, normal]
    traces = []
    for i, shape in enumerate(shapes):
        start = BASE + timedelta(hours=3 * i)
        gaps = [rng.randint(10, 240) for _ in shape[1:]]
        traces.append({
            "case_id": f"po_{i + 1:03d}",
            "attributes": {"region": rng.choice(["north", "south"])},
            "events": schedule(start, shape, gaps),
        })
    return traces


def fairness_log() -> list[dict]:
    rng = random.Random(11)
    with_check = ["Request", "Extra Check", "Approve", "Pay"]
    without_check = ["Request", "Approve", "Pay"]
    traces = []
    for i in range(40):
        protected = i % 2 == 0
        shape = with_check if protected else without_check
        start = BASE + timedelta(hours=i)
        gaps = [rng.randint(5, 90) for _ in shape[1:]]
        traces.append({
            "case_id": f"app_{i + 1:03d}",
            "attributes": {"gender": "F" if protected else "M", "age": rng.randint(20, 65)},
            "events": schedule(start, shape, gaps),
        })
    return traces


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    write_xes(DATA_DIR / "purchase_log.xes", purchase_log())
    write_xes(DATA_DIR / "fairness_log.xes", fairness_log())


if __name__ == "__main__":
    main()
