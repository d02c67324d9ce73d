"""Event-log model and deterministic process-mining operations.

Parses XES and CSV documents into an immutable in-memory model
(EventLog / Trace / Event) and computes the behavioral artifacts the
tool layer exposes: directly-follows graphs, variant tables, predicate
splits, and DFG comparisons.  Every operation is a pure function of its
inputs; parsing the same document twice yields structurally identical
results.
"""

from __future__ import annotations

import csv
import io
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Union

Scalar = Union[str, int, float, bool, datetime]


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class EventLogError(Exception):
    """Base class for parsing and predicate errors in this module."""


class MalformedDocument(EventLogError):
    pass


class MissingActivity(EventLogError):
    pass


class MissingTimestamp(EventLogError):
    pass


class UnparsableTimestamp(EventLogError):
    pass


class MissingColumn(EventLogError):
    pass


class MissingCaseId(EventLogError):
    pass


class DuplicateCaseId(EventLogError):
    pass


class EmptyDocument(EventLogError):
    pass


class EmptyExpression(EventLogError):
    pass


class PredicateSyntaxError(EventLogError):
    """Carries the character offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    """One activity execution: non-empty label, tz-aware timestamp, extras."""

    activity: str
    timestamp: datetime
    attributes: dict[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class Trace:
    """One case: events sorted by timestamp (stable on ties)."""

    case_id: str
    case_attributes: dict[str, Scalar] = field(default_factory=dict)
    events: tuple[Event, ...] = ()


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...] = ()
    source_name: str = ""


@dataclass(frozen=True)
class DfgEdgeStats:
    frequency: int
    mean_duration_seconds: float


@dataclass(frozen=True)
class Dfg:
    """Directly-follows graph: edge frequencies/durations plus endpoints."""

    edges: dict[tuple[str, str], DfgEdgeStats] = field(default_factory=dict)
    start_activities: dict[str, int] = field(default_factory=dict)
    end_activities: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class Variant:
    activity_sequence: tuple[str, ...]
    count: int


@dataclass(frozen=True)
class VariantTable:
    """Distinct activity sequences, ordered by count desc then sequence."""

    variants: tuple[Variant, ...] = ()


#: supported comparison operators, in canonical form
PREDICATE_OPERATORS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Comparison:
    attribute: str
    operator: str
    literal: Scalar


@dataclass(frozen=True)
class CasePredicate:
    """Conjunction of attribute comparisons over case-level attributes.

    Evaluation is total: a missing attribute or an incomparable value
    pair makes the individual comparison false, never an error.
    """

    comparisons: tuple[Comparison, ...]

    def matches(self, trace: Trace) -> bool:
        return all(
            _evaluate_comparison(trace.case_attributes, c) for c in self.comparisons
        )


ONLY_IN_A = "only_in_a"
ONLY_IN_B = "only_in_b"
FREQUENCY_SHIFT = "frequency_shift"
DURATION_SHIFT = "duration_shift"


@dataclass(frozen=True)
class ComparisonFinding:
    edge: tuple[str, str]
    freq_a: int
    freq_b: int
    relative_difference: float
    kind: str
    mean_dur_a: float = 0.0
    mean_dur_b: float = 0.0


@dataclass(frozen=True)
class DfgComparison:
    """Behavioral differences between two DFGs, strongest first."""

    findings: tuple[ComparisonFinding, ...]
    total_a: int = 0
    total_b: int = 0


# ---------------------------------------------------------------------------
# Timestamp handling
# ---------------------------------------------------------------------------

def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    cleaned = text.strip()
    if cleaned.endswith(("Z", "z")):
        cleaned = cleaned[:-1] + "+00:00"
    moment = datetime.fromisoformat(cleaned)  # ValueError on junk
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment


def _sorted_events(events: list[Event]) -> tuple[Event, ...]:
    # stable: equal timestamps keep source-document order
    return tuple(sorted(events, key=lambda e: e.timestamp))


# ---------------------------------------------------------------------------
# XES parsing
# ---------------------------------------------------------------------------

_XES_TYPED = frozenset({"string", "date", "int", "float", "boolean"})


def _local_tag(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _convert_xes_value(type_tag: str, value: str) -> Scalar:
    if type_tag == "int":
        try:
            return int(value)
        except ValueError:
            return value
    if type_tag == "float":
        try:
            return float(value)
        except ValueError:
            return value
    if type_tag == "boolean":
        lowered = value.strip().lower()
        if lowered in ("true", "false"):
            return lowered == "true"
        return value
    if type_tag == "date":
        return parse_timestamp(value)
    # "string" and any unknown type are preserved as text
    return value


def _collect_attributes(element: ET.Element, where: str) -> dict[str, Scalar]:
    attrs: dict[str, Scalar] = {}
    for child in element:
        tag = _local_tag(child.tag)
        if tag == "event":
            continue
        key = child.get("key")
        value = child.get("value")
        if key is None or value is None:
            continue
        try:
            attrs[key] = _convert_xes_value(tag, value)
        except ValueError:
            raise UnparsableTimestamp(
                f"{where}: cannot parse timestamp {value!r} for key {key!r}"
            ) from None
    return attrs


def parse_xes(document: str, source_name: str = "") -> EventLog:
    """Parse an XES document into an EventLog.

    Interprets log/trace/event elements and string/date/int/float/boolean
    attribute elements keyed by ``key``/``value``; unknown attribute types
    are preserved as text.  At event level ``concept:name`` becomes the
    activity and ``time:timestamp`` the timestamp; at trace level
    ``concept:name`` becomes the case id (``case_<index>`` when absent).

    Raises MalformedDocument, MissingActivity, MissingTimestamp,
    UnparsableTimestamp, or DuplicateCaseId.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, column = exc.position
        raise MalformedDocument(
            f"not well-formed XML at line {line}, column {column}: {exc.msg if hasattr(exc, 'msg') else exc}"
        ) from exc

    traces: list[Trace] = []
    seen_ids: set[str] = set()
    trace_index = 0
    for node in root:
        if _local_tag(node.tag) != "trace":
            continue
        case_attrs = _collect_attributes(node, f"trace {trace_index}")
        raw_case_id = case_attrs.pop("concept:name", None)
        case_id = str(raw_case_id) if raw_case_id is not None else f"case_{trace_index}"
        if case_id in seen_ids:
            raise DuplicateCaseId(f"case id {case_id!r} appears more than once")
        seen_ids.add(case_id)

        events: list[Event] = []
        event_index = 0
        for child in node:
            if _local_tag(child.tag) != "event":
                continue
            where = f"trace {case_id!r}, event {event_index}"
            attrs = _collect_attributes(child, where)
            raw_activity = attrs.pop("concept:name", None)
            activity = str(raw_activity) if raw_activity is not None else ""
            if not activity:
                raise MissingActivity(f"{where}: no concept:name")
            raw_ts = attrs.pop("time:timestamp", None)
            if raw_ts is None:
                raise MissingTimestamp(f"{where}: no time:timestamp")
            if not isinstance(raw_ts, datetime):
                # tolerated: timestamp encoded with a non-date element type
                try:
                    raw_ts = parse_timestamp(str(raw_ts))
                except ValueError:
                    raise UnparsableTimestamp(
                        f"{where}: cannot parse timestamp {raw_ts!r}"
                    ) from None
            events.append(Event(activity=activity, timestamp=raw_ts, attributes=attrs))
            event_index += 1

        traces.append(
            Trace(case_id=case_id, case_attributes=case_attrs, events=_sorted_events(events))
        )
        trace_index += 1

    return EventLog(traces=tuple(traces), source_name=source_name)


# ---------------------------------------------------------------------------
# CSV parsing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CsvMapping:
    """Column mapping for CSV ingestion.

    timestamp_format is a strptime pattern; None means ISO-8601.
    """

    case_column: str
    activity_column: str
    timestamp_column: str
    timestamp_format: str | None = None


#: convention used when a CSV file is referenced without an explicit mapping
DEFAULT_CSV_MAPPING = CsvMapping("case_id", "activity", "timestamp")


def parse_csv(document: str, mapping: CsvMapping, source_name: str = "") -> EventLog:
    """Parse CSV text (RFC-4180, header row mandatory) into an EventLog.

    Rows are grouped by the case column in first-appearance order; the
    remaining columns become event attributes (kept as text).  Events are
    re-sorted by timestamp within each trace, preserving row order on ties.
    """
    reader = csv.reader(io.StringIO(document))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDocument("document has no header row") from None
    if not any(cell.strip() for cell in header):
        raise EmptyDocument("document has no header row")

    index: dict[str, int] = {name: i for i, name in enumerate(header)}
    for needed in (mapping.case_column, mapping.activity_column, mapping.timestamp_column):
        if needed not in index:
            raise MissingColumn(f"column {needed!r} not in header {header!r}")
    case_idx = index[mapping.case_column]
    act_idx = index[mapping.activity_column]
    ts_idx = index[mapping.timestamp_column]
    attr_columns = [
        (name, i)
        for name, i in index.items()
        if i not in (case_idx, act_idx, ts_idx)
    ]

    grouped: dict[str, list[Event]] = {}
    for row in reader:
        if not row:
            continue
        line = reader.line_num
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        case_id = row[case_idx]
        if not case_id:
            raise MissingCaseId(f"row {line}: empty value in case column")
        activity = row[act_idx]
        if not activity:
            raise MissingActivity(f"row {line}: empty value in activity column")
        ts_text = row[ts_idx]
        try:
            if mapping.timestamp_format:
                moment = datetime.strptime(ts_text, mapping.timestamp_format)
                if moment.tzinfo is None:
                    moment = moment.replace(tzinfo=timezone.utc)
            else:
                moment = parse_timestamp(ts_text)
        except ValueError:
            raise UnparsableTimestamp(
                f"row {line}: cannot parse timestamp {ts_text!r}"
            ) from None
        attributes: dict[str, Scalar] = {name: row[i] for name, i in attr_columns}
        grouped.setdefault(case_id, []).append(
            Event(activity=activity, timestamp=moment, attributes=attributes)
        )

    traces = tuple(
        Trace(case_id=cid, case_attributes={}, events=_sorted_events(events))
        for cid, events in grouped.items()
    )
    return EventLog(traces=traces, source_name=source_name)


# ---------------------------------------------------------------------------
# Discovery
# ---------------------------------------------------------------------------

def discover_dfg(log: EventLog) -> Dfg:
    """Count directly-follows pairs over all traces.

    Edge durations are the arithmetic mean, in seconds, of the timestamp
    gaps over all occurrences of the pair.
    """
    counts: dict[tuple[str, str], int] = {}
    total_seconds: dict[tuple[str, str], float] = {}
    starts: dict[str, int] = {}
    ends: dict[str, int] = {}
    for trace in log.traces:
        events = trace.events
        if not events:
            continue
        starts[events[0].activity] = starts.get(events[0].activity, 0) + 1
        ends[events[-1].activity] = ends.get(events[-1].activity, 0) + 1
        for first, second in zip(events, events[1:]):
            edge = (first.activity, second.activity)
            counts[edge] = counts.get(edge, 0) + 1
            gap = (second.timestamp - first.timestamp).total_seconds()
            total_seconds[edge] = total_seconds.get(edge, 0.0) + gap
    edges = {
        edge: DfgEdgeStats(frequency=n, mean_duration_seconds=total_seconds[edge] / n)
        for edge, n in counts.items()
    }
    return Dfg(edges=edges, start_activities=starts, end_activities=ends)


def discover_variants(log: EventLog) -> VariantTable:
    """Group traces by activity sequence; order by count desc, then sequence."""
    counts: dict[tuple[str, ...], int] = {}
    for trace in log.traces:
        sequence = tuple(event.activity for event in trace.events)
        counts[sequence] = counts.get(sequence, 0) + 1
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return VariantTable(
        variants=tuple(Variant(activity_sequence=s, count=n) for s, n in ordered)
    )


# ---------------------------------------------------------------------------
# Predicate language
# ---------------------------------------------------------------------------

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_:.]*")
_NUMBER_RE = re.compile(r"[+-]?\d+(\.\d+)?")
_AND_RE = re.compile(r"and\b", re.IGNORECASE)
# longest-match order; "==" is detected separately and rejected
_OPERATOR_FORMS = (
    ("!=", "!="),
    ("<=", "<="),
    (">=", ">="),
    ("≠", "!="),
    ("≤", "<="),
    ("≥", ">="),
    ("=", "="),
    ("<", "<"),
    (">", ">"),
)


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _read_identifier(text: str, pos: int) -> tuple[str, int]:
    match = _IDENT_RE.match(text, pos)
    if not match:
        raise PredicateSyntaxError("expected attribute name", pos)
    return match.group(0), match.end()


def _read_operator(text: str, pos: int) -> tuple[str, int]:
    if text.startswith("==", pos):
        raise PredicateSyntaxError("unsupported operator '=='", pos)
    for form, canonical in _OPERATOR_FORMS:
        if text.startswith(form, pos):
            return canonical, pos + len(form)
    raise PredicateSyntaxError("expected comparison operator", pos)


def _read_literal(text: str, pos: int) -> tuple[Scalar, int]:
    if pos >= len(text):
        raise PredicateSyntaxError("expected literal", pos)
    quote = text[pos]
    if quote in ("'", '"'):
        end = text.find(quote, pos + 1)
        if end < 0:
            raise PredicateSyntaxError("unterminated quoted text", pos)
        return text[pos + 1:end], end + 1
    if text.startswith("true", pos):
        return True, pos + 4
    if text.startswith("false", pos):
        return False, pos + 5
    match = _NUMBER_RE.match(text, pos)
    if match:
        raw = match.group(0)
        return (float(raw) if "." in raw else int(raw)), match.end()
    raise PredicateSyntaxError("expected literal", pos)


def parse_predicate(expression: str) -> CasePredicate:
    """Parse ``attr op literal ("and" attr op literal)*``.

    Literals are quoted text, integers, reals, or true/false; operators are
    = != < <= > >= (Unicode forms accepted).  Whitespace-insensitive.
    """
    if not expression.strip():
        raise EmptyExpression("predicate expression is empty")
    comparisons: list[Comparison] = []
    pos = _skip_ws(expression, 0)
    while True:
        attribute, pos = _read_identifier(expression, pos)
        pos = _skip_ws(expression, pos)
        op, pos = _read_operator(expression, pos)
        pos = _skip_ws(expression, pos)
        literal, pos = _read_literal(expression, pos)
        comparisons.append(Comparison(attribute=attribute, operator=op, literal=literal))
        pos = _skip_ws(expression, pos)
        if pos >= len(expression):
            break
        match = _AND_RE.match(expression, pos)
        if not match:
            raise PredicateSyntaxError("expected 'and'", pos)
        pos = _skip_ws(expression, match.end())
    return CasePredicate(comparisons=tuple(comparisons))


def _evaluate_comparison(attributes: dict[str, Scalar], comparison: Comparison) -> bool:
    if comparison.attribute not in attributes:
        return False
    value = attributes[comparison.attribute]
    literal = comparison.literal
    # bool is an int subclass; keep booleans in their own universe
    if isinstance(value, bool) or isinstance(literal, bool):
        if not (isinstance(value, bool) and isinstance(literal, bool)):
            return False
        if comparison.operator == "=":
            return value == literal
        if comparison.operator == "!=":
            return value != literal
        return False
    numeric = isinstance(value, (int, float)) and isinstance(literal, (int, float))
    textual = isinstance(value, str) and isinstance(literal, str)
    if not (numeric or textual):
        return False
    op = comparison.operator
    if op == "=":
        return value == literal
    if op == "!=":
        return value != literal
    if op == "<":
        return value < literal
    if op == "<=":
        return value <= literal
    if op == ">":
        return value > literal
    return value >= literal


def split_log(log: EventLog, predicate: CasePredicate) -> tuple[EventLog, EventLog]:
    """Partition traces into (matching, rest), preserving trace order."""
    matching: list[Trace] = []
    rest: list[Trace] = []
    for trace in log.traces:
        (matching if predicate.matches(trace) else rest).append(trace)
    return (
        EventLog(traces=tuple(matching), source_name=log.source_name),
        EventLog(traces=tuple(rest), source_name=log.source_name),
    )


# ---------------------------------------------------------------------------
# DFG comparison
# ---------------------------------------------------------------------------

def compare_dfgs(a: Dfg, b: Dfg, shift_threshold: float = 0.05) -> DfgComparison:
    """Contrast two DFGs.

    Edges present in exactly one graph yield only_in_a / only_in_b
    findings.  For shared edges, a frequency_shift is reported when the
    relative frequencies (edge frequency over the graph's total edge
    frequency) differ by more than shift_threshold, and a duration_shift
    when the mean durations differ relatively by more than the same
    threshold.  Findings are ordered by |relative_difference| descending.
    """
    if not 0.0 <= shift_threshold <= 1.0:
        raise ValueError(f"shift_threshold must be in [0, 1], got {shift_threshold}")
    total_a = sum(stats.frequency for stats in a.edges.values())
    total_b = sum(stats.frequency for stats in b.edges.values())
    findings: list[ComparisonFinding] = []
    for edge in set(a.edges) | set(b.edges):
        stats_a = a.edges.get(edge)
        stats_b = b.edges.get(edge)
        freq_a = stats_a.frequency if stats_a else 0
        freq_b = stats_b.frequency if stats_b else 0
        rel_a = freq_a / total_a if total_a else 0.0
        rel_b = freq_b / total_b if total_b else 0.0
        if stats_a and not stats_b:
            findings.append(
                ComparisonFinding(edge, freq_a, 0, rel_a, ONLY_IN_A,
                                  mean_dur_a=stats_a.mean_duration_seconds)
            )
            continue
        if stats_b and not stats_a:
            findings.append(
                ComparisonFinding(edge, 0, freq_b, -rel_b, ONLY_IN_B,
                                  mean_dur_b=stats_b.mean_duration_seconds)
            )
            continue
        assert stats_a is not None and stats_b is not None
        rel_diff = rel_a - rel_b
        if abs(rel_diff) > shift_threshold:
            findings.append(
                ComparisonFinding(edge, freq_a, freq_b, rel_diff, FREQUENCY_SHIFT,
                                  mean_dur_a=stats_a.mean_duration_seconds,
                                  mean_dur_b=stats_b.mean_duration_seconds)
            )
        dur_a = stats_a.mean_duration_seconds
        dur_b = stats_b.mean_duration_seconds
        scale = max(dur_a, dur_b)
        if scale > 0.0:
            dur_diff = (dur_a - dur_b) / scale
            if abs(dur_diff) > shift_threshold:
                findings.append(
                    ComparisonFinding(edge, freq_a, freq_b, dur_diff, DURATION_SHIFT,
                                      mean_dur_a=dur_a, mean_dur_b=dur_b)
                )
    findings.sort(key=lambda f: (-abs(f.relative_difference), f.edge, f.kind))
    return DfgComparison(findings=tuple(findings), total_a=total_a, total_b=total_b)
