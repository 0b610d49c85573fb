"""Trace data types, trace-file parsing and normalization.

An operation trace is a sequence of steps ``name(arg,...) [--> (out,...)] .``
with optional ``machine('Name').`` / ``initialise_machine.`` header lines.
Raw instrumentation records arrive as JSON-lines and are projected,
deduplicated and finitized before checking.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import (
    DuplicateSeq,
    ParseError,
    SchemaError,
    UnexpectedHeader,
    UnknownField,
)

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_INT_RE = re.compile(r"-?[0-9]+(?![A-Za-z0-9_])")
# raw identifiers (e.g. 32-hex session tokens) may start with a digit
_TOKEN_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Value:
    """One trace-level value: integer, boolean, symbol or the `_` wildcard."""

    kind: str  # "int" | "bool" | "sym" | "wild"
    val: object = None

    def render(self) -> str:
        if self.kind == "wild":
            return "_"
        if self.kind == "bool":
            return "true" if self.val else "false"
        return str(self.val)


WILDCARD = Value("wild")


def sym(name: str) -> Value:
    return Value("sym", name)


def intval(n: int) -> Value:
    return Value("int", n)


@dataclass(frozen=True)
class OpEvent:
    """One operation step: a name, input arguments and optional outputs."""

    name: str
    args: tuple[Value, ...] = ()
    outs: tuple[Value, ...] | None = None

    def render(self) -> str:
        text = self.name + "(" + ",".join(v.render() for v in self.args) + ")"
        if self.outs is not None:
            text += " --> (" + ",".join(v.render() for v in self.outs) + ")"
        return text


@dataclass(frozen=True)
class OpTrace:
    """A parsed operation trace with optional header information."""

    steps: tuple[OpEvent, ...] = ()
    machine_name: str | None = None
    has_init: bool = False

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class TraceRecord:
    """One raw instrumentation event as ingested from a JSON-lines log."""

    seq: int
    trace_id: str = "none"
    session_id: str = "none"
    user_id: str = "none"
    book_type: str = "none"
    cc_type: str = "none"
    component: str = "none"
    bop_name: str = "none"
    extras: tuple = ()

    SYMBOL_FIELDS = (
        "trace_id",
        "session_id",
        "user_id",
        "book_type",
        "cc_type",
        "component",
    )


@dataclass(frozen=True)
class FinitizationMap:
    """Bijection raw-token -> prefixN, in first-appearance order."""

    key: str
    prefix: str
    entries: tuple[tuple[str, str], ...] = ()

    def as_dict(self) -> dict[str, str]:
        return dict(self.entries)


class _Cursor:
    """Tiny scanning helper over a single line of trace text."""

    def __init__(self, text, line_no=1):
        self.text = text
        self.pos = 0
        self.line_no = line_no

    def error(self, message):
        raise ParseError(message, self.line_no, self.pos + 1)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, literal):
        self.skip_ws()
        if not self.text.startswith(literal, self.pos):
            self.error(f"expected {literal!r}")
        self.pos += len(literal)

    def try_eat(self, literal):
        self.skip_ws()
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            return True
        return False

    def ident(self):
        self.skip_ws()
        m = _IDENT_RE.match(self.text, self.pos)
        if not m:
            self.error("expected identifier")
        self.pos = m.end()
        return m.group()

    def value(self) -> Value:
        self.skip_ws()
        if self.try_eat("_"):
            return WILDCARD
        m = _INT_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return intval(int(m.group()))
        m = _TOKEN_RE.match(self.text, self.pos)
        if not m:
            self.error("expected a value")
        self.pos = m.end()
        name = m.group()
        if name == "true":
            return Value("bool", True)
        if name == "false":
            return Value("bool", False)
        return sym(name)

    def value_list(self, close=")"):
        vals = []
        if self.peek() == close:
            return vals
        vals.append(self.value())
        while self.try_eat(","):
            vals.append(self.value())
        return vals

    def at_end(self):
        self.skip_ws()
        return self.pos >= len(self.text)


def _parse_event_cursor(cur: _Cursor, allow_wild_args=False) -> OpEvent:
    # Compatibility with the animator-history nesting '-->'(op(args),out) and
    # '-->(op(args,_)): unwrap, then pull trailing wildcards into outs.
    if cur.peek() == "'":
        cur.eat("'")
        cur.eat("-->")
        cur.try_eat("'")
        cur.eat("(")
        inner = _parse_event_cursor(cur, allow_wild_args=True)
        extra_outs = []
        while cur.try_eat(","):
            extra_outs.append(cur.value())
        cur.eat(")")
        args = list(inner.args)
        outs = list(inner.outs or ())
        while args and args[-1].kind == "wild":
            outs.insert(0, args.pop())
        outs.extend(extra_outs)
        return OpEvent(inner.name, tuple(args), tuple(outs) if outs else None)

    name = cur.ident()
    args = []
    if cur.try_eat("("):
        args = cur.value_list()
        cur.eat(")")
    outs = None
    if cur.try_eat("-->"):
        cur.eat("(")
        outs = tuple(cur.value_list())
        cur.eat(")")
    if not allow_wild_args:
        for v in args:
            if v.kind == "wild":
                cur.error("wildcard is only legal in outputs")
    return OpEvent(name, tuple(args), outs)


def parse_op_event(text: str, line_no=1) -> OpEvent:
    """Parse a single event like ``enterCard(ss1)`` or ``f(x) --> (_)``."""
    cur = _Cursor(text.strip(), line_no)
    ev = _parse_event_cursor(cur)
    cur.try_eat(".")
    if not cur.at_end():
        cur.error("trailing text after event")
    return ev


_MACHINE_HEADER_RE = re.compile(r"machine\('([A-Za-z][A-Za-z0-9_]*)'\)\s*\.?\s*$")


def parse_op_trace(text: str) -> OpTrace:
    """Parse an operation-trace file into an OpTrace."""
    steps: list[OpEvent] = []
    machine_name = None
    has_init = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _MACHINE_HEADER_RE.match(line)
        if m:
            if steps:
                raise UnexpectedHeader("machine header after a step", line_no, 1)
            machine_name = m.group(1)
            continue
        if line.rstrip(".").strip() == "initialise_machine":
            if steps:
                raise UnexpectedHeader("initialise_machine after a step", line_no, 1)
            has_init = True
            continue
        cur = _Cursor(line, line_no)
        ev = _parse_event_cursor(cur)
        cur.eat(".")
        if not cur.at_end():
            cur.error("trailing text after step")
        steps.append(ev)
    return OpTrace(tuple(steps), machine_name, has_init)


def render_op_trace(trace: OpTrace) -> str:
    """Render an OpTrace back to its file form (parse/render round-trips)."""
    lines = []
    if trace.machine_name is not None:
        lines.append(f"machine('{trace.machine_name}').")
    if trace.has_init:
        lines.append("initialise_machine.")
    for ev in trace.steps:
        lines.append(ev.render() + ".")
    return "\n".join(lines) + ("\n" if lines else "")


_MANDATORY = ("seq", "bop_name")


def parse_records(jsonl: str) -> list[TraceRecord]:
    """Parse JSON-lines records, sorted by seq; duplicate seq is an error."""
    records = []
    seen = set()
    for line_no, raw in enumerate(jsonl.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON record: {exc.msg}", line_no) from exc
        if not isinstance(obj, dict):
            raise ParseError("record line is not a JSON object", line_no)
        for name in _MANDATORY:
            if name not in obj:
                raise SchemaError(f"record on line {line_no} is missing {name!r}")
        seq = obj["seq"]
        if not isinstance(seq, int):
            raise SchemaError(f"seq must be an integer (line {line_no})")
        if seq in seen:
            raise DuplicateSeq(f"duplicate seq {seq} (line {line_no})")
        seen.add(seq)
        known = {"seq", "bop_name", *TraceRecord.SYMBOL_FIELDS}
        extras = tuple(sorted((k, str(v)) for k, v in obj.items() if k not in known))
        records.append(
            TraceRecord(
                seq=seq,
                bop_name=str(obj["bop_name"]),
                extras=extras,
                **{f: str(obj.get(f, "none")) for f in TraceRecord.SYMBOL_FIELDS},
            )
        )
    records.sort(key=lambda r: r.seq)
    return records


def project_ops(records: list[TraceRecord]) -> OpTrace:
    """Project each record's bop_name to an OpEvent, order preserved."""
    steps = []
    for rec in records:
        try:
            steps.append(parse_op_event(rec.bop_name))
        except ParseError as exc:
            raise ParseError(f"bad bop_name in record seq {rec.seq}: {exc}") from exc
    return OpTrace(tuple(steps))


def dedup_consecutive(trace: OpTrace) -> OpTrace:
    """Drop steps structurally identical to their immediate predecessor."""
    steps = []
    for ev in trace.steps:
        if not steps or steps[-1] != ev:
            steps.append(ev)
    return OpTrace(tuple(steps), trace.machine_name, trace.has_init)


def finitize(
    records: list[TraceRecord], key: str, prefix: str
) -> tuple[list[TraceRecord], FinitizationMap]:
    """Replace each distinct value of `key` by prefixN, first-appearance order.

    The replacement is also applied to bop_name arguments that textually
    equal a replaced raw token.
    """
    if key not in TraceRecord.SYMBOL_FIELDS:
        raise UnknownField(f"{key!r} is not a finitizable record field")
    mapping: dict[str, str] = {}
    out = []
    for rec in records:
        raw = getattr(rec, key)
        if raw not in mapping:
            mapping[raw] = f"{prefix}{len(mapping) + 1}"
        token = mapping[raw]
        # whole-token textual replacement so all-digit raw ids work too
        bop = re.sub(
            rf"(?<![A-Za-z0-9_]){re.escape(raw)}(?![A-Za-z0-9_])", token, rec.bop_name
        )
        fields = {f: getattr(rec, f) for f in TraceRecord.SYMBOL_FIELDS}
        fields[key] = token
        out.append(TraceRecord(seq=rec.seq, bop_name=bop, extras=rec.extras, **fields))
    return out, FinitizationMap(key, prefix, tuple(mapping.items()))
