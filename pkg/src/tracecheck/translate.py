"""Correspondence rules: implementation vocabulary -> model vocabulary.

Rule files use the line form
``corresponds([field,value], [[var,val], [var,val], ...])``
plus ``#`` comments and an optional ``policy pass-through|error`` header.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DuplicateLhs, ParseError, UnmatchedValue
from .ltl import StateTrace
from .trace_model import TraceRecord

_POLICIES = ("pass-through", "error")


@dataclass(frozen=True)
class CorrespondenceRule:
    field: str
    value: str
    assigns: tuple  # ((model_var, model_value), ...), non-empty


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[CorrespondenceRule, ...] = ()
    policy: str = "pass-through"

    def lookup(self, field, value):
        for rule in self.rules:
            if rule.field == field and rule.value == value:
                return rule
        # tolerate naming-convention drift between implementation field
        # names (cc_type) and rule files written in model style (cctype)
        flat = field.replace("_", "").lower()
        for rule in self.rules:
            if rule.field.replace("_", "").lower() == flat and rule.value == value:
                return rule
        return None


_RULE_RE = re.compile(
    r"corresponds\(\s*\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*,\s*([A-Za-z0-9_]+)\s*\]\s*,"
    r"\s*\[(.*)\]\s*\)\s*\.?\s*$"
)
_PAIR_RE = re.compile(r"\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*,\s*(-?[A-Za-z0-9_]+)\s*\]")


def _parse_value(token: str):
    try:
        return int(token)
    except ValueError:
        pass
    if token == "true":
        return True
    if token == "false":
        return False
    return token


def parse_rules(text: str) -> RuleSet:
    """Parse a correspondence-rule file into a RuleSet."""
    rules = []
    policy = "pass-through"
    seen = set()
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("policy"):
            policy = line[len("policy"):].strip()
            if policy not in _POLICIES:
                raise ParseError(f"unknown policy {policy!r}", no)
            continue
        m = _RULE_RE.match(line)
        if not m:
            raise ParseError("expected corresponds([field,value],[[var,val],...])", no)
        field, value, body = m.groups()
        assigns = tuple((var, _parse_value(val)) for var, val in _PAIR_RE.findall(body))
        if not assigns:
            raise ParseError("rule has an empty right-hand side", no)
        if (field, value) in seen:
            raise DuplicateLhs(f"duplicate rule for [{field},{value}]")
        seen.add((field, value))
        rules.append(CorrespondenceRule(field, value, assigns))
    return RuleSet(tuple(rules), policy)


def apply_rules(rs: RuleSet, records: list[TraceRecord]) -> StateTrace:
    """Translate records to a state trace, one block per record.

    Matched (field, value) pairs expand to their model assignments;
    unmatched pairs follow the rule-set policy. Fields holding the
    missing-value marker ``none`` emit nothing.
    """
    blocks = []
    for rec in records:
        block = {}
        for field in TraceRecord.SYMBOL_FIELDS:
            value = getattr(rec, field)
            if value == "none":
                continue
            rule = rs.lookup(field, value)
            if rule is not None:
                block.update(rule.assigns)
            elif rs.policy == "error":
                raise UnmatchedValue(field, value, rec.seq)
            else:
                block[field] = value
        blocks.append(block)
    return StateTrace(tuple(blocks))


def reverse_rules(rs: RuleSet, trace: StateTrace) -> list[set]:
    """Recover (field, value) pairs from translated blocks.

    Only meaningful for injective rule sets: a rule matches a block when
    every one of its model assignments is present.
    """
    out = []
    for block in trace.blocks:
        pairs = set()
        for rule in rs.rules:
            if all(block.get(var) == val for var, val in rule.assigns):
                pairs.add((rule.field, rule.value))
        out.append(pairs)
    return out
