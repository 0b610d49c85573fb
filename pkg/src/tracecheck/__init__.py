"""Trace-conformance toolkit: replay operation traces against guarded-command
abstract machines, check finite-trace temporal-logic properties, and generate
test corpora with a travel-agency simulator."""

from .errors import TracecheckError
from .expr import parse_expr_text
from .ltl import (
    PropDefs,
    StateTrace,
    eval_finite,
    machine_admits,
    parse_defs,
    parse_formula,
    parse_machine_predicates,
    parse_state_trace,
    render_formula,
    render_state_trace,
    trace_to_formula,
)
from .machine import (
    Machine,
    check_invariants,
    enabled_events,
    initial_states,
    parse_machine,
    render_machine,
    step,
)
from .replay import ReplayOptions, Verdict, enumerate_runs, explain, replay
from .trace_model import (
    FinitizationMap,
    OpEvent,
    OpTrace,
    TraceRecord,
    Value,
    dedup_consecutive,
    finitize,
    parse_op_event,
    parse_op_trace,
    parse_records,
    project_ops,
    render_op_trace,
)
from .translate import RuleSet, apply_rules, parse_rules
from .agency_sim import SimConfig, inject_fault_report, simulate

__version__ = "1.0.0"

__all__ = [
    "TracecheckError",
    "parse_expr_text",
    "PropDefs",
    "StateTrace",
    "eval_finite",
    "machine_admits",
    "parse_defs",
    "parse_formula",
    "parse_machine_predicates",
    "parse_state_trace",
    "render_formula",
    "render_state_trace",
    "trace_to_formula",
    "Machine",
    "check_invariants",
    "enabled_events",
    "initial_states",
    "parse_machine",
    "render_machine",
    "step",
    "ReplayOptions",
    "Verdict",
    "enumerate_runs",
    "explain",
    "replay",
    "FinitizationMap",
    "OpEvent",
    "OpTrace",
    "TraceRecord",
    "Value",
    "dedup_consecutive",
    "finitize",
    "parse_op_event",
    "parse_op_trace",
    "parse_records",
    "project_ops",
    "render_op_trace",
    "RuleSet",
    "apply_rules",
    "parse_rules",
    "SimConfig",
    "inject_fault_report",
    "simulate",
]
