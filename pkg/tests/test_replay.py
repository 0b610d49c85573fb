import random

import pytest

from conftest import random_machine, random_trace
from tracecheck.errors import CapExceeded, MachineNameMismatch
from tracecheck.machine import parse_machine
from tracecheck.replay import ReplayOptions, enumerate_runs, explain, replay
from tracecheck.trace_model import (
    OpEvent,
    OpTrace,
    intval,
    parse_op_trace,
    sym,
)

BT = """\
machine BT
var v : 0..3
init v := 0
op pick()
  pre v = 0
  choose c in {1, 2}
  eff v := c
end
op needtwo()
  pre v = 2
  eff v := 3
end
"""


def test_backtracking_is_required():
    # a greedy simulator that commits to the first choose value (1) gets
    # stuck; the search must revisit the other branch
    m = parse_machine(BT)
    trace = OpTrace((OpEvent("pick"), OpEvent("needtwo")))
    v = replay(m, trace)
    assert v.passed and len(v.final_states) == 1
    assert v.final_states[0]["v"] == 3


def test_earliest_failure_index_and_diagnosis():
    m = parse_machine(BT)
    trace = OpTrace((OpEvent("pick"), OpEvent("pick")))
    v = replay(m, trace)
    assert v.kind == "Fail" and v.index == 1
    assert v.reason.kind == "NotEnabled"
    assert v.diagnosis.attempted == OpEvent("pick")
    text = explain(m, v)
    assert "FAIL at step 1" in text and "NotEnabled" in text


def test_empty_trace_passes():
    m = parse_machine(BT)
    v = replay(m, OpTrace(()))
    assert v.passed and len(v.final_states) == 1


def test_output_mismatch_vs_not_enabled():
    m = parse_machine(
        "machine M\nvar v : 0..3\ninit v := 0\n"
        "op roll() -> (r : 0..3)\n  pre v = 0\n  choose c in {1, 2}\n"
        "  eff v := c\n  out r := c\nend\n"
    )
    ok = replay(m, parse_op_trace("roll() --> (2).\n"))
    assert ok.passed
    bad_out = replay(m, parse_op_trace("roll() --> (3).\n"))
    assert bad_out.kind == "Fail" and bad_out.reason.kind == "OutputMismatch"
    wild = replay(m, parse_op_trace("roll() --> (_).\n"))
    assert wild.passed and len(wild.final_states) == 2
    not_enabled = replay(m, parse_op_trace("roll() --> (1).\nroll() --> (1).\n"))
    assert not_enabled.kind == "Fail" and not_enabled.reason.kind == "NotEnabled"


def test_invariant_violation_wins_over_output_mismatch():
    # both a violating successor and a mismatching output exist: the
    # violation is reported
    m = parse_machine(
        "machine M\nvar v : 0..3\ninit v := 0\ninvariant c9 : v /= 2\n"
        "op go() -> (r : 0..3)\n  choose c in {1, 2}\n  eff v := c\n  out r := c\nend\n"
    )
    v = replay(m, parse_op_trace("go() --> (2).\n"))
    assert v.kind == "Fail"
    assert v.reason.kind == "InvariantViolated" and v.reason.clauses == ("c9",)
    assert v.reason.render() == "InvariantViolated{c9}"


def test_initially_violated_invariant_fails_at_index_zero():
    m = parse_machine(
        "machine M\nvar v : 0..3\ninit v := 2\ninvariant c1 : v /= 2\n"
        "op go()\n  eff v := 0\nend\n"
    )
    v = replay(m, OpTrace((OpEvent("go"),)))
    assert v.kind == "Fail" and v.index == 0
    assert v.reason.render() == "InvariantViolated{c1}"


def test_unknown_op_fails():
    m = parse_machine(BT)
    v = replay(m, OpTrace((OpEvent("nosuch"),)))
    assert v.kind == "Fail" and v.reason.kind == "UnknownOp"


def test_machine_name_mismatch():
    m = parse_machine(BT)
    with pytest.raises(MachineNameMismatch):
        replay(m, OpTrace((), machine_name="Other"))
    assert replay(m, OpTrace((), machine_name="BT")).passed


def test_expansion_cap_gives_inconclusive():
    m = parse_machine(BT)
    trace = OpTrace((OpEvent("pick"), OpEvent("needtwo")))
    v = replay(m, trace, ReplayOptions(max_expansions=1))
    assert v.kind == "Inconclusive"


def test_options_from_env(monkeypatch):
    monkeypatch.setenv("TRACECHECK_MAX_EXPANSIONS", "123")
    assert ReplayOptions.from_env().max_expansions == 123
    monkeypatch.delenv("TRACECHECK_MAX_EXPANSIONS")
    assert ReplayOptions.from_env().max_expansions == 10**6


def test_pass_prefix_monotone(agency, golden_trace_text):
    trace = parse_op_trace(golden_trace_text)
    assert replay(agency, trace).passed
    for k in range(len(trace.steps) + 1):
        prefix = OpTrace(trace.steps[:k], trace.machine_name, trace.has_init)
        assert replay(agency, prefix).passed


def test_replay_deterministic(agency, golden_trace_text):
    trace = parse_op_trace(golden_trace_text)
    a = replay(agency, trace)
    b = replay(agency, trace)
    assert (a.kind, a.final_states, a.expansions) == (b.kind, b.final_states, b.expansions)


# ------------------------------------------------------------ oracle


def oracle_passed(trace, runs):
    """Membership of `trace` in the brute-forced run set."""
    for run in runs:
        if len(run.steps) != len(trace.steps):
            continue
        if all(
            r.name == t.name
            and r.args == t.args
            and (t.outs is None or t.outs == r.outs)
            for r, t in zip(run.steps, trace.steps)
        ):
            return True
    return False


def test_replay_agrees_with_enumeration_oracle():
    rng = random.Random(1234)
    machines = 0
    while machines < 12:
        text = random_machine(rng)
        m = parse_machine(text)
        try:
            runs = enumerate_runs(m, 6, cap=150_000)
        except CapExceeded:
            continue
        machines += 1
        for _ in range(40):
            trace = random_trace(rng, m, runs)
            got = replay(m, trace).passed
            want = oracle_passed(trace, runs)
            assert got == want, f"disagreement on\n{text}\ntrace={trace}"


def test_enumerate_runs_includes_prefixes():
    m = parse_machine(BT)
    runs = enumerate_runs(m, 3)
    assert OpTrace(()) in runs
    assert any(len(r.steps) == 2 for r in runs)
    for r in runs:
        for k in range(len(r.steps)):
            assert OpTrace(r.steps[:k]) in runs
