"""Conformance replay of operation traces against a machine.

The search keeps the full frontier of states consistent with the prefix
replayed so far (equivalent to exhaustive backtracking, but each reachable
state is expanded at most once per step), checks invariants on every
visited state and reports the earliest stuck step with a diagnosis.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import ArityMismatch, CapExceeded, DomainError, MachineNameMismatch
from .machine import Machine, State, check_invariants, enabled_events, initial_states, step
from .trace_model import OpEvent, OpTrace

DEFAULT_MAX_EXPANSIONS = 10**6


@dataclass
class ReplayOptions:
    max_expansions: int = DEFAULT_MAX_EXPANSIONS

    @classmethod
    def from_env(cls):
        cap = os.environ.get("TRACECHECK_MAX_EXPANSIONS")
        return cls(int(cap)) if cap else cls()


@dataclass(frozen=True)
class Diagnosis:
    frontier: tuple  # states surviving after step index-1
    enabled_here: tuple  # per frontier state: tuple of (opname, args)
    attempted: OpEvent | None


@dataclass(frozen=True)
class FailReason:
    kind: str  # NotEnabled | OutputMismatch | InvariantViolated | UnknownOp
    clauses: tuple[str, ...] = ()

    def render(self):
        if self.kind == "InvariantViolated":
            return f"InvariantViolated{{{', '.join(self.clauses)}}}"
        return self.kind


@dataclass(frozen=True)
class Verdict:
    kind: str  # Pass | Fail | Inconclusive
    final_states: tuple = ()
    index: int | None = None
    reason: FailReason | None = None
    diagnosis: Diagnosis | None = None
    expansions: int = 0

    @property
    def passed(self):
        return self.kind == "Pass"


def replay(m: Machine, trace: OpTrace, opts: ReplayOptions | None = None) -> Verdict:
    """Decide whether `trace` is a feasible, invariant-clean run of `m`."""
    opts = opts or ReplayOptions()
    if trace.machine_name is not None and trace.machine_name != m.name:
        raise MachineNameMismatch(
            f"trace is for {trace.machine_name!r}, machine is {m.name!r}"
        )
    expansions = 0
    raw_init = initial_states(m)
    frontier: dict[State, None] = {}
    init_violations: set[str] = set()
    for s in raw_init:
        bad = check_invariants(m, s)
        if bad:
            init_violations.update(bad)
        else:
            frontier[s] = None
    if not frontier:
        return Verdict(
            "Fail",
            index=0,
            reason=FailReason("InvariantViolated", tuple(sorted(init_violations))),
            diagnosis=_diagnose(m, raw_init, None),
        )

    # long traces revisit the same (state, event) pairs constantly; memoize
    step_cache: dict = {}
    inv_cache: dict = {}

    def cached_step(s, event):
        key = (s, event)
        hit = step_cache.get(key)
        if hit is None:
            try:
                hit = step(m, s, event)
            except (ArityMismatch, DomainError):
                hit = []
            step_cache[key] = hit
        return hit

    def cached_invariants(s):
        hit = inv_cache.get(s)
        if hit is None:
            hit = check_invariants(m, s)
            inv_cache[s] = hit
        return hit

    for idx, event in enumerate(trace.steps):
        if event.name not in m.ops:
            return Verdict(
                "Fail",
                index=idx,
                reason=FailReason("UnknownOp"),
                diagnosis=_diagnose(m, list(frontier), event),
                expansions=expansions,
            )
        next_frontier: dict[State, None] = {}
        saw_enabled = False
        saw_output_match = False
        violated: set[str] = set()
        stripped = _strip_outs(event)
        for s in frontier:
            unfiltered = cached_step(s, stripped)
            expansions += len(unfiltered) or 1
            if expansions > opts.max_expansions:
                return Verdict("Inconclusive", expansions=expansions)
            if unfiltered:
                saw_enabled = True
            for succ, outs in unfiltered:
                if event.outs is not None and not _outs_ok(event.outs, outs):
                    continue
                saw_output_match = True
                bad = cached_invariants(succ)
                if bad:
                    violated.update(bad)
                else:
                    next_frontier[succ] = None
        if not next_frontier:
            if violated:
                reason = FailReason("InvariantViolated", tuple(sorted(violated)))
            elif saw_enabled and not saw_output_match:
                reason = FailReason("OutputMismatch")
            else:
                reason = FailReason("NotEnabled")
            return Verdict(
                "Fail",
                index=idx,
                reason=reason,
                diagnosis=_diagnose(m, list(frontier), event),
                expansions=expansions,
            )
        frontier = next_frontier
    return Verdict("Pass", final_states=tuple(frontier), expansions=expansions)


def _strip_outs(event: OpEvent) -> OpEvent:
    # step() filters on outs itself, but replay needs to distinguish
    # "not enabled" from "enabled with wrong outputs", so filter here.
    return OpEvent(event.name, event.args, None)


def _outs_ok(declared, produced):
    if len(declared) != len(produced):
        return False
    return all(d.kind == "wild" or d == p for d, p in zip(declared, produced))


def _diagnose(m, frontier, event):
    frontier = tuple(frontier)
    enabled = tuple(tuple(enabled_events(m, s)) for s in frontier)
    return Diagnosis(frontier, enabled, event)


def enumerate_runs(m: Machine, depth: int, cap: int = 100_000) -> set[OpTrace]:
    """All invariant-clean runs of length <= depth, with concrete args/outs.

    Brute-force path enumeration; intended as a testing oracle on toy
    machines. Raises CapExceeded past `cap` collected runs.
    """
    runs: set[OpTrace] = set()
    starts = [s for s in initial_states(m) if not check_invariants(m, s)]

    def emit(steps):
        if len(runs) >= cap:
            raise CapExceeded("enumerate_runs cap exceeded", partial_count=len(runs))
        runs.add(OpTrace(tuple(steps)))

    def go(s, steps):
        emit(steps)
        if len(steps) >= depth:
            return
        for opname, args in _all_events(m):
            for succ, outs in step(m, s, OpEvent(opname, args)):
                if check_invariants(m, succ):
                    continue
                steps.append(OpEvent(opname, args, outs))
                go(succ, steps)
                steps.pop()

    for s in starts:
        go(s, [])
    return runs


def _all_events(m: Machine):
    from .machine import _param_bindings, _py_to_value

    for name, op in m.ops.items():
        for binding in _param_bindings(op.params):
            yield name, tuple(_py_to_value(v) for _, v in binding)


def explain(m: Machine, v: Verdict) -> str:
    """Stable human-readable report for a verdict."""
    if v.kind == "Pass":
        k = len(v.final_states)
        return f"PASS ({k} final state{'s' if k != 1 else ''})"
    if v.kind == "Inconclusive":
        return f"INCONCLUSIVE (expansion cap reached after {v.expansions} expansions)"
    lines = [f"FAIL at step {v.index}: {v.reason.render()}"]
    d = v.diagnosis
    if d is not None:
        if d.attempted is not None:
            lines.append(f"  attempted: {d.attempted.render()}")
        if v.reason.kind == "InvariantViolated":
            for cid in v.reason.clauses:
                src = m.invariants[cid][2]
                lines.append(f"  clause {cid}: {src}")
        for i, (state, enabled) in enumerate(zip(d.frontier, d.enabled_here)):
            shown = ", ".join(
                f"{name}({','.join(a.render() for a in args)})" for name, args in enabled
            )
            lines.append(f"  frontier state {i}: enabled [{shown}]")
    return "\n".join(lines)
