"""Command-line entry point.

One executable with subcommands covering the whole pipeline:
replay, ltl, trace2ltl, admits, translate, simulate, check-pipeline.

Exit codes: 0 pass/success, 1 check failed, 2 inconclusive,
64 usage error, 65 data or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import agency_sim, ltl, translate
from .errors import CapExceeded, ConfigError, TracecheckError
from .machine import parse_machine
from .replay import ReplayOptions, explain, replay
from .trace_model import (
    dedup_consecutive,
    finitize,
    parse_op_trace,
    parse_records,
    project_ops,
    render_op_trace,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64
EXIT_DATA = 65

SCHEMA_VERSION = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _report(args, command, results, exit_code):
    if getattr(args, "report", "text") == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "tool": "tracecheck",
            "command": command,
            "exit_code": exit_code,
            "results": results,
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for r in results:
            print(r["text"])
    return exit_code


def _replay_options(args):
    opts = ReplayOptions.from_env()
    if getattr(args, "max_expansions", None) is not None:
        opts = ReplayOptions(args.max_expansions)
    return opts


def _verdict_result(label, m, verdict):
    return {
        "label": label,
        "verdict": verdict.kind,
        "index": verdict.index,
        "reason": verdict.reason.render() if verdict.reason else None,
        "final_states": len(verdict.final_states),
        "expansions": verdict.expansions,
        "text": f"{label}: {explain(m, verdict)}",
    }


def _worst_exit(verdicts):
    kinds = {v.kind for v in verdicts}
    if "Fail" in kinds:
        return EXIT_FAIL
    if "Inconclusive" in kinds:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def _cmd_replay(args):
    m = parse_machine(_read(args.machine))
    opts = _replay_options(args)
    traces = [(path, parse_op_trace(_read(path))) for path in args.trace]

    def run(item):
        path, trace = item
        return path, replay(m, trace, opts)

    if args.jobs > 1 and len(traces) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            done = list(pool.map(run, traces))
    else:
        done = [run(t) for t in traces]
    results = [_verdict_result(path, m, v) for path, v in done]
    return _report(args, "replay", results, _worst_exit([v for _, v in done]))


def _cmd_ltl(args):
    trace = ltl.parse_state_trace(_read(args.trace))
    defs = ltl.parse_defs(_read(args.defs)) if args.defs else None
    formula = ltl.parse_formula(args.formula, defs)
    holds = ltl.eval_finite(formula, trace, defs)
    result = {
        "label": args.trace,
        "formula": ltl.render_formula(formula),
        "holds": holds,
        "text": f"{args.trace}: {ltl.render_formula(formula)} "
        + ("holds" if holds else "does not hold"),
    }
    return _report(args, "ltl", [result], EXIT_PASS if holds else EXIT_FAIL)


def _cmd_trace2ltl(args):
    props = [p.strip() for p in args.props.split(",") if p.strip()]
    formula = ltl.trace_to_formula(props)
    text = ltl.render_formula(formula)
    result = {"props": props, "formula": text, "text": text}
    return _report(args, "trace2ltl", [result], EXIT_PASS)


def _cmd_admits(args):
    m = parse_machine(_read(args.machine))
    preds = ltl.parse_machine_predicates(m, _read(args.defs))
    names = [name for name, _ in preds]
    cap = args.max_expansions
    if cap is None:
        cap = ReplayOptions.from_env().max_expansions
    try:
        witness = ltl.machine_admits(m, [fn for _, fn in preds], args.bound, cap)
    except CapExceeded:
        result = {"milestones": names, "witness": None,
                  "text": "inconclusive: expansion cap reached"}
        return _report(args, "admits", [result], EXIT_INCONCLUSIVE)
    if witness is None:
        result = {"milestones": names, "witness": None,
                  "text": f"no run within bound {args.bound} visits: {', '.join(names)}"}
        return _report(args, "admits", [result], EXIT_FAIL)
    rendered = render_op_trace(witness)
    result = {
        "milestones": names,
        "witness": [ev.render() for ev in witness.steps],
        "text": f"witness ({len(witness.steps)} steps):\n{rendered}".rstrip(),
    }
    return _report(args, "admits", [result], EXIT_PASS)


def _cmd_translate(args):
    rules = translate.parse_rules(_read(args.rules))
    records = parse_records(_read(args.records))
    trace = translate.apply_rules(rules, records)
    text = ltl.render_state_trace(trace)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        result = {"blocks": len(trace), "out": args.out,
                  "text": f"wrote {len(trace)} blocks to {args.out}"}
    else:
        result = {"blocks": len(trace), "out": None, "text": text.rstrip()}
    return _report(args, "translate", [result], EXIT_PASS)


def _cmd_simulate(args):
    cfg = agency_sim.load_config(_read(args.config))
    records, optraces, statetrace = agency_sim.simulate(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    written = []

    def emit(name, text):
        path = os.path.join(args.out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        written.append(path)

    emit("records.jsonl", agency_sim.render_records(records))
    for k, trace in enumerate(optraces.values(), start=1):
        emit(f"session-{k}.tr", render_op_trace(trace))
    emit("states.states", ltl.render_state_trace(statetrace))
    summary = (
        f"{len(records)} records, {len(optraces)} sessions, "
        f"{len(statetrace)} state blocks -> {args.out_dir}"
    )
    result = {"records": len(records), "sessions": len(optraces),
              "state_blocks": len(statetrace), "files": written,
              "faults": sorted(cfg.faults), "text": summary}
    return _report(args, "simulate", [result], EXIT_PASS)


def split_sessions(records):
    """Group records by session_id, first-appearance order, seq order kept."""
    groups = {}
    for rec in records:
        groups.setdefault(rec.session_id, []).append(rec)
    return groups


def _cmd_check_pipeline(args):
    m = parse_machine(_read(args.machine))
    opts = _replay_options(args)
    records = parse_records(_read(args.records))
    results = []
    verdicts = []
    for sid, group in split_sessions(records).items():
        finitized, fmap = finitize(group, args.finitize_key, args.finitize_prefix)
        trace = project_ops(finitized)
        if args.dedup:
            trace = dedup_consecutive(trace)
        verdict = replay(m, trace, opts)
        verdicts.append(verdict)
        entry = _verdict_result(f"session {sid}", m, verdict)
        entry["steps"] = len(trace)
        entry["finitization"] = dict(fmap.entries)
        results.append(entry)
    if not results:
        results = [{"label": None, "verdict": "Pass", "text": "no sessions found"}]
    return _report(args, "check-pipeline", results, _worst_exit(verdicts))


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="tracecheck", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, machine=False):
        p.add_argument("--report", choices=("text", "json"), default="text")
        if machine:
            p.add_argument("--machine", required=True)
            p.add_argument("--max-expansions", type=int, default=None)

    p = sub.add_parser("replay", help="replay operation traces against a machine")
    common(p, machine=True)
    p.add_argument("--trace", required=True, action="append",
                   help="operation trace file (repeatable)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("ltl", help="evaluate a temporal formula on a state trace")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--defs", default=None)
    p.add_argument("--formula", required=True)
    p.set_defaults(fn=_cmd_ltl)

    p = sub.add_parser("trace2ltl", help="render an eventually-chain from milestones")
    common(p)
    p.add_argument("--props", required=True, help="comma-separated milestone names")
    p.set_defaults(fn=_cmd_trace2ltl)

    p = sub.add_parser("admits", help="search for a run visiting milestones in order")
    common(p, machine=True)
    p.add_argument("--defs", required=True)
    p.add_argument("--bound", type=int, required=True)
    p.set_defaults(fn=_cmd_admits)

    p = sub.add_parser("translate", help="translate records to a state trace")
    common(p)
    p.add_argument("--rules", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_translate)

    p = sub.add_parser("simulate", help="generate a travel-agency trace corpus")
    common(p)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("check-pipeline",
                       help="records -> project -> dedup -> finitize -> replay")
    common(p, machine=True)
    p.add_argument("--records", required=True)
    p.add_argument("--dedup", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--finitize-key", default="session_id")
    p.add_argument("--finitize-prefix", default="ss")
    p.set_defaults(fn=_cmd_check_pipeline)

    return top


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TracecheckError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
