import random

import pytest
from importlib.resources import files

from tracecheck.machine import parse_machine
from tracecheck.trace_model import OpEvent, OpTrace, Value

DATA = files("tracecheck") / "data"


def data_text(name: str) -> str:
    return (DATA / name).read_text()


@pytest.fixture(scope="session")
def agency():
    return parse_machine(data_text("agency.mch"))


@pytest.fixture(scope="session")
def golden_trace_text():
    return data_text("booking_story.tr")


# ------------------------------------------------ random machine generator

_PRE_BOOL = ["{v}", "!{v}"]
_PRE_INT = ["{v} < 2", "{v} = 0", "{v} > 0", "{v} /= 1"]
_EFF_BOOL = ["{v} := !{v}", "{v} := true", "{v} := false"]
_EFF_INT = ["{v} := ite({v} < 2, {v} + 1, 0)", "{v} := 0", "{v} := ite({v} > 0, {v} - 1, 2)"]


def random_machine(rng: random.Random) -> str:
    """A small well-typed machine: <=4 vars, <=3 ops, branch factor <=3."""
    n_vars = rng.randint(1, 4)
    lines = ["machine Rand"]
    vars_ = []
    for i in range(n_vars):
        name = f"v{i}"
        kind = rng.choice(("bool", "int"))
        vars_.append((name, kind))
        lines.append(f"var {name} : " + ("bool" if kind == "bool" else "0..2"))
    for name, kind in vars_:
        if kind == "bool":
            init = rng.choice(("true", "false"))
        else:
            init = str(rng.randint(0, 2))
        if rng.random() < 0.3 and kind == "int":
            opts = sorted(rng.sample((0, 1, 2), rng.randint(1, 3)))
            lines.append(f"init choose {name} in {{{', '.join(map(str, opts))}}}")
        else:
            lines.append(f"init {name} := {init}")
    if rng.random() < 0.5:
        name, kind = rng.choice(vars_)
        if kind == "bool":
            lines.append(f"invariant c1 : {name} || !{name}")
        else:
            lines.append(f"invariant c1 : {name} /= {rng.randint(0, 2)}")
    for k in range(rng.randint(1, 3)):
        has_out = rng.random() < 0.4
        iv = [n for n, t in vars_ if t == "int"]
        header = f"op op{k}()"
        if has_out and iv:
            header += " -> (r : 0..2)"
        else:
            has_out = False
        lines.append(header)
        name, kind = rng.choice(vars_)
        if rng.random() < 0.7:
            tmpl = rng.choice(_PRE_BOOL if kind == "bool" else _PRE_INT)
            lines.append("  pre " + tmpl.format(v=name))
        use_choose = rng.random() < 0.5 and iv
        if use_choose:
            opts = sorted(rng.sample((0, 1, 2), rng.randint(1, 3)))
            lines.append(f"  choose c in {{{', '.join(map(str, opts))}}}")
        for ename, ekind in rng.sample(vars_, rng.randint(1, len(vars_))):
            if use_choose and ekind == "int" and rng.random() < 0.5:
                lines.append(f"  eff {ename} := c")
            else:
                tmpl = rng.choice(_EFF_BOOL if ekind == "bool" else _EFF_INT)
                lines.append("  eff " + tmpl.format(v=ename))
        if has_out:
            lines.append(f"  out r := {rng.choice(iv)}")
        lines.append("end")
    return "\n".join(lines) + "\n"


def random_event_alphabet(m):
    """Every (name, args) an op of `m` can be invoked with."""
    from tracecheck.machine import _param_bindings, _py_to_value

    out = []
    for name, op in m.ops.items():
        for binding in _param_bindings(op.params):
            out.append((name, tuple(_py_to_value(v) for _, v in binding)))
    return out


def random_trace(rng, m, runs, max_len=6) -> OpTrace:
    """Half the time a known run (or a mutation of one), else random events."""
    runs = list(runs)
    if runs and rng.random() < 0.5:
        base = rng.choice(runs)
        steps = list(base.steps)
        if steps and rng.random() < 0.4:  # mutate to get near-miss negatives
            i = rng.randrange(len(steps))
            ev = steps[i]
            if ev.outs and rng.random() < 0.5:
                outs = list(ev.outs)
                j = rng.randrange(len(outs))
                outs[j] = Value("int", (outs[j].val or 0) + 1)
                steps[i] = OpEvent(ev.name, ev.args, tuple(outs))
            else:
                steps.insert(i, rng.choice(steps))
        return OpTrace(tuple(steps[:max_len]))
    alphabet = random_event_alphabet(m)
    steps = []
    for _ in range(rng.randint(0, max_len)):
        name, args = rng.choice(alphabet)
        steps.append(OpEvent(name, args))
    return OpTrace(tuple(steps))
