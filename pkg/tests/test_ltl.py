import random

import pytest

from tracecheck import ltl
from tracecheck.errors import (
    CapExceeded,
    EmptyPropList,
    ParseError,
    UnboundVariable,
    UnknownAtom,
)
from tracecheck.ltl import (
    Alw,
    And,
    Atom,
    Cmp,
    Ev,
    Implies,
    Next,
    Not,
    Or,
    StateTrace,
    Until,
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
from tracecheck.machine import parse_machine
from tracecheck.replay import replay
from tracecheck.trace_model import OpEvent, OpTrace, intval


# --------------------------------------------------------- naive oracle


def naive(f, tr, i):
    """Direct recursive finite-trace semantics, no tables."""
    n = len(tr.blocks)
    b = tr.blocks[i]
    if isinstance(f, Atom):
        if f.name == "true":
            return True
        if f.name == "false":
            return False
        return bool(b[f.name])
    if isinstance(f, Cmp):
        l, r = b[f.var], f.value
        return {
            "=": l == r, "/=": l != r, "<": l < r,
            "<=": l <= r, ">": l > r, ">=": l >= r,
        }[f.op]
    if isinstance(f, Not):
        return not naive(f.x, tr, i)
    if isinstance(f, And):
        return naive(f.l, tr, i) and naive(f.r, tr, i)
    if isinstance(f, Or):
        return naive(f.l, tr, i) or naive(f.r, tr, i)
    if isinstance(f, Implies):
        return (not naive(f.l, tr, i)) or naive(f.r, tr, i)
    if isinstance(f, Next):
        return i + 1 < n and naive(f.x, tr, i + 1)
    if isinstance(f, Ev):
        return any(naive(f.x, tr, j) for j in range(i, n))
    if isinstance(f, Alw):
        return all(naive(f.x, tr, j) for j in range(i, n))
    if isinstance(f, Until):
        return any(
            naive(f.r, tr, j) and all(naive(f.l, tr, k) for k in range(i, j))
            for j in range(i, n)
        )
    raise AssertionError(f)


def random_formula(rng, depth):
    if depth == 0:
        return rng.choice(
            (Atom("p"), Atom("q"), Atom("r"), Atom("true"), Atom("false"),
             Cmp("n", rng.choice(("=", "/=", "<", "<=", ">", ">=")), rng.randint(0, 3)))
        )
    sub = lambda: random_formula(rng, depth - 1)
    ctor = rng.choice((Not, And, Or, Implies, Next, Ev, Alw, Until))
    if ctor in (Not, Next, Ev, Alw):
        return ctor(sub())
    return ctor(sub(), sub())


def random_trace(rng, max_len=8):
    n = rng.randint(1, max_len)
    return StateTrace(
        tuple(
            {
                "p": rng.random() < 0.5,
                "q": rng.random() < 0.5,
                "r": rng.random() < 0.5,
                "n": rng.randint(0, 3),
            }
            for _ in range(n)
        )
    )


def test_eval_matches_naive_oracle():
    rng = random.Random(99)
    for _ in range(800):
        f = random_formula(rng, rng.randint(0, 5))
        tr = random_trace(rng)
        assert eval_finite(f, tr) == naive(f, tr, 0)


def test_dualities_hold():
    rng = random.Random(5)
    for _ in range(300):
        f = random_formula(rng, 3)
        tr = random_trace(rng)
        assert eval_finite(Not(Ev(f)), tr) == eval_finite(Alw(Not(f)), tr)
        assert eval_finite(Ev(f), tr) == eval_finite(Until(Atom("true"), f), tr)


def test_strong_next_false_at_last_position():
    tr = StateTrace(({"p": True},))
    assert eval_finite(Next(Atom("p")), tr) is False
    assert eval_finite(Not(Next(Atom("p"))), tr) is True


# --------------------------------------------------------- parse/render


def test_parse_render_round_trip():
    rng = random.Random(17)
    for _ in range(300):
        f = random_formula(rng, 4)
        assert parse_formula(render_formula(f)) == f


def test_parse_spellings():
    assert parse_formula("<>p") == parse_formula("F p") == Ev(Atom("p"))
    assert parse_formula("[]p") == parse_formula("G p") == Alw(Atom("p"))
    assert parse_formula("n != 2") == parse_formula("n /= 2") == Cmp("n", "/=", 2)
    assert parse_formula("n == 2") == Cmp("n", "=", 2)
    assert parse_formula("p U q") == Until(Atom("p"), Atom("q"))
    assert parse_formula("p -> q -> r") == Implies(Atom("p"), Implies(Atom("q"), Atom("r")))


def test_eventually_chain_exact_rendering():
    f = trace_to_formula(["p1", "p2", "p3", "p4"])
    assert render_formula(f) == "<>(p1 && (<>(p2 && (<>(p3 && (<>p4))))))"
    assert render_formula(trace_to_formula(["p1"])) == "<>p1"
    with pytest.raises(EmptyPropList):
        trace_to_formula([])


def test_trace_to_formula_means_ordered_occurrence():
    # oracle: exists i1 <= i2 <= ... with each milestone true there
    rng = random.Random(3)
    props = ["p", "q", "r"]

    def ordered_occurrence(tr, names, i=0):
        if not names:
            return True
        return any(
            tr.blocks[j][names[0]] and ordered_occurrence(tr, names[1:], j)
            for j in range(i, len(tr.blocks))
        )

    for _ in range(300):
        tr = random_trace(rng)
        f = trace_to_formula(props)
        assert eval_finite(f, tr) == ordered_occurrence(tr, props)


# --------------------------------------------------------- defs & traces


def test_defs_parse_and_evaluate():
    defs = parse_defs("# c\ndefine busy (n > 0 && p)\ndefine idle (!p)\n")
    tr = StateTrace(({"n": 1, "p": True}, {"n": 0, "p": False}))
    assert eval_finite(parse_formula("busy", defs), tr, defs) is True
    assert eval_finite(parse_formula("G idle", defs), tr, defs) is False


def test_defs_may_not_reference_defs():
    with pytest.raises(ParseError):
        parse_defs("define a (p)\ndefine b (a && q)\n")


def test_unknown_atom_and_unbound_variable():
    tr = StateTrace(({"p": True},))
    with pytest.raises(UnknownAtom):
        eval_finite(Atom("zzz"), tr)
    with pytest.raises(UnboundVariable) as exc:
        eval_finite(Cmp("m", "=", 1), tr)
    assert exc.value.name == "m" and exc.value.block_index == 0


def test_state_trace_carry_forward_and_round_trip():
    tr = parse_state_trace("a = 1;\nb = true;\n---\na = 2;\n")
    assert tr.blocks == ({"a": 1, "b": True}, {"a": 2, "b": True})
    again = parse_state_trace(render_state_trace(tr))
    assert again == tr


def test_empty_state_trace_rejected():
    with pytest.raises(ValueError):
        eval_finite(Atom("p"), StateTrace(()))


# --------------------------------------------------------- machine_admits

LINE = """\
machine Line
var v : 0..5
init v := 0
op inc()
  pre v < 5
  eff v := v + 1
end
op reset()
  eff v := 0
end
"""


def _preds(m, text):
    return [fn for _, fn in parse_machine_predicates(m, text)]


def test_admits_finds_shortest_witness():
    m = parse_machine(LINE)
    props = _preds(m, "define p1 (v = 2)\ndefine p2 (v = 4)\n")
    w = machine_admits(m, props, bound=10)
    assert w is not None and len(w.steps) == 4
    assert [e.name for e in w.steps] == ["inc"] * 4
    assert replay(m, w).passed


def test_admits_nonstrict_advancement():
    # one state may satisfy several milestones at once
    m = parse_machine(LINE)
    props = _preds(m, "define p1 (v >= 1)\ndefine p2 (v >= 1)\n")
    w = machine_admits(m, props, bound=5)
    assert w is not None and len(w.steps) == 1


def test_admits_empty_props_is_empty_witness():
    m = parse_machine(LINE)
    assert machine_admits(m, [], bound=3) == OpTrace(())


def test_admits_respects_bound_and_invariants():
    m = parse_machine(LINE)
    props = _preds(m, "define p1 (v = 5)\n")
    assert machine_admits(m, props, bound=3) is None
    assert machine_admits(m, props, bound=5) is not None
    blocked = parse_machine(LINE.replace("init v := 0", "init v := 0\ninvariant c1 : v /= 3"))
    # v=3 is unreachable without violating the invariant, so v=5 is too
    assert machine_admits(blocked, _preds(blocked, "define p1 (v = 5)\n"), bound=10) is None


def test_admits_cap():
    m = parse_machine(LINE)
    props = _preds(m, "define p1 (v = 5)\n")
    with pytest.raises(CapExceeded):
        machine_admits(m, props, bound=10, max_expansions=3)


def test_admits_witness_has_outputs():
    m = parse_machine(
        "machine M\nvar v : 0..3\ninit v := 0\n"
        "op roll() -> (r : 0..3)\n  choose c in {1, 2}\n  eff v := c\n  out r := c\nend\n"
    )
    props = _preds(m, "define p1 (v = 2)\n")
    w = machine_admits(m, props, bound=3)
    assert w is not None
    assert w.steps[-1] == OpEvent("roll", (), (intval(2),))
