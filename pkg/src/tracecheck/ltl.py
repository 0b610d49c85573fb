"""Finite-trace PLTL: formulas, evaluation, generation and witness search.

Formulas are interpreted over finite state traces with strong next (X at
the last position is false). ``trace_to_formula`` turns an ordered list of
milestones into the nested eventually-chain, and ``machine_admits`` looks
for a bounded machine run visiting a milestone sequence in order.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import expr as E
from .errors import (
    CapExceeded,
    EmptyPropList,
    ParseError,
    TypecheckError,
    UnboundVariable,
    UnknownAtom,
)
from .machine import Machine, check_invariants, initial_states, step, _param_bindings, _py_to_value
from .trace_model import OpEvent, OpTrace

# ---------------------------------------------------------------- formulas


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Cmp:
    var: str
    op: str  # = /= < <= > >=
    value: object  # int | bool | str (symbol or variable name)


@dataclass(frozen=True)
class Not:
    x: object


@dataclass(frozen=True)
class And:
    l: object
    r: object


@dataclass(frozen=True)
class Or:
    l: object
    r: object


@dataclass(frozen=True)
class Implies:
    l: object
    r: object


@dataclass(frozen=True)
class Next:
    x: object


@dataclass(frozen=True)
class Ev:
    x: object


@dataclass(frozen=True)
class Alw:
    x: object


@dataclass(frozen=True)
class Until:
    l: object
    r: object


_TEMPORAL = {"G": Alw, "F": Ev, "X": Next}
_CMP_OPS = ("=", "/=", "<", "<=", ">", ">=")


def _normalize(text: str) -> str:
    return (
        text.replace("<>", " F ")
        .replace("[]", " G ")
        .replace("!=", " /= ")
        .replace("==", " = ")
    )


class PropDefs:
    """Named proposition definitions over state-trace variables."""

    def __init__(self, defs=None):
        self.defs = dict(defs or {})  # name -> expr AST

    def __contains__(self, name):
        return name in self.defs

    def names(self):
        return list(self.defs)


def parse_defs(text: str) -> PropDefs:
    """Parse a prop-defs file: lines ``define <name> (<expr>)``."""
    defs = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.startswith("define"):
            raise ParseError("expected 'define <name> (<expr>)'", no)
        rest = line[len("define"):].strip()
        name, _, body = rest.partition(" ")
        body = body.strip()
        if not name or not body:
            raise ParseError("expected 'define <name> (<expr>)'", no)
        ast = E.parse_expr_text(_normalize(body), no)
        for ref in _names_in(ast):
            if ref in defs:
                raise ParseError(f"definition {name!r} references definition {ref!r}", no)
        defs[name] = ast
    return PropDefs(defs)


def _names_in(ast):
    if isinstance(ast, E.Name):
        yield ast.name
    elif isinstance(ast, E.Unary):
        yield from _names_in(ast.x)
    elif isinstance(ast, E.Binary):
        yield from _names_in(ast.l)
        yield from _names_in(ast.r)
    elif isinstance(ast, (E.SetLit,)):
        for item in ast.items:
            yield from _names_in(item)
    elif isinstance(ast, E.Call):
        for a in ast.args:
            yield from _names_in(a)
    elif isinstance(ast, E.Index):
        yield from _names_in(ast.m)
        yield from _names_in(ast.k)


def parse_formula(text: str, defs: PropDefs | None = None) -> object:
    """Parse a PLTL formula; accepts G/F/X/U and the []/<> spellings."""
    ts = E.TokenStream(E.tokenize(_normalize(text), 1), 1)
    node = _parse_implies(ts, defs)
    if not ts.at_end():
        ts.error(f"trailing token {ts.peek()!r}")
    return node


def _parse_implies(ts, defs):
    node = _parse_or(ts, defs)
    if ts.try_eat("->"):
        return Implies(node, _parse_implies(ts, defs))
    return node


def _parse_or(ts, defs):
    node = _parse_and(ts, defs)
    while ts.try_eat("||"):
        node = Or(node, _parse_and(ts, defs))
    return node


def _parse_and(ts, defs):
    node = _parse_until(ts, defs)
    while ts.try_eat("&&"):
        node = And(node, _parse_until(ts, defs))
    return node


def _parse_until(ts, defs):
    node = _parse_unary(ts, defs)
    while ts.try_eat("U"):
        node = Until(node, _parse_unary(ts, defs))
    return node


def _parse_unary(ts, defs):
    if ts.try_eat("!"):
        return Not(_parse_unary(ts, defs))
    tok = ts.peek()
    if tok in _TEMPORAL:
        ts.next()
        return _TEMPORAL[tok](_parse_unary(ts, defs))
    if ts.try_eat("("):
        node = _parse_implies(ts, defs)
        ts.eat(")")
        return node
    if ts.peek_kind() == "ident":
        name = ts.next()
        if name in ("true", "false"):
            return Atom(name)
        if ts.peek() in _CMP_OPS:
            op = ts.next()
            return Cmp(name, op, _parse_cmp_value(ts))
        return Atom(name)
    ts.error(f"unexpected token {ts.peek()!r}")


def _parse_cmp_value(ts):
    if ts.peek_kind() == "int":
        return int(ts.next())
    if ts.try_eat("-"):
        if ts.peek_kind() != "int":
            ts.error("expected integer")
        return -int(ts.next())
    name = ts.ident()
    if name == "true":
        return True
    if name == "false":
        return False
    return name


def render_formula(f) -> str:
    """ASCII rendering; eventually-chains match the fully-parenthesized
    right-nested form exactly."""

    def wrap(x):
        text = render_formula(x)
        return text if isinstance(x, (Atom,)) else f"({text})"

    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Cmp):
        val = f.value
        if isinstance(val, bool):
            val = "true" if val else "false"
        return f"{f.var} {f.op} {val}"
    if isinstance(f, Not):
        return "!" + wrap(f.x)
    if isinstance(f, And):
        return f"{wrap(f.l)} && {wrap(f.r)}"
    if isinstance(f, Or):
        return f"{wrap(f.l)} || {wrap(f.r)}"
    if isinstance(f, Implies):
        return f"{wrap(f.l)} -> {wrap(f.r)}"
    if isinstance(f, Next):
        return "X " + wrap(f.x)
    if isinstance(f, Ev):
        return "<>" + wrap(f.x)
    if isinstance(f, Alw):
        return "[]" + wrap(f.x)
    if isinstance(f, Until):
        return f"{wrap(f.l)} U {wrap(f.r)}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- traces


@dataclass(frozen=True)
class StateTrace:
    """Ordered variable-assignment snapshots; missing vars carry forward."""

    blocks: tuple  # tuple of dict

    def __len__(self):
        return len(self.blocks)


def parse_state_trace(text: str) -> StateTrace:
    """Parse blocks of ``var = value;`` lines separated by ``---`` lines."""
    blocks = []
    current: dict = {}
    started = False

    def push():
        nonlocal current
        if started:
            merged = dict(blocks[-1]) if blocks else {}
            merged.update(current)
            blocks.append(merged)
        current = {}

    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if set(line) == {"-"}:
            push()
            started = True
            continue
        started = True
        line = line.rstrip(";").strip()
        name, eq, val = line.partition("=")
        if not eq:
            raise ParseError("expected 'var = value'", no)
        name = name.strip()
        val = val.strip()
        if val in ("true", "false"):
            parsed: object = val == "true"
        else:
            try:
                parsed = int(val)
            except ValueError:
                parsed = val
        current[name] = parsed
    push()
    return StateTrace(tuple(blocks))


def render_state_trace(trace: StateTrace) -> str:
    chunks = []
    for block in trace.blocks:
        lines = []
        for name, val in block.items():
            if isinstance(val, bool):
                shown = "true" if val else "false"
            else:
                shown = str(val)
            lines.append(f"{name} = {shown};")
        chunks.append("\n".join(lines))
    return "\n---\n".join(chunks) + ("\n" if chunks else "")


# ---------------------------------------------------------------- eval


def _eval_pred(ast, block, idx):
    """Evaluate a defs expression on one block."""
    if isinstance(ast, E.IntLit):
        return ast.val
    if isinstance(ast, E.BoolLit):
        return ast.val
    if isinstance(ast, E.Name):
        if ast.name in block:
            return block[ast.name]
        return ast.name  # bare symbol constant
    if isinstance(ast, E.Unary):
        v = _eval_pred(ast.x, block, idx)
        return (not v) if ast.op == "!" else -v
    if isinstance(ast, E.Binary):
        l = _eval_pred(ast.l, block, idx)
        if ast.op == "&&":
            return bool(l) and bool(_eval_pred(ast.r, block, idx))
        if ast.op == "||":
            return bool(l) or bool(_eval_pred(ast.r, block, idx))
        r = _eval_pred(ast.r, block, idx)
        if ast.op == "->":
            return (not l) or bool(r)
        if ast.op == "=":
            return l == r
        if ast.op == "/=":
            return l != r
        if ast.op == "<":
            return l < r
        if ast.op == "<=":
            return l <= r
        if ast.op == ">":
            return l > r
        if ast.op == ">=":
            return l >= r
    raise TypecheckError(f"unsupported construct in definition: {ast!r}")


def _atom_value(name, block, defs, idx):
    if name == "true":
        return True
    if name == "false":
        return False
    if defs is not None and name in defs:
        return bool(_eval_pred(defs.defs[name], block, idx))
    if name in block:
        v = block[name]
        if not isinstance(v, bool):
            raise TypecheckError(f"atom {name!r} is not boolean at block {idx}")
        return v
    raise UnknownAtom(f"atom {name!r} is neither a definition nor a trace variable")


def _cmp_value(f: Cmp, block, idx):
    if f.var not in block:
        raise UnboundVariable(f.var, idx)
    l = block[f.var]
    r = f.value
    if isinstance(r, str) and r in block:
        r = block[r]
    if f.op == "=":
        return l == r
    if f.op == "/=":
        return l != r
    if not isinstance(l, int) or not isinstance(r, int):
        raise TypecheckError(f"ordered comparison on non-integers at block {idx}")
    return {"<": l < r, "<=": l <= r, ">": l > r, ">=": l >= r}[f.op]


def eval_finite(f, trace: StateTrace, defs: PropDefs | None = None) -> bool:
    """Truth of `f` at position 0 under finite-trace semantics."""
    n = len(trace.blocks)
    if n == 0:
        raise ValueError("state trace is empty")

    def table(g) -> list[bool]:
        if isinstance(g, Atom):
            return [_atom_value(g.name, b, defs, i) for i, b in enumerate(trace.blocks)]
        if isinstance(g, Cmp):
            return [_cmp_value(g, b, i) for i, b in enumerate(trace.blocks)]
        if isinstance(g, Not):
            return [not v for v in table(g.x)]
        if isinstance(g, And):
            lt, rt = table(g.l), table(g.r)
            return [a and b for a, b in zip(lt, rt)]
        if isinstance(g, Or):
            lt, rt = table(g.l), table(g.r)
            return [a or b for a, b in zip(lt, rt)]
        if isinstance(g, Implies):
            lt, rt = table(g.l), table(g.r)
            return [(not a) or b for a, b in zip(lt, rt)]
        if isinstance(g, Next):
            t = table(g.x)
            return [t[i + 1] if i + 1 < n else False for i in range(n)]
        if isinstance(g, Ev):
            t = table(g.x)
            out = [False] * n
            acc = False
            for i in range(n - 1, -1, -1):
                acc = acc or t[i]
                out[i] = acc
            return out
        if isinstance(g, Alw):
            t = table(g.x)
            out = [False] * n
            acc = True
            for i in range(n - 1, -1, -1):
                acc = acc and t[i]
                out[i] = acc
            return out
        if isinstance(g, Until):
            lt, rt = table(g.l), table(g.r)
            out = [False] * n
            nxt = False
            for i in range(n - 1, -1, -1):
                out[i] = rt[i] or (lt[i] and nxt)
                nxt = out[i]
            return out
        raise TypeError(f"not a formula: {g!r}")

    return table(f)[0]


def trace_to_formula(props: list[str]):
    """Right-nested eventually-chain F(p1 && F(p2 && ... F(pn)))."""
    if not props:
        raise EmptyPropList("need at least one proposition")
    f = Ev(Atom(props[-1]))
    for p in reversed(props[:-1]):
        f = Ev(And(Atom(p), f))
    return f


# ------------------------------------------------------- witness search


def parse_machine_predicates(m: Machine, text: str):
    """Parse a defs file whose bodies are predicates over machine variables."""
    ctx = m.context()
    preds = []
    raw = parse_defs(text)
    for name, ast in raw.defs.items():
        E.typecheck(ast, ctx, E.BoolD())
        preds.append((name, E.compile_expr(ast, ctx)))
    return preds


def machine_admits(
    m: Machine,
    props,
    bound: int,
    max_expansions: int = 10**6,
) -> OpTrace | None:
    """Shortest run of `m` (length <= bound) whose states satisfy the
    milestone predicates in order (non-strictly increasing positions).

    `props` is a list of callables over state value tuples. Returns the
    witness as an OpTrace with concrete args and outputs, or None.
    """
    n = len(props)

    def advance(k, values):
        while k < n and props[k](values, {}):
            k += 1
        return k

    events = [
        (name, tuple(_py_to_value(v) for _, v in binding))
        for name, op in m.ops.items()
        for binding in _param_bindings(op.params)
    ]
    start_nodes = []
    parents = {}
    for s in initial_states(m):
        if check_invariants(m, s):
            continue
        k = advance(0, s.values)
        node = (s, k)
        if node not in parents:
            parents[node] = None
            start_nodes.append(node)
    frontier = list(start_nodes)
    for node in frontier:
        if node[1] == n:
            return OpTrace(())
    expansions = 0
    for depth in range(bound):
        if not frontier:
            return None
        nxt = []
        for node in frontier:
            s, k = node
            for opname, args in events:
                for succ, outs in step(m, s, OpEvent(opname, args)):
                    expansions += 1
                    if expansions > max_expansions:
                        raise CapExceeded(
                            "witness search cap exceeded", partial_count=expansions
                        )
                    if check_invariants(m, succ):
                        continue
                    k2 = advance(k, succ.values)
                    node2 = (succ, k2)
                    if node2 in parents:
                        continue
                    parents[node2] = (node, OpEvent(opname, args, outs or None))
                    if k2 == n:
                        return _reconstruct(parents, node2)
                    nxt.append(node2)
        frontier = nxt
    return None


def _reconstruct(parents, node) -> OpTrace:
    steps = []
    while parents[node] is not None:
        node, ev = parents[node]
        steps.append(ev)
    return OpTrace(tuple(reversed(steps)))
