"""Guarded-command abstract machines: parsing and execution.

A machine file declares finite-domain variables, init clauses (assignments
or nondeterministic ``choose``), named invariant clauses and operations
with guards, choose-bindings, simultaneous effects and outputs. One
declaration per line; ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import expr as E
from .errors import (
    ArityMismatch,
    DomainError,
    DuplicateInit,
    EmptyChoice,
    ParseError,
    TypecheckError,
    UnknownOp,
)
from .trace_model import OpEvent, Value


@dataclass
class Operation:
    name: str
    params: tuple  # ((name, Domain), ...)
    outs: tuple  # ((name, Domain), ...)
    body: tuple  # sequence of ("pre", ast, fn) and ("choose", name, ast, fn)
    effects: tuple  # ((var_name, key_ast_or_None, rhs_ast, fns...), ...)
    out_defs: tuple  # ((name, ast, fn), ...)


@dataclass
class InitClause:
    var: str
    kind: str  # "assign" | "choose"
    ast: object
    fn: object


class State:
    """A total assignment of machine variables; hashable and immutable."""

    __slots__ = ("machine", "values")

    def __init__(self, machine, values):
        self.machine = machine
        self.values = values

    def __getitem__(self, name):
        return self.values[self.machine.var_index[name]]

    def as_dict(self):
        out = {}
        for name, dom in self.machine.vars.items():
            v = self[name]
            if isinstance(dom, E.MapD):
                v = dict(zip(dom.keys, v))
            out[name] = v
        return out

    def __eq__(self, other):
        return isinstance(other, State) and self.values == other.values

    def __hash__(self):
        return hash(self.values)

    def __repr__(self):
        return f"State({self.as_dict()})"


class Machine:
    def __init__(self, name):
        self.name = name
        self.vars: dict[str, object] = {}  # name -> Domain, declaration order
        self.var_index: dict[str, int] = {}
        self.types: dict[str, object] = {}
        self.inits: list[InitClause] = []
        self.ops: dict[str, Operation] = {}
        self.invariants: dict[str, tuple] = {}  # id -> (ast, fn, source_text)
        self.symbols: set[str] = set()

    @property
    def state_space_size(self) -> int:
        n = 1
        for dom in self.vars.values():
            n *= dom.size()
        return n

    def context(self):
        return E.ExprContext(self.vars, self.var_index, self.symbols)

    def state(self, values) -> State:
        return State(self, tuple(values))


# ---------------------------------------------------------------- parsing

_CHOOSE_RE = re.compile(r"choose\s+([A-Za-z][A-Za-z0-9_]*)\s+in\s+(.+)$")


def _collect_symbols(dom, into):
    if isinstance(dom, E.SymD):
        into.update(dom.members)
    elif isinstance(dom, E.SetD) and dom.elem is not None:
        _collect_symbols(dom.elem, into)
    elif isinstance(dom, E.MapD):
        into.update(dom.keys)
        _collect_symbols(dom.value, into)


def _parse_domain(ts: E.TokenStream, types):
    if ts.try_eat("bool"):
        return E.BoolD()
    if ts.peek_kind() == "int":
        lo = int(ts.next())
        ts.eat("..")
        if ts.peek_kind() != "int":
            ts.error("expected upper bound")
        hi = int(ts.next())
        if lo > hi:
            ts.error("empty int range")
        return E.IntD(lo, hi)
    if ts.try_eat("{"):
        members = [ts.ident()]
        while ts.try_eat(","):
            members.append(ts.ident())
        ts.eat("}")
        return E.SymD(tuple(members))
    if ts.try_eat("set"):
        ts.eat("of")
        elem = _parse_domain(ts, types)
        if not isinstance(elem, E.SymD):
            ts.error("set elements must be an enum")
        return E.SetD(elem)
    if ts.try_eat("map"):
        key = _parse_domain(ts, types)
        if not isinstance(key, E.SymD):
            ts.error("map keys must be an enum")
        ts.eat("->")
        value = _parse_domain(ts, types)
        if isinstance(value, E.MapD):
            ts.error("map values may not be maps")
        return E.MapD(tuple(sorted(key.members)), value)
    name = ts.ident()
    if name not in types:
        ts.error(f"unknown type {name!r}")
    return types[name]


def parse_machine(text: str) -> Machine:
    """Parse and fully type-check a machine file."""
    lines = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if line.strip():
            lines.append((no, line.strip()))

    machine = None
    deferred = []  # expression work to run once all vars are known
    cur_op = None  # (name, params, outs, body_src, eff_src, out_src)
    pending_ops = []

    def require_machine(no):
        if machine is None:
            raise ParseError("expected 'machine <Name>' first", no)

    for no, line in lines:
        ts = E.TokenStream(E.tokenize(line, no), no)
        head = ts.ident() if ts.peek_kind() == "ident" else ts.error("bad declaration")

        if cur_op is not None:
            if head == "pre":
                cur_op[3].append(("pre", no, line[len("pre"):].strip()))
                continue
            if head == "choose":
                m_choose = _CHOOSE_RE.match(line)
                if not m_choose:
                    raise ParseError("expected 'choose <name> in <set>'", no)
                cur_op[3].append(("choose", no, m_choose.group(1), m_choose.group(2)))
                continue
            if head == "eff":
                cur_op[4].append((no, line[len("eff"):].strip()))
                continue
            if head == "out":
                cur_op[5].append((no, line[len("out"):].strip()))
                continue
            if head == "end":
                pending_ops.append(cur_op)
                cur_op = None
                continue
            raise ParseError(f"unexpected {head!r} inside op", no)

        if head == "machine":
            if machine is not None:
                raise ParseError("duplicate machine header", no)
            machine = Machine(ts.ident())
            continue
        require_machine(no)
        if head == "type":
            name = ts.ident()
            ts.eat("=")
            dom = _parse_domain(ts, machine.types)
            machine.types[name] = dom
            _collect_symbols(dom, machine.symbols)
            continue
        if head == "var":
            name = ts.ident()
            if name in machine.vars:
                raise ParseError(f"duplicate var {name!r}", no)
            ts.eat(":")
            dom = _parse_domain(ts, machine.types)
            machine.var_index[name] = len(machine.vars)
            machine.vars[name] = dom
            _collect_symbols(dom, machine.symbols)
            continue
        if head == "init":
            deferred.append(("init", no, line))
            continue
        if head == "invariant":
            cid = ts.ident()
            ts.eat(":")
            src = line.split(":", 1)[1].strip()
            deferred.append(("invariant", no, cid, src))
            continue
        if head == "op":
            name = ts.ident()
            params = []
            if ts.try_eat("("):
                if not ts.try_eat(")"):
                    while True:
                        pname = ts.ident()
                        ts.eat(":")
                        params.append((pname, _parse_domain(ts, machine.types)))
                        if not ts.try_eat(","):
                            break
                    ts.eat(")")
            outs = []
            if ts.try_eat("->"):
                ts.eat("(")
                while True:
                    oname = ts.ident()
                    ts.eat(":")
                    outs.append((oname, _parse_domain(ts, machine.types)))
                    if not ts.try_eat(","):
                        break
                ts.eat(")")
            for _, dom in params + outs:
                _collect_symbols(dom, machine.symbols)
            if name in machine.ops or any(o[0] == name for o in pending_ops):
                raise ParseError(f"duplicate op {name!r}", no)
            cur_op = (name, tuple(params), tuple(outs), [], [], [])
            continue
        if head == "end":
            continue  # optional file-level end
        raise ParseError(f"unknown declaration {head!r}", no)

    if machine is None:
        raise ParseError("empty machine file", 1)
    if cur_op is not None:
        raise ParseError(f"op {cur_op[0]!r} not closed with 'end'", lines[-1][0])

    ctx = machine.context()

    # init clauses
    init_vars = set()
    for item in deferred:
        if item[0] != "init":
            continue
        _, no, line = item
        body = line[len("init"):].strip()
        m_choose = _CHOOSE_RE.match(body)
        if m_choose:
            var, set_src = m_choose.group(1), m_choose.group(2)
            if var not in machine.vars:
                raise ParseError(f"init of undeclared var {var!r}", no)
            ast = E.parse_expr_text(set_src.strip(), no)
            sdom = E.typecheck(ast, ctx, E.SetD(None))
            if sdom.elem is not None:
                E._merge(machine.vars[var], sdom.elem, f"init choose {var}")
            clause = InitClause(var, "choose", ast, E.compile_expr(ast, ctx))
        else:
            var, _, rhs = body.partition(":=")
            var = var.strip()
            if var not in machine.vars:
                raise ParseError(f"init of undeclared var {var!r}", no)
            ast = E.parse_expr_text(rhs.strip(), no)
            E.typecheck(ast, ctx, machine.vars[var])
            clause = InitClause(var, "assign", ast, E.compile_expr(ast, ctx))
        if var in init_vars:
            raise DuplicateInit(f"var {var!r} initialised twice")
        init_vars.add(var)
        machine.inits.append(clause)
    missing = [v for v in machine.vars if v not in init_vars]
    if missing:
        raise DuplicateInit(f"vars never initialised: {', '.join(missing)}")
    machine.inits.sort(key=lambda c: machine.var_index[c.var])

    # invariants
    for item in deferred:
        if item[0] != "invariant":
            continue
        _, no, cid, src = item
        if cid in machine.invariants:
            raise ParseError(f"duplicate invariant id {cid!r}", no)
        ast = E.parse_expr_text(src, no)
        E.typecheck(ast, ctx, E.BoolD())
        machine.invariants[cid] = (ast, E.compile_expr(ast, ctx), src)

    # operations
    for name, params, outs, body_src, eff_src, out_src in pending_ops:
        op_ctx = ctx
        for pname, dom in params:
            op_ctx = op_ctx.with_bind(pname, dom)
        body = []
        for entry in body_src:
            if entry[0] == "pre":
                _, no, src = entry
                ast = E.parse_expr_text(src, no)
                E.typecheck(ast, op_ctx, E.BoolD())
                body.append(("pre", ast, E.compile_expr(ast, op_ctx)))
            else:
                _, no, cname, src = entry
                ast = E.parse_expr_text(src, no)
                sdom = E.typecheck(ast, op_ctx)
                if not isinstance(sdom, E.SetD):
                    raise TypecheckError(f"choose {cname!r} needs a set, got {sdom.render()}")
                fn = E.compile_expr(ast, op_ctx)
                elem = sdom.elem if sdom.elem is not None else E.SymD(())
                op_ctx = op_ctx.with_bind(cname, elem)
                body.append(("choose", cname, ast, fn))
        effects = []
        assigned = set()
        for no, src in eff_src:
            target, _, rhs = src.partition(":=")
            target = target.strip()
            key_ast = None
            if "[" in target:
                vname, key_src = target.split("[", 1)
                vname = vname.strip()
                key_src = key_src.rstrip()
                if not key_src.endswith("]"):
                    raise ParseError("bad eff target", no)
                key_ast = E.parse_expr_text(key_src[:-1], no)
            else:
                vname = target
            if vname not in machine.vars:
                raise ParseError(f"eff targets undeclared var {vname!r}", no)
            if vname in assigned:
                raise ParseError(f"var {vname!r} assigned twice in op {name!r}", no)
            assigned.add(vname)
            dom = machine.vars[vname]
            rhs_ast = E.parse_expr_text(rhs.strip(), no)
            if key_ast is not None:
                if not isinstance(dom, E.MapD):
                    raise TypecheckError(f"{vname!r} is not a map")
                E.typecheck(key_ast, op_ctx, E.SymD(dom.keys))
                E.typecheck(rhs_ast, op_ctx, dom.value)
                key_fn = E.compile_expr(key_ast, op_ctx)
                key_pos = {k: i for i, k in enumerate(dom.keys)}
            else:
                E.typecheck(rhs_ast, op_ctx, dom)
                key_fn = key_pos = None
            effects.append(
                (
                    machine.var_index[vname],
                    dom,
                    key_ast,
                    key_fn,
                    key_pos,
                    rhs_ast,
                    E.compile_expr(rhs_ast, op_ctx),
                )
            )
        out_defs = []
        declared_outs = dict(outs)
        for no, src in out_src:
            oname, _, rhs = src.partition(":=")
            oname = oname.strip()
            if oname not in declared_outs:
                raise ParseError(f"out {oname!r} not declared in op header", no)
            ast = E.parse_expr_text(rhs.strip(), no)
            E.typecheck(ast, op_ctx, declared_outs[oname])
            out_defs.append((oname, ast, E.compile_expr(ast, op_ctx)))
        defined = {o[0] for o in out_defs}
        for oname in declared_outs:
            if oname not in defined:
                raise ParseError(f"op {name!r} never defines out {oname!r}", 0)
        out_defs.sort(key=lambda o: [x[0] for x in outs].index(o[0]))
        machine.ops[name] = Operation(
            name, params, tuple(outs), tuple(body), tuple(effects), tuple(out_defs)
        )
    return machine


# ---------------------------------------------------------------- render


def render_machine(m: Machine) -> str:
    out = [f"machine {m.name}"]
    for name, dom in m.types.items():
        out.append(f"type {name} = {dom.render()}")
    for name, dom in m.vars.items():
        out.append(f"var {name} : {dom.render()}")
    for clause in m.inits:
        if clause.kind == "choose":
            out.append(f"init choose {clause.var} in {E.render_expr(clause.ast)}")
        else:
            out.append(f"init {clause.var} := {E.render_expr(clause.ast)}")
    for cid, (ast, _, _) in m.invariants.items():
        out.append(f"invariant {cid} : {E.render_expr(ast)}")
    for op in m.ops.values():
        header = f"op {op.name}"
        header += "(" + ", ".join(f"{n} : {d.render()}" for n, d in op.params) + ")"
        if op.outs:
            header += " -> (" + ", ".join(f"{n} : {d.render()}" for n, d in op.outs) + ")"
        out.append(header)
        for item in op.body:
            if item[0] == "pre":
                out.append(f"  pre {E.render_expr(item[1])}")
            else:
                out.append(f"  choose {item[1]} in {E.render_expr(item[2])}")
        for vidx, dom, key_ast, _, _, rhs_ast, _ in op.effects:
            vname = list(m.vars)[vidx]
            target = vname if key_ast is None else f"{vname}[{E.render_expr(key_ast)}]"
            out.append(f"  eff {target} := {E.render_expr(rhs_ast)}")
        for oname, ast, _ in op.out_defs:
            out.append(f"  out {oname} := {E.render_expr(ast)}")
        out.append("end")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- semantics


def _sort_key(v):
    return (str(type(v).__name__), str(v))


def initial_states(m: Machine) -> list[State]:
    """All states reachable by resolving init chooses, discovery order."""
    values = [None] * len(m.vars)
    states: list[State] = []

    def go(i, values):
        if i == len(m.inits):
            state = m.state(values)
            if state not in seen:
                seen.add(state)
                states.append(state)
            return
        clause = m.inits[i]
        vidx = m.var_index[clause.var]
        snapshot = tuple(values)
        if clause.kind == "assign":
            v = clause.fn(snapshot, {})
            _check_domain(m, clause.var, v)
            values[vidx] = v
            go(i + 1, values)
        else:
            options = clause.fn(snapshot, {})
            if not options:
                raise EmptyChoice(f"init choose for {clause.var!r} over empty set")
            for v in sorted(options, key=_sort_key):
                _check_domain(m, clause.var, v)
                values[vidx] = v
                go(i + 1, values)

    seen: set[State] = set()
    go(0, values)
    return states


def _check_domain(m, var, v):
    if not m.vars[var].contains(v):
        raise DomainError(f"value {v!r} outside domain of {var!r}")


def _value_to_py(v: Value):
    if v.kind == "sym":
        return v.val
    return v.val


def _py_to_value(v) -> Value:
    if isinstance(v, bool):
        return Value("bool", v)
    if isinstance(v, int):
        return Value("int", v)
    return Value("sym", v)


def _outs_match(declared: tuple[Value, ...], produced: tuple[Value, ...]) -> bool:
    if len(declared) != len(produced):
        return False
    for d, p in zip(declared, produced):
        if d.kind == "wild":
            continue
        if d != p:
            return False
    return True


def step(m: Machine, s: State, e: OpEvent):
    """Successor (state, outs) pairs for event `e` from state `s`.

    Enumerates choose-bindings in order; guard-failing bindings are skipped.
    When the event declares outputs, successors whose outputs do not match
    (wildcards match anything) are dropped.
    """
    op = m.ops.get(e.name)
    if op is None:
        raise UnknownOp(f"machine {m.name!r} has no op {e.name!r}")
    if len(e.args) != len(op.params):
        raise ArityMismatch(
            f"{e.name}: got {len(e.args)} args, expected {len(op.params)}"
        )
    binds = {}
    for (pname, dom), v in zip(op.params, e.args):
        pv = _value_to_py(v)
        if not dom.contains(pv):
            raise DomainError(f"{e.name}: argument {pname}={v.render()} outside {dom.render()}")
        binds[pname] = pv
    results = []
    seen = set()
    sv = s.values

    def go(i, binds):
        if i == len(op.body):
            _apply(binds)
            return
        item = op.body[i]
        if item[0] == "pre":
            if item[2](sv, binds):
                go(i + 1, binds)
            return
        _, cname, _, fn = item
        for v in sorted(fn(sv, binds), key=_sort_key):
            binds[cname] = v
            go(i + 1, binds)
        binds.pop(cname, None)

    def _apply(binds):
        new = list(sv)
        for vidx, dom, _, key_fn, key_pos, _, rhs_fn in op.effects:
            val = rhs_fn(sv, binds)
            if key_fn is not None:
                cur = list(sv[vidx])
                cur[key_pos[key_fn(sv, binds)]] = val
                val = tuple(cur)
            if not dom.contains(val):
                raise DomainError(
                    f"op {op.name!r} drove a variable outside its domain: {val!r}"
                )
            new[vidx] = val
        produced = tuple(_py_to_value(fn(sv, binds)) for _, _, fn in op.out_defs)
        if e.outs is not None and not _outs_match(e.outs, produced):
            return
        key = (tuple(new), produced)
        if key not in seen:
            seen.add(key)
            results.append((m.state(new), produced))

    go(0, binds)
    return results


def check_invariants(m: Machine, s: State) -> list[str]:
    """Ids of violated invariant clauses, in declaration order."""
    return [cid for cid, (_, fn, _) in m.invariants.items() if not fn(s.values, {})]


def _param_bindings(params):
    if not params:
        yield ()
        return
    (name, dom), rest = params[0], params[1:]
    for v in dom.values():
        for tail in _param_bindings(rest):
            yield ((name, v),) + tail


def enabled_events(m: Machine, s: State):
    """Every (op name, concrete args) with at least one successor."""
    found = []
    for name, op in m.ops.items():
        for binding in _param_bindings(op.params):
            args = tuple(_py_to_value(v) for _, v in binding)
            if step(m, s, OpEvent(name, args)):
                found.append((name, args))
    return found
