"""Expression language for the abstract-machine notation.

Covers finite domains (bool, bounded int, enum, set-of-enum, map), infix
predicates and the handful of builtins (card, ite, override) the machine
files need. Expressions are type-checked against declared domains and then
compiled to Python closures over ``(state, binds)`` where ``state`` is the
tuple of machine variables and ``binds`` holds parameter/choose bindings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError, TypecheckError, UnboundSymbol

# ---------------------------------------------------------------- domains


@dataclass(frozen=True)
class BoolD:
    def contains(self, v):
        return isinstance(v, bool)

    def size(self):
        return 2

    def values(self):
        return (False, True)

    def render(self):
        return "bool"


@dataclass(frozen=True)
class IntD:
    lo: int
    hi: int

    def contains(self, v):
        return isinstance(v, int) and not isinstance(v, bool) and self.lo <= v <= self.hi

    def size(self):
        return self.hi - self.lo + 1

    def values(self):
        return tuple(range(self.lo, self.hi + 1))

    def render(self):
        return f"{self.lo}..{self.hi}"


@dataclass(frozen=True)
class SymD:
    members: tuple[str, ...]

    def contains(self, v):
        return v in self.members

    def size(self):
        return len(self.members)

    def values(self):
        return self.members

    def render(self):
        return "{" + ", ".join(self.members) + "}"


@dataclass(frozen=True)
class SetD:
    elem: object  # element domain, or None for the polymorphic empty set

    def contains(self, v):
        return isinstance(v, frozenset) and (
            self.elem is None or all(self.elem.contains(x) for x in v)
        )

    def size(self):
        return 2 ** self.elem.size()

    def values(self):
        elems = self.elem.values()
        out = []
        for mask in range(2 ** len(elems)):
            out.append(frozenset(e for i, e in enumerate(elems) if mask >> i & 1))
        return tuple(out)

    def render(self):
        return f"set of {self.elem.render()}"


@dataclass(frozen=True)
class MapD:
    keys: tuple[str, ...]  # kept sorted; map values are tuples in key order
    value: object

    def contains(self, v):
        return (
            isinstance(v, tuple)
            and len(v) == len(self.keys)
            and all(self.value.contains(x) for x in v)
        )

    def size(self):
        return self.value.size() ** len(self.keys)

    def render(self):
        return "map {" + ", ".join(self.keys) + "} -> " + self.value.render()


def domain_size(dom) -> int:
    return dom.size()


def _kind(dom):
    return type(dom).__name__


def _merge(a, b, what):
    """Least domain covering both operands, or raise on category mismatch."""
    if a is None:
        return b
    if b is None:
        return a
    if isinstance(a, SetD) and isinstance(b, SetD):
        return SetD(_merge(a.elem, b.elem, what))
    if _kind(a) != _kind(b):
        raise TypecheckError(f"{what}: expected {a.render()}, got {b.render()}")
    if isinstance(a, IntD):
        return IntD(min(a.lo, b.lo), max(a.hi, b.hi))
    if isinstance(a, SymD):
        extra = tuple(m for m in b.members if m not in a.members)
        return SymD(a.members + extra)
    if isinstance(a, MapD):
        if a.keys != b.keys:
            raise TypecheckError(f"{what}: map key sets differ")
        return MapD(a.keys, _merge(a.value, b.value, what))
    return a


# ---------------------------------------------------------------- tokens

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>:=|-->|->|\.\.|<=|>=|/=|&&|\|\||\\/|[\\=<>+\-!(){}\[\],:])
    """,
    re.VERBOSE,
)


def tokenize(text: str, line_no=1):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"bad character {text[pos]!r}", line_no, pos + 1)
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        tokens.append((m.lastgroup, m.group(), m.start() + 1))
    tokens.append(("end", "", len(text) + 1))
    return tokens


class TokenStream:
    def __init__(self, tokens, line_no=1):
        self.tokens = tokens
        self.i = 0
        self.line_no = line_no

    def error(self, message):
        raise ParseError(message, self.line_no, self.tokens[self.i][2])

    def peek(self):
        return self.tokens[self.i][1]

    def peek_kind(self):
        return self.tokens[self.i][0]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok[1]

    def eat(self, literal):
        if self.peek() != literal:
            self.error(f"expected {literal!r}, got {self.peek()!r}")
        return self.next()

    def try_eat(self, literal):
        if self.peek() == literal:
            self.next()
            return True
        return False

    def ident(self):
        if self.peek_kind() != "ident":
            self.error(f"expected identifier, got {self.peek()!r}")
        return self.next()

    def at_end(self):
        return self.peek_kind() == "end"


# ---------------------------------------------------------------- AST

@dataclass(frozen=True)
class IntLit:
    val: int


@dataclass(frozen=True)
class BoolLit:
    val: bool


@dataclass(frozen=True)
class Name:
    """Unresolved identifier: state var, bound var or enum symbol."""

    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "neg"
    x: object


@dataclass(frozen=True)
class Binary:
    op: str  # && || -> = /= < <= > >= + - \/ \ in
    l: object
    r: object


@dataclass(frozen=True)
class SetLit:
    items: tuple


@dataclass(frozen=True)
class MapLit:
    entries: tuple  # ((key_symbol, expr), ...)


@dataclass(frozen=True)
class Call:
    fn: str  # card | ite | override
    args: tuple


@dataclass(frozen=True)
class Index:
    m: object
    k: object


_CMP_OPS = ("=", "/=", "<", "<=", ">", ">=", "in")
_ADD_OPS = ("+", "-", "\\/", "\\")


def parse_expr(ts: TokenStream):
    node = _parse_or(ts)
    if ts.try_eat("->"):
        return Binary("->", node, parse_expr(ts))
    return node


def _parse_or(ts):
    node = _parse_and(ts)
    while ts.try_eat("||"):
        node = Binary("||", node, _parse_and(ts))
    return node


def _parse_and(ts):
    node = _parse_cmp(ts)
    while ts.try_eat("&&"):
        node = Binary("&&", node, _parse_cmp(ts))
    return node


def _parse_cmp(ts):
    node = _parse_add(ts)
    if ts.peek() in _CMP_OPS:
        op = ts.next()
        node = Binary(op, node, _parse_add(ts))
    return node


def _parse_add(ts):
    node = _parse_unary(ts)
    while ts.peek() in _ADD_OPS:
        op = ts.next()
        node = Binary(op, node, _parse_unary(ts))
    return node


def _parse_unary(ts):
    if ts.try_eat("!"):
        return Unary("!", _parse_unary(ts))
    if ts.try_eat("-"):
        return Unary("neg", _parse_unary(ts))
    return _parse_postfix(ts)


def _parse_postfix(ts):
    node = _parse_primary(ts)
    while ts.try_eat("["):
        key = parse_expr(ts)
        ts.eat("]")
        node = Index(node, key)
    return node


def _parse_primary(ts):
    kind = ts.peek_kind()
    if kind == "int":
        return IntLit(int(ts.next()))
    if ts.try_eat("("):
        node = parse_expr(ts)
        ts.eat(")")
        return node
    if ts.try_eat("{"):
        if ts.try_eat("}"):
            return SetLit(())
        first = parse_expr(ts)
        if ts.try_eat(":"):
            if not isinstance(first, Name):
                ts.error("map keys must be symbols")
            entries = [(first.name, parse_expr(ts))]
            while ts.try_eat(","):
                key = ts.ident()
                ts.eat(":")
                entries.append((key, parse_expr(ts)))
            ts.eat("}")
            return MapLit(tuple(entries))
        items = [first]
        while ts.try_eat(","):
            items.append(parse_expr(ts))
        ts.eat("}")
        return SetLit(tuple(items))
    if kind == "ident":
        name = ts.next()
        if name == "true":
            return BoolLit(True)
        if name == "false":
            return BoolLit(False)
        if name in ("card", "ite", "override") and ts.try_eat("("):
            args = [parse_expr(ts)]
            while ts.try_eat(","):
                args.append(parse_expr(ts))
            ts.eat(")")
            want = {"card": 1, "ite": 3, "override": 3}[name]
            if len(args) != want:
                ts.error(f"{name} takes {want} argument(s)")
            return Call(name, tuple(args))
        return Name(name)
    ts.error(f"unexpected token {ts.peek()!r}")


def parse_expr_text(text: str, line_no=1):
    ts = TokenStream(tokenize(text, line_no), line_no)
    node = parse_expr(ts)
    if not ts.at_end():
        ts.error(f"trailing token {ts.peek()!r}")
    return node


# ------------------------------------------------------- typecheck/compile


class ExprContext:
    """Name resolution scope: machine vars, bound vars and the symbol universe."""

    def __init__(self, var_domains, var_index, symbols, binds=None):
        self.var_domains = var_domains  # name -> Domain
        self.var_index = var_index  # name -> state tuple slot
        self.symbols = symbols  # every declared enum member
        self.binds = dict(binds or {})  # name -> Domain

    def with_bind(self, name, dom):
        child = ExprContext(self.var_domains, self.var_index, self.symbols, self.binds)
        child.binds[name] = dom
        return child


def typecheck(node, ctx, expected=None):
    """Infer the node's domain; raises TypecheckError/UnboundSymbol."""
    dom = _infer(node, ctx)
    if expected is not None:
        _merge(expected, dom, "expression")
    return dom


def _require(dom, cls, what):
    if dom is not None and not isinstance(dom, cls):
        raise TypecheckError(f"{what}: got {dom.render()}")
    return dom


def _infer(node, ctx):
    if isinstance(node, IntLit):
        return IntD(node.val, node.val)
    if isinstance(node, BoolLit):
        return BoolD()
    if isinstance(node, Name):
        if node.name in ctx.binds:
            return ctx.binds[node.name]
        if node.name in ctx.var_domains:
            return ctx.var_domains[node.name]
        if node.name in ctx.symbols:
            return SymD((node.name,))
        raise UnboundSymbol(f"undeclared name {node.name!r}")
    if isinstance(node, Unary):
        if node.op == "!":
            _require(_infer(node.x, ctx), BoolD, "operand of !")
            return BoolD()
        d = _require(_infer(node.x, ctx), IntD, "operand of unary -")
        return IntD(-d.hi, -d.lo)
    if isinstance(node, Binary):
        return _infer_binary(node, ctx)
    if isinstance(node, SetLit):
        elem = None
        for item in node.items:
            elem = _merge(elem, _infer(item, ctx), "set literal")
        return SetD(elem)
    if isinstance(node, MapLit):
        val = None
        for _, e in node.entries:
            val = _merge(val, _infer(e, ctx), "map literal")
        return MapD(tuple(sorted(k for k, _ in node.entries)), val)
    if isinstance(node, Index):
        m = _require(_infer(node.m, ctx), MapD, "indexed expression")
        _require(_infer(node.k, ctx), SymD, "map key")
        return m.value
    if isinstance(node, Call):
        if node.fn == "card":
            _require(_infer(node.args[0], ctx), SetD, "card argument")
            return IntD(0, 2**31)
        if node.fn == "ite":
            _require(_infer(node.args[0], ctx), BoolD, "ite condition")
            a = _infer(node.args[1], ctx)
            b = _infer(node.args[2], ctx)
            return _merge(a, b, "ite branches")
        if node.fn == "override":
            m = _require(_infer(node.args[0], ctx), MapD, "override target")
            _require(_infer(node.args[1], ctx), SymD, "override key")
            _merge(m.value, _infer(node.args[2], ctx), "override value")
            return m
    raise TypecheckError(f"cannot type {node!r}")


def _infer_binary(node, ctx):
    op = node.op
    l = _infer(node.l, ctx)
    r = _infer(node.r, ctx)
    if op in ("&&", "||", "->"):
        _require(l, BoolD, f"left of {op}")
        _require(r, BoolD, f"right of {op}")
        return BoolD()
    if op in ("=", "/="):
        _merge(l, r, f"operands of {op}")
        return BoolD()
    if op in ("<", "<=", ">", ">="):
        _require(l, IntD, f"left of {op}")
        _require(r, IntD, f"right of {op}")
        return BoolD()
    if op == "in":
        rset = _require(r, SetD, "right of in")
        if rset.elem is not None:
            _merge(rset.elem, l, "element of in")
        return BoolD()
    if op in ("+", "-"):
        _require(l, IntD, f"left of {op}")
        _require(r, IntD, f"right of {op}")
        if op == "+":
            return IntD(l.lo + r.lo, l.hi + r.hi)
        return IntD(l.lo - r.hi, l.hi - r.lo)
    if op in ("\\/", "\\"):
        _require(l, SetD, f"left of {op}")
        _require(r, SetD, f"right of {op}")
        return _merge(l, r, op) if op == "\\/" else l
    raise TypecheckError(f"unknown operator {op}")


def compile_expr(node, ctx):
    """Compile a type-checked node to fn(state, binds)."""
    if isinstance(node, IntLit):
        v = node.val
        return lambda s, b: v
    if isinstance(node, BoolLit):
        v = node.val
        return lambda s, b: v
    if isinstance(node, Name):
        name = node.name
        if name in ctx.binds:
            return lambda s, b: b[name]
        if name in ctx.var_index:
            i = ctx.var_index[name]
            return lambda s, b: s[i]
        return lambda s, b: name  # enum symbol literal
    if isinstance(node, Unary):
        f = compile_expr(node.x, ctx)
        if node.op == "!":
            return lambda s, b: not f(s, b)
        return lambda s, b: -f(s, b)
    if isinstance(node, Binary):
        return _compile_binary(node, ctx)
    if isinstance(node, SetLit):
        fs = [compile_expr(x, ctx) for x in node.items]
        return lambda s, b: frozenset(f(s, b) for f in fs)
    if isinstance(node, MapLit):
        entries = sorted(node.entries, key=lambda kv: kv[0])
        fs = [compile_expr(e, ctx) for _, e in entries]
        return lambda s, b: tuple(f(s, b) for f in fs)
    if isinstance(node, Index):
        mdom = _infer(node.m, ctx)
        idx = {k: i for i, k in enumerate(mdom.keys)}
        fm = compile_expr(node.m, ctx)
        fk = compile_expr(node.k, ctx)
        return lambda s, b: fm(s, b)[idx[fk(s, b)]]
    if isinstance(node, Call):
        if node.fn == "card":
            f = compile_expr(node.args[0], ctx)
            return lambda s, b: len(f(s, b))
        if node.fn == "ite":
            fc = compile_expr(node.args[0], ctx)
            fa = compile_expr(node.args[1], ctx)
            fb = compile_expr(node.args[2], ctx)
            return lambda s, b: fa(s, b) if fc(s, b) else fb(s, b)
        if node.fn == "override":
            mdom = _infer(node.args[0], ctx)
            idx = {k: i for i, k in enumerate(mdom.keys)}
            fm = compile_expr(node.args[0], ctx)
            fk = compile_expr(node.args[1], ctx)
            fv = compile_expr(node.args[2], ctx)

            def run(s, b):
                cur = list(fm(s, b))
                cur[idx[fk(s, b)]] = fv(s, b)
                return tuple(cur)

            return run
    raise TypecheckError(f"cannot compile {node!r}")


def _compile_binary(node, ctx):
    op = node.op
    fl = compile_expr(node.l, ctx)
    fr = compile_expr(node.r, ctx)
    if op == "&&":
        return lambda s, b: fl(s, b) and fr(s, b)
    if op == "||":
        return lambda s, b: fl(s, b) or fr(s, b)
    if op == "->":
        return lambda s, b: (not fl(s, b)) or fr(s, b)
    if op == "=":
        return lambda s, b: fl(s, b) == fr(s, b)
    if op == "/=":
        return lambda s, b: fl(s, b) != fr(s, b)
    if op == "<":
        return lambda s, b: fl(s, b) < fr(s, b)
    if op == "<=":
        return lambda s, b: fl(s, b) <= fr(s, b)
    if op == ">":
        return lambda s, b: fl(s, b) > fr(s, b)
    if op == ">=":
        return lambda s, b: fl(s, b) >= fr(s, b)
    if op == "in":
        return lambda s, b: fl(s, b) in fr(s, b)
    if op == "+":
        return lambda s, b: fl(s, b) + fr(s, b)
    if op == "-":
        return lambda s, b: fl(s, b) - fr(s, b)
    if op == "\\/":
        return lambda s, b: fl(s, b) | fr(s, b)
    if op == "\\":
        return lambda s, b: fl(s, b) - fr(s, b)
    raise TypecheckError(f"unknown operator {op}")


# ---------------------------------------------------------------- render

_PREC = {
    "->": 1, "||": 2, "&&": 3,
    "=": 4, "/=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4, "in": 4,
    "+": 5, "-": 5, "\\/": 5, "\\": 5,
}


def render_expr(node, prec=0) -> str:
    if isinstance(node, IntLit):
        return str(node.val)
    if isinstance(node, BoolLit):
        return "true" if node.val else "false"
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Unary):
        inner = render_expr(node.x, 6)
        return ("!" if node.op == "!" else "-") + inner
    if isinstance(node, Binary):
        p = _PREC[node.op]
        if node.op == "->":  # right-associative
            text = f"{render_expr(node.l, p + 1)} {node.op} {render_expr(node.r, p)}"
        else:
            text = f"{render_expr(node.l, p)} {node.op} {render_expr(node.r, p + 1)}"
        return f"({text})" if p < prec else text
    if isinstance(node, SetLit):
        return "{" + ", ".join(render_expr(x) for x in node.items) + "}"
    if isinstance(node, MapLit):
        return "{" + ", ".join(f"{k}: {render_expr(e)}" for k, e in node.entries) + "}"
    if isinstance(node, Index):
        return f"{render_expr(node.m, 6)}[{render_expr(node.k)}]"
    if isinstance(node, Call):
        return f"{node.fn}(" + ", ".join(render_expr(a) for a in node.args) + ")"
    raise TypecheckError(f"cannot render {node!r}")
