import random

import pytest

from tracecheck import expr as E
from tracecheck.errors import TypecheckError, UnboundSymbol

# a fixed context exercising every domain kind
VARS = {
    "a": E.BoolD(),
    "n": E.IntD(0, 3),
    "e": E.SymD(("x", "y", "z")),
    "ss": E.SetD(E.SymD(("x", "y", "z"))),
    "mm": E.MapD(("k1", "k2"), E.IntD(0, 2)),
}
VAR_INDEX = {name: i for i, name in enumerate(VARS)}
SYMBOLS = {"x", "y", "z", "k1", "k2"}


def ctx():
    return E.ExprContext(VARS, VAR_INDEX, SYMBOLS)


def random_state(rng):
    return (
        rng.choice((True, False)),
        rng.randint(0, 3),
        rng.choice(("x", "y", "z")),
        frozenset(rng.sample(("x", "y", "z"), rng.randint(0, 3))),
        (rng.randint(0, 2), rng.randint(0, 2)),
    )


def naive_eval(node, env):
    """Independent tree-walking evaluator over a name->value dict."""
    if isinstance(node, E.IntLit):
        return node.val
    if isinstance(node, E.BoolLit):
        return node.val
    if isinstance(node, E.Name):
        return env[node.name] if node.name in env else node.name
    if isinstance(node, E.Unary):
        v = naive_eval(node.x, env)
        return (not v) if node.op == "!" else -v
    if isinstance(node, E.Binary):
        l = naive_eval(node.l, env)
        if node.op == "&&":
            return bool(l) and bool(naive_eval(node.r, env))
        if node.op == "||":
            return bool(l) or bool(naive_eval(node.r, env))
        if node.op == "->":
            return (not l) or bool(naive_eval(node.r, env))
        r = naive_eval(node.r, env)
        return {
            "=": lambda: l == r, "/=": lambda: l != r,
            "<": lambda: l < r, "<=": lambda: l <= r,
            ">": lambda: l > r, ">=": lambda: l >= r,
            "in": lambda: l in r,
            "+": lambda: l + r, "-": lambda: l - r,
            "\\/": lambda: l | r, "\\": lambda: l - r,
        }[node.op]()
    if isinstance(node, E.SetLit):
        return frozenset(naive_eval(x, env) for x in node.items)
    if isinstance(node, E.Index):
        m = naive_eval(node.m, env)
        keys = sorted(("k1", "k2"))
        return m[keys.index(naive_eval(node.k, env))]
    if isinstance(node, E.Call):
        if node.fn == "card":
            return len(naive_eval(node.args[0], env))
        if node.fn == "ite":
            which = node.args[1] if naive_eval(node.args[0], env) else node.args[2]
            return naive_eval(which, env)
    raise AssertionError(node)


def random_expr(rng, want, depth):
    """Random well-typed expression text of the requested domain kind."""
    if want == "int":
        if depth == 0:
            return rng.choice(("0", "1", "2", "3", "n", "mm[k1]", "mm[k2]"))
        return rng.choice((
            f"({random_expr(rng, 'int', depth-1)} + {rng.randint(0, 2)})",
            f"ite({random_expr(rng, 'bool', depth-1)}, {random_expr(rng, 'int', depth-1)}, {random_expr(rng, 'int', depth-1)})",
            f"card({random_expr(rng, 'set', depth-1)})",
        ))
    if want == "set":
        if depth == 0:
            members = rng.sample(("x", "y", "z"), rng.randint(0, 3))
            return rng.choice(("ss", "{" + ", ".join(members) + "}"))
        op = rng.choice(("\\/", "\\"))
        return f"({random_expr(rng, 'set', depth-1)} {op} {random_expr(rng, 'set', depth-1)})"
    # bool
    if depth == 0:
        return rng.choice(("a", "true", "false", "!a"))
    return rng.choice((
        f"({random_expr(rng, 'bool', depth-1)} && {random_expr(rng, 'bool', depth-1)})",
        f"({random_expr(rng, 'bool', depth-1)} || {random_expr(rng, 'bool', depth-1)})",
        f"({random_expr(rng, 'bool', depth-1)} -> {random_expr(rng, 'bool', depth-1)})",
        f"!{random_expr(rng, 'bool', depth-1)}",
        f"({random_expr(rng, 'int', depth-1)} {rng.choice(('=', '/=', '<', '<=', '>', '>='))} {random_expr(rng, 'int', depth-1)})",
        f"(e = {rng.choice(('x', 'y', 'z'))})",
        f"({rng.choice(('x', 'y', 'z'))} in {random_expr(rng, 'set', depth-1)})",
    ))


def test_compiled_matches_naive_oracle():
    rng = random.Random(2024)
    c = ctx()
    for i in range(400):
        want = rng.choice(("bool", "int", "set"))
        text = random_expr(rng, want, rng.randint(0, 3))
        ast = E.parse_expr_text(text)
        E.typecheck(ast, c)
        fn = E.compile_expr(ast, c)
        for _ in range(5):
            state = random_state(rng)
            env = dict(zip(VARS, state))
            assert fn(state, {}) == naive_eval(ast, env), text


def test_render_parse_round_trip():
    rng = random.Random(7)
    for _ in range(200):
        text = random_expr(rng, rng.choice(("bool", "int", "set")), 3)
        ast = E.parse_expr_text(text)
        again = E.parse_expr_text(E.render_expr(ast))
        assert again == ast, text


def test_precedence():
    # -> binds loosest and associates right; && over ||? no: || looser than &&
    ast = E.parse_expr_text("a || a && a")
    assert isinstance(ast, E.Binary) and ast.op == "||"
    ast = E.parse_expr_text("a -> a -> a")
    assert ast.op == "->" and isinstance(ast.r, E.Binary) and ast.r.op == "->"
    ast = E.parse_expr_text("n + 1 < 3 && a")
    assert ast.op == "&&" and ast.l.op == "<"


def test_map_literal_vs_set_literal():
    m = E.parse_expr_text("{k1: 1, k2: 2}")
    assert isinstance(m, E.MapLit)
    s = E.parse_expr_text("{x, y}")
    assert isinstance(s, E.SetLit)
    empty = E.parse_expr_text("{}")
    assert isinstance(empty, E.SetLit) and empty.items == ()


def test_unbound_name_rejected():
    ast = E.parse_expr_text("nope = 1")
    with pytest.raises(UnboundSymbol):
        E.typecheck(ast, ctx())


def test_type_errors():
    c = ctx()
    for bad in ("a + 1", "n && a", "card(n)", "e < n", "mm[n]"):
        ast = E.parse_expr_text(bad)
        with pytest.raises(TypecheckError):
            E.typecheck(ast, c)


def test_ite_is_lazy():
    # the untaken branch must not be evaluated
    c = ctx()
    ast = E.parse_expr_text("ite(n > 0, mm[k1], 0 - 1)")
    fn = E.compile_expr(ast, c)
    assert fn((True, 2, "x", frozenset(), (1, 0)), {}) == 1
    assert fn((True, 0, "x", frozenset(), (1, 0)), {}) == -1


def test_binds_shadow_vars():
    c = ctx().with_bind("n", E.IntD(0, 9))
    fn = E.compile_expr(E.parse_expr_text("n + 1"), c)
    assert fn((True, 2, "x", frozenset(), (0, 0)), {"n": 7}) == 8
