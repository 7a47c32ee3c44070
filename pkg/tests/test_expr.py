import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracgraph.expr import Binary, Call, Expression, ExpressionError, Num, Unary, Var, eval_expression, parse, to_source


def strip(node):
    """AST with positions zeroed, for structural comparison."""
    if isinstance(node, Num):
        return Num(node.value)
    if isinstance(node, Var):
        return Var(node.name)
    if isinstance(node, Unary):
        return Unary(strip(node.operand))
    if isinstance(node, Binary):
        return Binary(node.op, strip(node.left), strip(node.right))
    return Call(node.name, tuple(strip(a) for a in node.args))


leaves = st.one_of(
    st.floats(0, 1e6, allow_nan=False).map(Num),
    st.sampled_from(["x", "t", "k", "pi"]).map(Var),
)
trees = st.recursive(
    leaves,
    lambda kids: st.one_of(
        kids.map(Unary),
        st.tuples(st.sampled_from("+-*/^"), kids, kids).map(lambda a: Binary(*a)),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "sqrt"]), kids).map(lambda a: Call(a[0], (a[1],))),
        st.tuples(kids, kids).map(lambda a: Call("pow", a)),
    ),
    max_leaves=12,
)


@given(trees)
def test_round_trip(tree):
    assert strip(parse(to_source(tree))) == tree


@pytest.mark.parametrize("src, value", [
    ("1 + 2*3", 7.0),
    ("2^3^2", 512.0),
    ("-2^2", -4.0),
    ("(-2)^2", 4.0),
    ("2^-1", 0.5),
    ("10/4/5", 0.5),
    ("1 - 2 - 3", -4.0),
    ("pow(2, 10)", 1024.0),
    ("sqrt(16) + exp(0) + cos(0) + sin(0)", 6.0),
    ("1.5e2", 150.0),
    (".5", 0.5),
    ("pi", math.pi),
])
def test_values(src, value):
    assert eval_expression(src, {}) == pytest.approx(value, rel=1e-15)


def test_vectorised():
    x = np.linspace(0, 1, 5)
    e = Expression("1 + x^2 + t*k")
    npt.assert_allclose(e(x=x, t=0.5, k=2), 1 + x**2 + 1.0)
    assert e.variables == frozenset({"x", "t", "k"})
    assert e.evaluate(x, x=0.0, t=0.0, k=0.0).shape == (5,)


@pytest.mark.parametrize("src, pos", [
    ("1 +", 3),
    ("2 * (3 + 4", 10),
    ("foo(1)", 0),
    ("y + 1", 0),
    ("1 $ 2", 2),
    ("sin(1, 2)", 0),
    ("1 2", 2),
    ("", 0),
])
def test_parse_errors_carry_position(src, pos):
    with pytest.raises(ExpressionError) as exc:
        parse(src)
    assert exc.value.position == pos
    assert "position" in str(exc.value)


@pytest.mark.parametrize("src, pos", [("1/(x-x)", 1), ("sqrt(x - 2)", 0), ("(0-1)^0.5", 5)])
def test_domain_errors(src, pos):
    with pytest.raises(ExpressionError) as exc:
        eval_expression(src, {"x": np.array([1.0])})
    assert exc.value.position == pos


def test_require_reports_offending_variable():
    with pytest.raises(ExpressionError, match="'t' is not allowed") as exc:
        Expression("x + 2*t").require({"x", "k"}, "gamma")
    assert exc.value.position == 6


def test_unbound_variable():
    with pytest.raises(ExpressionError, match="unbound"):
        Expression("x")()


def test_non_string():
    with pytest.raises(ExpressionError):
        parse(3)
