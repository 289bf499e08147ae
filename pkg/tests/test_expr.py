import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfrob.errors import ArityError, ParseError, UnknownIdentifierError
from qfrob.expr import BinOp, Call, Neg, Num, Var, evaluate_node, parse_components, parse_expression, to_text


def test_rotation_components():
    a, b = parse_components("-x2; x1", 2)
    assert a == Neg(Var(2)) and b == Var(1)


def test_precedence_and_power():
    e = parse_expression("1 + 2*x1^2", 1)
    assert evaluate_node(e, np.array([3.0])) == 19.0
    assert evaluate_node(parse_expression("-x1^2", 1), np.array([3.0])) == 9.0  # "-" base binds tighter
    assert evaluate_node(parse_expression("2/4/2"), np.zeros(1)) == 0.25


def test_functions():
    x = np.array([[0.5, -2.0]])
    e = parse_expression("max(abs(x2), sqrt(x1), 1.5) + min(x1, x2) + log(exp(x1)) + sin(0)*cos(0)", 2)
    assert evaluate_node(e, x)[0] == pytest.approx(2.0 - 2.0 + 0.5)


def test_syntax_error_position():
    with pytest.raises(ParseError) as ei:
        parse_components("x1 + * x2; x1", 2)
    assert ei.value.pos == 5


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as ei:
        parse_components("tan(x1); x2", 2)
    assert ei.value.name == "tan"
    with pytest.raises(UnknownIdentifierError):
        parse_components("x3; x1", 2)


def test_arity():
    with pytest.raises(ArityError):
        parse_components("x1; x2", 3)
    with pytest.raises(ParseError):
        parse_expression("log(x1, x2)", 2)




def test_chained_power_rejected():
    with pytest.raises(ParseError):
        parse_expression("x1^2^3", 1)


def test_whitespace_insignificant():
    a = parse_components(" x1 *  log( sqrt(x1 ^ 2 + x2^2) ) ;x2", 2)
    b = parse_components("x1*log(sqrt(x1^2+x2^2));x2", 2)
    assert a == b


def _nodes():
    leaves = st.one_of(
        st.floats(-5, 5, allow_nan=False).map(Num),
        st.integers(1, 3).map(Var),
    )

    def extend(children):
        return st.one_of(
            children.map(Neg),
            st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: BinOp(*t)),
            st.tuples(st.sampled_from(["sin", "cos", "abs", "exp"]), children).map(
                lambda t: Call(t[0], (t[1],))),
            st.tuples(st.sampled_from(["min", "max"]), children, children).map(lambda t: Call(t[0], t[1:])),
            st.tuples(children, st.integers(0, 3).map(float).map(Num)).map(lambda t: BinOp("^", *t)),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(_nodes())
def test_print_parse_round_trip(node):
    text = to_text(node)
    again = parse_expression(text, 3)
    X = np.random.default_rng(0).uniform(-2, 2, (100, 3))
    with np.errstate(all="ignore"):
        a = np.broadcast_to(evaluate_node(node, X), (100,))
        b = np.broadcast_to(evaluate_node(again, X), (100,))
    np.testing.assert_array_equal(a, b)
