import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corner_moser.densexpr import (
    BinOp, Call, Const, EvaluationError, ExprSyntaxError, Neg, Num, UnknownIdentifier, Var,
    eval as ev, evaluate, parse, sample, sample_positive, to_source,
)
from corner_moser.errors import PositivityError
from corner_moser.geometry import Domain, make_grid


def test_simple_tree():
    assert parse("0.5 + x") == BinOp("+", Num(0.5), Var("x"))


def test_density_tree():
    e = parse("1 + 0.3*sin(pi*x)*sin(pi*y)")
    assert isinstance(e, BinOp) and e.op == "+"
    assert e.right.right == Call("sin", BinOp("*", Const("pi"), Var("y")))


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("2 *")
    assert err.value.offset == 3


@pytest.mark.parametrize("src,offset", [("(1 + 2", 6), ("1 + + ", 4), ("3 $ 4", 2), ("sin x", 4), ("1 2", 2)])
def test_more_syntax_errors(src, offset):
    with pytest.raises(ExprSyntaxError) as err:
        parse(src)
    assert err.value.offset == offset


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as err:
        parse("1 + log(x)")
    assert err.value.offset == 4


def test_precedence():
    assert parse("-2^2") == Neg(BinOp("^", Num(2), Num(2)))
    assert ev("2^3^2", ()) == 512
    assert ev("-2^2", ()) == -4
    assert ev("2^-1", ()) == 0.5
    assert ev("8/4/2", ()) == 1
    assert ev("1 - 2 - 3", ()) == -4


TABLE = [
    ("0.5 + x", (1.0,), 1.5),
    ("2*x - y", (1.5, 4), -1.0),
    ("x*y*z", (2, 3, 4), 24),
    ("1 / 8", (), 0.125),
    ("(1 + x)^2", (2,), 9),
    ("-x^2", (3,), -9),
    ("sqrt(16)", (), 4),
    ("abs(-2.5)", (), 2.5),
    ("exp(0)", (), 1),
    ("sin(pi/2)", (), 1),
    ("cos(pi)", (), -1),
    ("2 * pi", (), 2 * math.pi),
    ("1e-3 * 1000", (), 1.0),
    (".5 + .25", (), 0.75),
    ("x / y", (1, 4), 0.25),
    ("-(x - y)", (1, 3), 2),
    ("3 - -2", (), 5),
    ("2^0.5^2", (), 2**0.25),
    ("y^2 + z^2", (0, 3, 4), 25),
    ("exp(x) * exp(-x)", (1.7,), 1),
]


@pytest.mark.parametrize("src,point,expected", TABLE)
def test_hand_checked_values(src, point, expected):
    assert ev(src, point) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("src,point", [("1/x", (0.0,)), ("sqrt(x)", (-1.0,)), ("exp(x)", (1e4,))])
def test_evaluation_errors(src, point):
    with pytest.raises(EvaluationError) as err:
        ev(src, point)
    assert err.value.point == list(point)


def test_missing_coordinate():
    with pytest.raises(EvaluationError):
        ev("x + y", (1.0,))


CORPUS = [src for src, _, _ in TABLE] + [
    "1", "x", "pi", "-x", "--x", "x^y^z", "(x)", "((1))", "sin(cos(x))", "abs(x - 0.5) * 2",
    "1 + 0.3*sin(pi*x)*sin(pi*y)", "0.5 + x", "x*x - y/z", "2^(x+1)", "exp(-x^2 - y^2)",
    "sqrt(x^2 + y^2 + z^2)", "1/(1 + x)", "3*x - 2*y + z", "-(1)", "-1^2", "x - -y", "1.25e2",
    "cos(2*pi*x)*cos(2*pi*y)", "(1 + x)*(1 - x)", "x/y/z", "2*3^2", "-sin(x)^2", "abs(-x)",
    "1 + 2 + 3 + 4", "((x + y) * (y + z))",
]


def test_corpus_size():
    assert len(CORPUS) >= 50


@pytest.mark.parametrize("src", CORPUS)
def test_round_trip(src):
    e = parse(src)
    assert parse(to_source(e)) == e


@st.composite
def exprs(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.one_of(
            st.floats(0, 100, allow_nan=False).map(Num), st.sampled_from("xyz").map(Var), st.just(Const("pi"))))
    kind = draw(st.sampled_from(["neg", "bin", "call"]))
    if kind == "neg":
        return Neg(draw(exprs(depth - 1)))
    if kind == "call":
        return Call(draw(st.sampled_from(["exp", "sin", "cos", "sqrt", "abs"])), draw(exprs(depth - 1)))
    return BinOp(draw(st.sampled_from("+-*/^")), draw(exprs(depth - 1)), draw(exprs(depth - 1)))


@given(exprs())
def test_printed_trees_parse_back(e):
    assert parse(to_source(e)) == e


def test_vectorized_matches_pointwise():
    e = parse("1 + 0.3*sin(pi*x)*cos(y)")
    x = np.linspace(0, 1, 7)
    y = np.linspace(0, 2, 7)
    v = evaluate(e, x, y)
    for k in range(7):
        assert v[k] == ev(e, (x[k], y[k]))


def test_sampling():
    g = make_grid(Domain.cube(2), 5)
    assert np.all(sample_positive(parse("1"), g) == 1)
    with pytest.raises(PositivityError):
        sample_positive(parse("x - 0.5"), make_grid(Domain.cube(1), 9))
    v = sample_positive(parse("0.5 + x"), make_grid(Domain.cube(1), 512))
    assert v.shape == (512,) and v[0] == 0.5 and v[-1] == 1.5
    with pytest.raises(EvaluationError):
        sample(parse("z"), g)
