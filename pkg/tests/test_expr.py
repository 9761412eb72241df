import numpy as np
import pytest
from hypothesis import given, strategies as st

from jholo.expr import (Bin, Call, ExpressionError, Neg, Num, Var, evaluate, matrix_field_from_text, parse,
                        parse_scalar_field, scalar_field_from_text, to_text, variables)

X = np.array([[0.5], [-0.25], [2.0], [0.1]])


@pytest.mark.parametrize("text,value", [
    ("1 + 2 * 3", 7.0),
    ("(1 + 2) * 3", 9.0),
    ("2 ^ 3 ^ 2", 512.0),
    ("-2 ^ 2", -4.0),
    ("2 ^ -1", 0.5),
    ("8 / 4 / 2", 1.0),
    ("x1 * x3 - x2", 1.25),
    ("min(x1, x2, x3)", -0.25),
    ("max(x1, 3)", 3.0),
    ("sqrt(x3 * 8) + abs(x2)", 4.25),
    ("exp(log(x3))", 2.0),
    ("cos(0) + sin(0)", 1.0),
    ("1e-3 * 1E3", 1.0),
    (".5 + 5.", 5.5),
    ("+x1", 0.5),
])
def test_evaluation(text, value):
    assert evaluate(parse(text), X)[0] == pytest.approx(value)


@pytest.mark.parametrize("text,col", [
    ("min(x1,", 8),
    ("1 + $", 5),
    ("foo + 1", 1),
    ("sin(x1, x2)", 1),
    ("max(x1)", 1),
    ("(1 + 2", 7),
    ("1 2", 3),
    ("y1", 1),
])
def test_syntax_errors_report_column(text, col):
    with pytest.raises(ExpressionError) as err:
        parse(text)
    assert err.value.line == 1
    assert err.value.column == col


def test_errors_on_later_lines():
    with pytest.raises(ExpressionError) as err:
        parse("1 +\n  2 *\n )")
    assert (err.value.line, err.value.column) == (3, 2)


def test_overflowing_literal():
    with pytest.raises(ExpressionError):
        parse("1e999")


@pytest.mark.parametrize("text", ["1 / (x1 - 0.5)", "log(x2)", "sqrt(x2)", "x2 ^ 0.5", "x9"])
def test_domain_errors(text):
    with pytest.raises(ExpressionError):
        evaluate(parse(text), X)


def test_log_of_zero_is_minus_infinity():
    assert evaluate(parse("log(x1 - 0.5)"), X)[0] == -np.inf


def test_length_limit():
    with pytest.raises(ExpressionError):
        parse("1+" * 40000 + "1")


def test_variables_and_text():
    tree = parse("x1 * sin(x4) - x2")
    assert variables(tree) == {1, 2, 4}
    assert to_text(tree) == "((x1 * sin(x4)) - x2)"


def test_on_complex_uses_real_and_imaginary_parts():
    e = parse_scalar_field("x1 + 10 * x2 + 100 * x4")
    z = np.array([[1 + 2j], [3 + 4j]])
    assert e.on_complex(z)[0] == pytest.approx(1 + 20 + 400)


def test_scalar_field_dimension_check():
    f = scalar_field_from_text("x1^2 + x2^2", 1)
    assert f.value(0.6j) == pytest.approx(0.36)
    with pytest.raises(ExpressionError):
        scalar_field_from_text("x3", 1)


def test_matrix_field_from_text():
    A = matrix_field_from_text([[["0.1 * x1", "0.2"]]], 1)
    z = np.array([[0.5 + 0j]])
    assert A(z)[0, 0, 0] == pytest.approx(0.05 + 0.2j)
    assert not A.constant
    Z = matrix_field_from_text([["0", "0"], ["0", "0"]], 2)
    assert Z.zero
    C = matrix_field_from_text([["0.5"]], 1)
    assert C.constant and not C.zero
    with pytest.raises(ExpressionError):
        matrix_field_from_text([["0"]], 2)


# round trip ------------------------------------------------------------------
_leaf = st.one_of(st.floats(0, 1e6, allow_nan=False).map(Num), st.integers(1, 4).map(Var))


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: Bin(*t)),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "abs"]), children).map(lambda t: Call(t[0], (t[1],))),
        st.tuples(st.sampled_from(["min", "max"]), st.lists(children, min_size=2, max_size=3))
        .map(lambda t: Call(t[0], tuple(t[1]))),
    )


@given(st.recursive(_leaf, _extend, max_leaves=12))
def test_print_parse_roundtrip(tree):
    text = to_text(tree)
    again = parse(text)
    assert again == tree
    assert to_text(again) == text
