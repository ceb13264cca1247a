import pytest
from hypothesis import given, strategies as st

from tmkit.errors import EvalError, ExprTypeError, ParseError
from tmkit.expr import (
    Binary, Lit, Name, Unary, check_bool, evaluate, free_names, infer_type, int_div, parse_expr, to_text,
)
from tmkit.lexer import tokenize


def ev(text, **env):
    return evaluate(parse_expr(text), env, {"COLOR": ("green", "red")})


def test_unicode_operators_fold_to_ascii():
    kinds = [t.value for t in tokenize("a ≤ b ∧ c ≠ d ∨ ¬ e ∈ ℕ ⇒ f ≥ g") if t.kind != "EOF"]
    assert kinds == ["a", "<=", "b", "and", "c", "!=", "d", "or", "not", "e", "in", "NAT", "=>", "f", ">=", "g"]


@pytest.mark.parametrize("text,expected", [
    ("1 + 2 * 3", 7),
    ("(1 + 2) * 3", 9),
    ("10 - 4 - 3", 3),
    ("7 div 2", 3),
    ("-7 div 2", -3),
    ("7 div -2", -3),
    ("-7 mod 2", -1),
    ("- 3 + 5", 2),
])
def test_arithmetic(text, expected):
    assert ev(text) == expected


@pytest.mark.parametrize("text,expected", [
    ("1 < 2 and 2 < 1", False),
    ("1 < 2 or 2 < 1", True),
    ("not 1 = 1", False),
    ("false => 1 div 0 = 0", True),
    ("true or 1 div 0 = 0", True),
    ("x in NAT", True),
    ("x in NAT1", False),
    ("ml = green", True),
    ("ml in COLOR", True),
    ("ml in {red}", False),
])
def test_predicates(text, expected):
    assert ev(text, x=0, ml="green") is expected


def test_implication_is_right_associative():
    assert to_text(parse_expr("a => b => c")) == "a => b => c"
    e = parse_expr("a => b => c")
    assert isinstance(e.right, Binary) and e.right.op == "=>"


def test_division_by_zero_is_eval_error():
    with pytest.raises(EvalError):
        ev("1 div 0")


def test_type_errors():
    with pytest.raises(ExprTypeError):
        ev("1 + true")
    with pytest.raises(ExprTypeError):
        ev("ml < 3", ml="green")
    with pytest.raises(ExprTypeError):
        check_bool(parse_expr("1 + 1"), {})


def test_infer_type():
    types = {"n": "int", "ml": "COLOR"}
    sets = {"COLOR": ("green", "red")}
    assert infer_type(parse_expr("n + 1"), types, sets) == "int"
    assert infer_type(parse_expr("n <= 3 and ml = red"), types, sets) == "bool"
    assert infer_type(parse_expr("green"), types, sets) == "COLOR"
    with pytest.raises(ExprTypeError):
        infer_type(parse_expr("ml + 1"), types, sets)
    with pytest.raises(ExprTypeError):
        infer_type(parse_expr("ghost"), types, sets)


def test_free_names():
    assert free_names(parse_expr("a + b * c < d and e in NAT")) == {"a", "b", "c", "d", "e"}


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_expr("a + * b")
    assert (info.value.line, info.value.column) == (1, 5)


@given(st.integers(-50, 50), st.integers(-50, 50).filter(bool))
def test_div_truncates_toward_zero(a, b):
    q = int_div(a, b)
    assert q == int(a / b)
    assert evaluate(Binary("div", Lit(a), Lit(b)), {}) == q
    assert evaluate(Binary("mod", Lit(a), Lit(b)), {}) == a - b * q


_ints = st.recursive(
    st.one_of(st.integers(0, 9).map(Lit), st.sampled_from("xyz").map(Name)),
    lambda sub: st.one_of(
        st.builds(Binary, st.sampled_from(["+", "-", "*"]), sub, sub),
        st.builds(Unary, st.just("-"), sub),
    ),
    max_leaves=8,
)


@given(_ints, st.integers(-5, 5), st.integers(-5, 5), st.integers(-5, 5))
def test_to_text_round_trips_values(e, x, y, z):
    env = {"x": x, "y": y, "z": z}
    again = parse_expr(to_text(e))
    assert evaluate(again, env) == evaluate(e, env)
    assert to_text(again) == to_text(parse_expr(to_text(again)))
