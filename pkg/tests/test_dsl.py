import math

import pytest
from hypothesis import given, settings, strategies as st

from isosim.dsl import (
    BinOp, Call, Const, Neg, Var, evaluate, free_variables, parse, to_source, tokenize,
)
from isosim.errors import EvaluationError, LexError, ParseError


def kinds(src):
    return [(t.kind, t.text) for t in tokenize(src)]


def test_tokenize_simple():
    assert kinds("x1+2") == [
        ("identifier", "x1"), ("operator", "+"), ("number", "2"), ("end", ""),
    ]


def test_tokenize_empty_has_only_end_marker():
    toks = tokenize("")
    assert [t.kind for t in toks] == ["end"]


def test_tokenize_potential():
    toks = tokenize("0.5*(x1-x2)^2")[:-1]
    assert len(toks) == 9
    assert [t.text for t in toks[-2:]] == ["^", "2"]


def test_token_positions_increase_and_reproduce_source():
    src = "  0.5 * ( x1 -x2 )^2 "
    toks = tokenize(src)
    assert all(a.position < b.position for a, b in zip(toks, toks[1:]))
    assert "".join(t.text for t in toks) == src.replace(" ", "")


def test_positions_are_byte_offsets():
    with pytest.raises(LexError) as exc:
        tokenize("x1 + ω")
    assert exc.value.position == 5
    with pytest.raises(LexError) as exc:
        tokenize("x1 + 2 ?")
    assert exc.value.position == 7


@pytest.mark.parametrize("src", ["1e", "2x", "1.2.3", "1e999", "3 # 4"])
def test_lex_errors(src):
    with pytest.raises(LexError):
        tokenize(src)


def test_scientific_notation():
    assert evaluate(parse("1.5e-3 + .5E+1"), {}) == 1.5e-3 + 5.0


def test_power_is_right_associative():
    e = parse("2^3^2")
    assert e == BinOp("^", Const(2.0), BinOp("^", Const(3.0), Const(2.0)))
    assert evaluate(e, {}) == 512.0


def test_power_binds_tighter_than_negation():
    assert parse("-x1^2") == Neg(BinOp("^", Var("x1"), Const(2.0)))
    assert evaluate(parse("-x1^2"), {"x1": 3}) == -9.0


def test_negative_exponent():
    assert parse("2^-1") == BinOp("^", Const(2.0), Neg(Const(1.0)))
    assert evaluate(parse("2^-1"), {}) == 0.5


@pytest.mark.parametrize(
    "src, value",
    [
        ("1+2*3", 7.0),
        ("(1+2)*3", 9.0),
        ("8/4/2", 1.0),
        ("8-4-2", 2.0),
        ("-2*3", -6.0),
        ("2*-3", -6.0),
        ("--2", 2.0),
        ("max(1, min(5, 3))", 3.0),
        ("abs(-2.5) + tanh(0)", 2.5),
    ],
)
def test_precedence_table(src, value):
    assert evaluate(parse(src), {}) == value


def test_syntax_error_offset():
    with pytest.raises(ParseError) as exc:
        parse("x1 + * 2")
    assert exc.value.position == 5


@pytest.mark.parametrize("src", ["(x1", "x1)", "sin()", "x1 x2", "", "max(1,)"])
def test_syntax_errors(src):
    with pytest.raises(ParseError):
        parse(src)


def test_unknown_function_and_arity():
    with pytest.raises(ParseError, match="unknown function"):
        parse("cosh(x1)")
    with pytest.raises(ParseError, match="argument"):
        parse("min(x1)")
    with pytest.raises(ParseError, match="argument"):
        parse("sin(x1, x2)")


def test_evaluate_examples():
    assert evaluate(parse("0.5*(x1-x2)^2"), {"x1": 1, "x2": 0}) == 0.5
    assert evaluate(parse("sin(pi/2)"), {}) == 1.0
    assert evaluate(parse("e"), {}) == math.e


@pytest.mark.parametrize(
    "src, bindings, offending",
    [
        ("1/x1", {"x1": 0}, "1.0 / x1"),
        ("sqrt(x1)", {"x1": -1}, "sqrt(x1)"),
        ("exp(x1)", {"x1": 1000}, "exp(x1)"),
        ("(-8)^(1/3)", {}, "(-8.0)^(1.0 / 3.0)"),
        ("10^400", {}, "10.0^400.0"),
        ("0^-1", {}, "0.0^-1.0"),
    ],
)
def test_evaluation_errors_name_subexpression(src, bindings, offending):
    with pytest.raises(EvaluationError) as exc:
        evaluate(parse(src), bindings)
    assert exc.value.subexpression == offending


def test_division_by_zero_names_node():
    with pytest.raises(EvaluationError) as exc:
        evaluate(parse("2 + 1/x1"), {"x1": 0})
    assert exc.value.subexpression == "1.0 / x1"


def test_unbound_variable():
    with pytest.raises(EvaluationError, match="unbound"):
        evaluate(parse("x1 + k0"), {"x1": 1})


def test_free_variables():
    assert free_variables(parse("0.5*(x1-x2)^2")) == {"x1", "x2"}
    assert free_variables(parse("3.0*pi")) == set()
    assert free_variables(parse("x1*t")) == {"x1", "t"}
    assert free_variables(parse("max(x3, e*k)")) == {"x3", "k"}


# ------------------------------------------------------------ properties

names = st.sampled_from(["x1", "x2", "t", "k", "pi"])
consts = st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(abs)
leaves = st.one_of(consts.map(Const), names.map(Var))


def _extend(children):
    unary = st.sampled_from(["sin", "cos", "exp", "sqrt", "abs", "tanh"])
    binary_f = st.sampled_from(["min", "max"])
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda a: BinOp(*a)),
        st.tuples(unary, children).map(lambda a: Call(a[0], (a[1],))),
        st.tuples(binary_f, children, children).map(lambda a: Call(a[0], (a[1], a[2]))),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)
BINDINGS = {"x1": 0.3, "x2": 0.7, "t": 1.25, "k": 2.0}


def _safe_eval(e):
    try:
        return evaluate(e, BINDINGS)
    except EvaluationError as exc:
        return ("error", str(exc))


@settings(max_examples=1500, deadline=None)
@given(trees)
def test_print_parse_round_trip(e):
    assert parse(to_source(e)) == e


@settings(max_examples=1000, deadline=None)
@given(trees)
def test_evaluate_after_round_trip_is_identical(e):
    assert _safe_eval(parse(to_source(e))) == _safe_eval(e)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_evaluation_is_deterministic(e):
    a, b = _safe_eval(e), _safe_eval(e)
    assert a == b
    if isinstance(a, float):
        assert math.isfinite(a)
