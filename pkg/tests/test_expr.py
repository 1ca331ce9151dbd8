from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from eipflow import body as bt
from eipflow.expr import EvalError, ExprSyntaxError, Functions, evaluate, evaluate_condition, parse
from eipflow.message import Message


@pytest.mark.parametrize("text, expected", [
    ("exists(/order/item[3])", True),
    ("exists(/order/item[4])", False),
    ("count(/order/item)", 3),
    ("/order/total > 100", True),
    ("/order/total >= 150.00 and /order/total <= 150", True),
    ("/order/customer = 'acme'", True),
    ("not (/order/customer != 'acme')", True),
    ("header('type') = 'Order'", True),
    ("body_type() = 'Order'", True),
    ("/order/item[2]/qty * 1", None),
])
def test_evaluate(order, text, expected):
    if expected is None:
        with pytest.raises(ExprSyntaxError):
            parse(text)
        return
    assert evaluate(text, order) == expected


def test_exists_false_on_two_items():
    two = Message("m", bt.from_plain("order", {"items": [1, 2]}))
    assert evaluate_condition("exists(/order/items[3])", two) is False


@pytest.mark.parametrize("text, kind", [
    ("/order/missing = 1", "missing-path"),
    ("/order/customer > 3", "type-mismatch"),
    ("true < false", "type-mismatch"),
    ("nope() = 1", "unknown-function"),
    ("header('absent') = 'x'", "missing-path"),
    ("seq() = 1", "missing-path"),
])
def test_eval_errors_are_typed(order, text, kind):
    with pytest.raises(EvalError) as info:
        evaluate(text, order)
    assert info.value.kind == kind


def test_condition_must_be_boolean(order):
    with pytest.raises(EvalError):
        evaluate_condition("/order/total", order)


def test_short_circuit_skips_missing_paths():
    m = Message("m")
    assert evaluate("false and /x/y = 1", m) is False
    assert evaluate("true or /x/y = 1", m) is True


def test_operator_spellings_agree(order):
    for a, b in (("=", "=="), ("<=", "≤"), (">=", "≥"), ("!=", "≠")):
        assert evaluate(f"/order/id {a} 7", order) == evaluate(f"/order/id {b} 7", order)


def test_host_functions(order):
    fns = Functions()

    @fns.register("vat")
    def vat(msg, rate):
        return evaluate("/order/total", msg) * rate

    fns.register("ratio", lambda msg: 0.25)
    fns.register("broken", lambda msg: 1 / 0)
    assert evaluate("vat(0.2) = 30", order, fns)
    assert evaluate("ratio()", order, fns) == Decimal("0.25")
    with pytest.raises(EvalError) as info:
        evaluate("broken()", order, fns)
    assert info.value.kind == "function-error"


@pytest.mark.parametrize("bad", ["", "1 =", "(1 = 1", "foo(", "/a/b = = 1", "'open"])
def test_syntax_errors(bad):
    with pytest.raises(ExprSyntaxError):
        parse(bad)


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6))
def test_integer_comparisons_match_python(a, b):
    m = Message("m", bt.from_plain("r", {"a": a, "b": b}))
    assert evaluate("/r/a < /r/b", m) == (a < b)
    assert evaluate("/r/a = /r/b", m) == (a == b)
    assert evaluate(f"/r/a >= {b}", m) == (a >= b)
