import numpy as np
import pytest

from pyoptswitch.expr import (
    ArityError,
    Call,
    DomainError,
    ExpressionSyntaxError,
    MissingBindingError,
    Number,
    UnknownIdentifierError,
    Variable,
    declared_names,
    parse_expression,
    probe_lipschitz,
    secant_slopes,
)

DIMS = (1, 2, 1)


def test_declared_names():
    """Test declared variable names"""
    assert declared_names(2, 3, 1) == ("t", "x1", "x2", "y1", "y2", "y3", "zvar1")


def test_parse_constant():
    """Test parse constant expression"""
    expr = parse_expression("0", DIMS)
    assert isinstance(expr, Number)
    assert expr.is_constant
    assert expr.evaluate({}) == 0.0


def test_parse_call():
    """Test parse function call"""
    expr = parse_expression("max(y1 - 0.5, 0)", DIMS)
    assert isinstance(expr, Call)
    assert expr.func == "max"
    assert len(expr.args) == 2
    assert expr.variables == frozenset({"y1"})


@pytest.mark.parametrize(
    "text, bindings, expected",
    [
        ("x1^2 + exp(-t)", {"t": 0.0, "x1": 2.0}, 5.0),
        ("t*x1", {"t": 2.0, "x1": 3.0}, 6.0),
        ("min(y1, y2)", {"y1": -1.0, "y2": 3.0}, -1.0),
        ("2^3^2", {}, 512.0),
        ("-2^2", {}, -4.0),
        ("2^-1", {}, 0.5),
        ("2*3+4", {}, 10.0),
        ("(1+2)*3", {}, 9.0),
        ("8/4/2", {}, 1.0),
        ("abs(-3) + sqrt(16) + log(1)", {}, 7.0),
        ("max(1, 5, 3) - min(4, 2, 6)", {}, 3.0),
        ("1e-3 * 1000", {}, 1.0),
    ],
)
def test_evaluate(text: str, bindings: dict, expected: float):
    """Test evaluate expression"""
    expr = parse_expression(text, DIMS)
    assert expr.evaluate(bindings) == pytest.approx(expected)


def test_evaluate_domain_error():
    """Test domain error with offending point"""
    expr = parse_expression("1 + sqrt(x1)", DIMS)
    with pytest.raises(DomainError) as e:
        expr.evaluate({"x1": -1.0})
    assert e.value.point == {"x1": -1.0}
    assert str(e.value.subexpression) == "sqrt(x1)"

    with pytest.raises(DomainError):
        parse_expression("1/x1", DIMS).evaluate({"x1": 0.0})


def test_evaluate_missing_binding():
    """Test missing binding error"""
    expr = parse_expression("x1 + y2", DIMS)
    with pytest.raises(MissingBindingError):
        expr.evaluate({"x1": 1.0})


def test_evaluate_array():
    """Test evaluate on arrays (strict & non-strict)"""
    expr = parse_expression("log(x1)", DIMS)
    x = np.array([1.0, 0.0, 2.0])
    # Case1. Strict mode reports the first offending index
    with pytest.raises(DomainError) as e:
        expr.evaluate_array({"x1": x})
    assert e.value.index == (1,)
    # Case2. Non-strict mode returns NaN entries
    values = expr.evaluate_array({"x1": x}, strict=False)
    assert values[0] == 0.0
    assert np.isnan(values[1])
    assert values[2] == pytest.approx(np.log(2.0))
    # Case3. Constant broadcast to requested shape
    values = parse_expression("3", DIMS).evaluate_array({}, shape=(2, 3))
    assert values.shape == (2, 3)
    assert np.all(values == 3.0)


@pytest.mark.parametrize(
    "text",
    ["", "   ", "1 +", "(x1 + 1", "x1 + * 2", "exp", "x1 $ 2", "max(1,)"],
)
def test_syntax_error(text: str):
    """Test syntax error"""
    with pytest.raises(ExpressionSyntaxError):
        parse_expression(text, DIMS)


def test_syntax_error_position():
    """Test syntax error line & column"""
    # Case1. Single line
    with pytest.raises(UnknownIdentifierError) as e:
        parse_expression("x1 + foo", DIMS)
    assert (e.value.line, e.value.column) == (1, 6)
    assert e.value.byte_offset == 5
    # Case2. Second line
    with pytest.raises(ExpressionSyntaxError) as e:
        parse_expression("1 +\n * 2", DIMS)
    assert (e.value.line, e.value.column) == (2, 2)
    # Case3. Literal overflowing to inf
    with pytest.raises(ExpressionSyntaxError) as e:
        parse_expression("x1 + 1e400", DIMS)
    assert e.value.offset == 5
    assert (e.value.line, e.value.column) == (1, 6)
    # Case4. Large finite literal is kept
    assert parse_expression("1e300", DIMS).evaluate({}) == pytest.approx(1e300)


@pytest.mark.parametrize(
    "text, error",
    [
        ("exp(1, 2)", ArityError),
        ("max(1)", ArityError),
        ("foo(1)", UnknownIdentifierError),
        ("x2 + 1", UnknownIdentifierError),
        ("y3", UnknownIdentifierError),
        ("zvar2", UnknownIdentifierError),
    ],
)
def test_identifier_errors(text: str, error: type):
    """Test arity & unknown identifier errors"""
    with pytest.raises(error):
        parse_expression(text, DIMS)


def test_allowed_subset():
    """Test variable restriction by allowed names"""
    allowed = ("t", "x1")
    assert parse_expression("t + x1", DIMS, allowed).variables == frozenset({"t", "x1"})
    with pytest.raises(UnknownIdentifierError):
        parse_expression("x1 + y1", DIMS, allowed)


def test_printed_form_reparses():
    """Test printed form evaluates identically after reparse"""
    text = "x1^2 - 3*min(y1, y2)/(1 + abs(t)) + exp(-x1) - -2"
    expr = parse_expression(text, DIMS)
    reparsed = parse_expression(str(expr), DIMS)
    rng = np.random.default_rng(0)
    for _ in range(100):
        bindings = {name: rng.uniform(-2, 2) for name in ("t", "x1", "y1", "y2")}
        assert reparsed.evaluate(bindings) == expr.evaluate(bindings)


def test_substitute():
    """Test variable substitution"""
    expr = parse_expression("y1 + t", DIMS)
    replaced = expr.substitute({"y1": Number(2.0)})
    assert replaced.variables == frozenset({"t"})
    assert replaced.evaluate({"t": 1.0}) == 3.0
    assert Variable("y1").substitute({}) == Variable("y1")


def test_probe_lipschitz():
    """Test Lipschitz probe"""
    # Case1. Linear
    expr = parse_expression("2*y1", DIMS)
    lip = probe_lipschitz(expr, "y1", {"y1": (-3.0, 3.0)}, 1000, seed=0)
    assert lip == pytest.approx(2.0, rel=1e-9)
    # Case2. Constant
    expr = parse_expression("0", DIMS)
    assert probe_lipschitz(expr, "y1", {"y1": (-1.0, 1.0)}, 100, seed=0) == 0.0
    # Case3. Kink
    expr = parse_expression("abs(y1)", DIMS)
    lip = probe_lipschitz(expr, "y1", {"y1": (-1.0, 1.0)}, 10_000, seed=0)
    assert 0.9 <= lip <= 1.0 + 1e-9


def test_secant_slopes_reproducible():
    """Test secant slopes reproducibility & box validation"""
    expr = parse_expression("x1*y1", DIMS)
    box = {"x1": (0.0, 1.0), "y1": (-1.0, 1.0)}
    slopes1 = secant_slopes(expr, "y1", box, 50, seed=3)
    slopes2 = secant_slopes(expr, "y1", box, 50, seed=3)
    assert np.array_equal(slopes1, slopes2)
    assert np.all((slopes1 >= 0) & (slopes1 <= 1 + 1e-9))
    with pytest.raises(ValueError):
        secant_slopes(expr, "y1", {"y1": (-1.0, 1.0)}, 50, seed=3)
