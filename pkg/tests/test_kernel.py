import math
import random

import pytest
import sympy as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import A, f, mu, t, u, x
from potsys.kernel import Int, OutsideFragmentError, diff, equal, normalize, substitute, to_text
from strategies import expressions

EPS = 1e-9


def _numeric(e, point):
    """Evaluate with A(u) and its derivative replaced by numbers."""
    e = sp.sympify(e).xreplace({sp.Derivative(A(u), u): sp.Float(point["dA"], 30)})
    e = e.xreplace({A(u): sp.Float(point["A"], 30)})
    return complex(e.xreplace({s: sp.Float(point[s.name], 30) for s in e.free_symbols}).evalf(30))


def _fd(func, at, h=1e-5):
    return (func(at + h) - func(at - h)) / (2 * h)


def _random_point(rng):
    return {"t": rng.uniform(-1.5, 1.5), "x": rng.uniform(-1.5, 1.5), "u": rng.uniform(-1.5, 1.5),
            "mu": rng.uniform(-1.5, 1.5), "A": rng.uniform(0.5, 2), "dA": rng.uniform(-1, 1)}


def test_commutativity_cancels():
    assert normalize(x * u - u * x) == 0


def test_pythagorean_relation():
    assert normalize(sp.sin(t)**2 + sp.cos(t)**2 - 1) == 0
    assert normalize(sp.sin(t)**2) == normalize(1 - sp.cos(t)**2)


def test_exp_arctan_derivative_against_chain_rule_and_fd():
    got = normalize(sp.diff(sp.exp(mu * sp.atan(x)), x))
    hand = mu * sp.exp(mu * sp.atan(x)) / (1 + x**2)
    assert equal(got, hand)
    value = float(got.subs({x: 0.3, mu: 2}))
    fd = _fd(lambda s: math.exp(2 * math.atan(s)), 0.3)
    assert abs(value - fd) <= 1e-9 * max(1, abs(fd)) * 1e2


def test_exp_product_merging():
    assert normalize(sp.exp(mu * t) * sp.exp(-mu * t)) == 1
    assert equal(sp.exp(mu * t) * sp.exp(mu * sp.atan(x)), sp.exp(mu * t + mu * sp.atan(x)))


def test_diff_of_formal_antiderivative():
    assert diff(Int(A(u), u), u) == A(u)
    assert diff(Int(A(u), u), x) == 0


def test_power_rule():
    assert equal(diff((x**2 + 1)**sp.Rational(-3, 2), x), -3 * x * (x**2 + 1)**sp.Rational(-5, 2))


def test_product_rule_with_fd():
    got = diff(sp.exp(mu * t) * sp.cos(t), t)
    assert equal(got, mu * sp.exp(mu * t) * sp.cos(t) - sp.exp(mu * t) * sp.sin(t))
    value = float(got.subs({t: 0.7, mu: 0.5}))
    fd = _fd(lambda s: math.exp(0.5 * s) * math.cos(s), 0.7)
    assert abs(value - fd) < 1e-8


def test_derivative_of_arbitrary_function():
    assert diff(A(u), u) == sp.Derivative(A(u), u)
    assert to_text(diff(A(u), u)) == "Diff(A,u)"


def test_substitute_zero_coefficient():
    assert substitute(A(u) * u, {u: 0}) == 0


def test_substitute_coefficients():
    c1, c2 = sp.symbols("c1 c2")
    assert substitute(c1 * t * x + c2 * x, {c1: 1, c2: 0}) == normalize(t * x)


def test_substitute_function_by_constant():
    assert substitute(f(u), {f: 1}) == 1
    assert substitute(Int(f(u), u), {f: 1}) == u
    assert substitute(sp.Derivative(f(u), u), {f: 1}) == 0


def test_substitute_is_simultaneous():
    assert equal(substitute(t + 2 * x, {t: x, x: t}), x + 2 * t)


def test_nested_antiderivative_is_outside_fragment():
    with pytest.raises(OutsideFragmentError):
        Int(A(u) * u, u)
    with pytest.raises(OutsideFragmentError):
        substitute(Int(A(u), u), {u: t + x})


def test_text_syntax():
    assert to_text(Int(A(u), u)) == "Int(A,u)"
    assert "^" in to_text(x**2)
    assert "arctan" in to_text(sp.atan(x))


@settings(max_examples=120, deadline=None)
@given(expressions)
def test_normalize_idempotent(e):
    n = normalize(e)
    assert normalize(n) == n


@settings(max_examples=60, deadline=None)
@given(expressions, expressions, expressions)
def test_ring_axioms(a, b, c):
    assert normalize(a + 0) == normalize(a)
    assert normalize(a * 1) == normalize(a)
    assert normalize(a * 0) == 0
    assert normalize(a * (b + c) - (a * b + a * c)) == 0


@settings(max_examples=60, deadline=None)
@given(expressions, expressions)
def test_diff_is_derivation(a, b):
    for var in (t, x, u):
        assert normalize(diff(a * b, var) - (diff(a, var) * b + a * diff(b, var))) == 0


@settings(max_examples=150, deadline=None)
@given(expressions, st.integers(0, 10**6))
def test_normalize_agrees_numerically(e, seed):
    rng = random.Random(seed)
    point = _random_point(rng)
    try:
        before = _numeric(e, point)
        after = _numeric(normalize(e), point)
    except (ZeroDivisionError, TypeError, OverflowError):
        assume(False)
    assume(all(math.isfinite(z.real) and math.isfinite(z.imag) for z in (before, after)))
    assume(abs(before) < 1e12)
    assert abs(after - before) <= EPS * max(1.0, abs(before))
