"""Hypothesis strategies for random expressions and differential functions."""

import sympy as sp
from hypothesis import strategies as st

from conftest import A, SPACE, mu, t, u, x

JETS = [SPACE.jet("u", i, j) for i, j in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))]

small_rationals = st.builds(sp.Rational, st.integers(-5, 5), st.integers(1, 4))


def _leaves(extra=()):
    return st.one_of(small_rationals, st.sampled_from([t, x, u, mu, A(u)] + list(extra)))


def _extend(children):
    unary = st.one_of(
        st.builds(sp.exp, children),
        st.builds(sp.sin, children),
        st.builds(sp.cos, children),
        st.builds(sp.atan, children),
        st.builds(lambda e: sp.sqrt(1 + e**2), children),
    )
    binary = st.one_of(
        st.builds(sp.Add, children, children),
        st.builds(sp.Mul, children, children),
        st.builds(lambda a, b: a / (2 + b**2), children, children),
        st.builds(lambda a, k: a**k, children, st.integers(-2, 3)),
    )
    return st.one_of(unary, binary)



def _finite(e):
    return not e.has(sp.zoo, sp.nan, sp.oo, -sp.oo)


expressions = st.recursive(_leaves(), _extend, max_leaves=6).filter(_finite)

# polynomial-rational differential functions with a few kernels
differential_functions = st.recursive(
    _leaves(JETS),
    lambda c: st.one_of(st.builds(sp.Add, c, c), st.builds(sp.Mul, c, c),
                        st.builds(sp.exp, c.filter(lambda e: not e.free_symbols & set(JETS))),
                        st.builds(sp.sin, st.sampled_from([t, x, u]))),
    max_leaves=6,
)


def random_differential_function(rng, depth=3):
    """Plain random counterpart of ``differential_functions`` for counted sweeps."""
    if depth == 0 or rng.random() < 0.3:
        pick = rng.randrange(3)
        if pick == 0:
            return sp.Rational(rng.randint(-5, 5), rng.randint(1, 4))
        if pick == 1:
            return rng.choice([t, x, u, mu, A(u)])
        return rng.choice(JETS)
    a = random_differential_function(rng, depth - 1)
    b = random_differential_function(rng, depth - 1)
    op = rng.randrange(5)
    if op == 0:
        return a + b
    if op == 1:
        return a * b
    if op == 2:
        return sp.exp(rng.choice([t, x, u]) * rng.randint(1, 3)) * a
    if op == 3:
        return sp.sin(rng.choice([t, x, u])) * a + b
    return a * b / (1 + rng.choice([t, x, u])**2)


def random_expression(rng, depth=3):
    """Random jet-free expression with transcendental kernels."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.4:
            return sp.Rational(rng.randint(-5, 5), rng.randint(1, 4))
        return rng.choice([t, x, u, mu, A(u)])
    a = random_expression(rng, depth - 1)
    b = random_expression(rng, depth - 1)
    op = rng.randrange(9)
    return [lambda: a + b, lambda: a * b, lambda: a / (2 + b**2), lambda: a**rng.randint(-2, 3),
            lambda: sp.exp(a), lambda: sp.sin(a), lambda: sp.cos(a), lambda: sp.atan(a),
            lambda: sp.sqrt(1 + a**2)][op]()
