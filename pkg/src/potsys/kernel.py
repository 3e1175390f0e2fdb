"""Exact symbolic kernel: expressions, canonical form, differentiation, substitution.

Expressions are plain (immutable) sympy trees.  The supported fragment is the
field of rational functions over a finite set of kernels:

* variables and parameters (sympy ``Symbol``),
* ``exp``, ``sin``, ``cos``, ``arctan`` applied to fragment expressions,
* rational powers of fragment expressions (``sqrt`` included),
* applications of arbitrary functions ``A(u)``, their formal derivatives
  ``Diff(A,u)`` and formal antiderivatives ``Int(A,u)``.

:func:`normalize` maps every expression of the fragment to a unique
representative.  Kernels are replaced by fresh indeterminates; ``sin(θ)`` and
``b^(1/q)`` become algebraic indeterminates subject to ``sin(θ)^2 = 1 - cos(θ)^2``
and ``r^q = b``; the result is a reduced quotient whose denominator is free of
algebraic indeterminates, with common factors cancelled.

Ordering of printed output is sympy's structural sort key (node class, then
arguments recursively), which is independent of hash seeds, so text produced by
:func:`to_text` is byte-stable.
"""

from __future__ import annotations

import functools
import math
from collections import defaultdict

import sympy as sp
from sympy.core.function import AppliedUndef
from sympy.printing.str import StrPrinter


class OutsideFragmentError(ValueError):
    """An expression falls outside the fragment on which zero-equality is decidable."""


class Int(sp.Function):
    """Formal antiderivative ``Int(A,u)`` of an arbitrary function ``A`` in ``u``.

    Purely formal: the only rule it obeys is ``d/du Int(A,u) = A(u)``.
    """

    nargs = 2

    @classmethod
    def eval(cls, integrand, var):
        if not isinstance(var, sp.Symbol):
            raise OutsideFragmentError(
                f"antiderivative variable must be a symbol, got {var}"
            )
        if not (isinstance(integrand, AppliedUndef) and integrand.args == (var,)):
            raise OutsideFragmentError(
                f"antiderivative of compound expression {integrand} is not supported"
            )
        return None

    def _eval_derivative(self, s):
        integrand, var = self.args
        if s == var:
            return integrand
        return sp.S.Zero


def integrand_name(e: Int) -> str:
    return e.args[0].func.__name__


# ---------------------------------------------------------------------------
# preparation: validate the tree and canonicalise kernel arguments


def _expanded_terms(e):
    return sp.Add.make_args(sp.expand(e))


def _needs_trig_expansion(arg) -> bool:
    if sp.fraction(sp.together(arg))[1].free_symbols:
        return False
    if isinstance(arg, sp.Add):
        return True
    coeff, _ = arg.as_coeff_Mul()
    return coeff.is_Integer and abs(coeff) > 1


def _rebuild(e, args):
    # skip the costly re-flattening when nothing changed
    if all(a is b for a, b in zip(args, e.args)):
        return e
    return e.func(*args)


def _prepare(e):
    if e.is_Atom:
        if isinstance(e, sp.Float):
            raise OutsideFragmentError(f"floating point constant {e} in exact kernel")
        if e in (sp.zoo, sp.oo, -sp.oo, sp.nan):
            raise OutsideFragmentError(f"non-finite value {e}")
        if e == sp.I:
            raise OutsideFragmentError("complex constants are not supported")
        if e == sp.E:
            return sp.exp(sp.S.One, evaluate=False)
        return e
    if isinstance(e, (sp.Add, sp.Mul)):
        return _rebuild(e, [_prepare(a) for a in e.args])
    if isinstance(e, sp.Pow):
        base, n = e.args
        if not n.is_Rational:
            raise OutsideFragmentError(f"non-rational exponent in {e}")
        return _prepare(base) ** n
    if isinstance(e, sp.exp):
        arg = sp.expand(normalize(e.args[0]))
        return sp.exp(arg, evaluate=False) if arg == 1 else sp.exp(arg)
    if isinstance(e, (sp.sin, sp.cos)):
        arg = normalize(e.args[0])
        # addition formulas only for polynomial arguments; a rational argument
        # stays one kernel (its normal form is already canonical)
        if not sp.fraction(arg)[1].free_symbols:
            arg = sp.expand(arg)
        kernel = e.func(arg)
        if not isinstance(kernel, (sp.sin, sp.cos)):
            return _prepare(kernel)
        if _needs_trig_expansion(kernel.args[0]):
            expanded = sp.expand_trig(kernel)
            if expanded != kernel:
                return _prepare(expanded)
        return kernel
    if isinstance(e, sp.atan):
        kernel = sp.atan(normalize(e.args[0]))
        return kernel if isinstance(kernel, sp.atan) else _prepare(kernel)
    if isinstance(e, AppliedUndef):
        if not all(isinstance(a, sp.Symbol) for a in e.args):
            raise OutsideFragmentError(
                f"arbitrary function applied to non-variable argument: {e}"
            )
        return e
    if isinstance(e, sp.Derivative):
        inner = e.expr
        if not isinstance(inner, AppliedUndef):
            raise OutsideFragmentError(f"unevaluated derivative of {inner}")
        _prepare(inner)
        wrt = [v for v, k in e.variable_count for _ in range(k)]
        return sp.diff(inner, *wrt)
    if isinstance(e, Int):
        return e
    raise OutsideFragmentError(f"unsupported construct {e.func.__name__}: {e}")


# ---------------------------------------------------------------------------
# rational form over kernel indeterminates


class RationalForm:
    """An expression rewritten over kernel indeterminates.

    ``num`` and ``den`` are polynomials in ordinary symbols and kernel
    indeterminates; ``den`` contains no algebraic indeterminate and ``num`` is
    reduced modulo the algebraic relations.  ``back`` maps indeterminates to
    the kernels they stand for.
    """

    def __init__(self, num, den, back):
        self.num = num
        self.den = den
        self.back = back

    def to_expr(self):
        return self.num.xreplace(self.back) / self.den.xreplace(self.back)


class _Kernels:
    def __init__(self):
        self.exp_terms = defaultdict(set)  # monomial -> denominators seen
        self.radicals = {}  # canonical base -> lcm of exponent denominators
        self.radical_key = {}  # prepared base -> canonical base
        self.trig = set()  # arguments of sin/cos
        self.opaque = set()

    def collect(self, e):
        if e.is_Atom:
            if isinstance(e, sp.NumberSymbol):
                self.opaque.add(e)
            return
        if isinstance(e, sp.exp):
            for term in _expanded_terms(e.args[0]):
                coeff, mono = term.as_coeff_Mul()
                self.exp_terms[mono].add(sp.Rational(coeff).q)
            return
        if isinstance(e, sp.Pow) and not e.exp.is_Integer:
            base = e.base
            key = self.radical_key.get(base)
            if key is None:
                key = normalize(base)
                self.radical_key[base] = key
            self.radicals[key] = math.lcm(self.radicals.get(key, 1), e.exp.q)
            self.collect(base)
            return
        if isinstance(e, (sp.sin, sp.cos)):
            self.trig.add(e.args[0])
            return
        if isinstance(e, (sp.atan, AppliedUndef, sp.Derivative, Int)):
            self.opaque.add(e)
            return
        for a in e.args:
            self.collect(a)


class _Builder:
    """Translates a prepared expression into kernel indeterminates."""

    def __init__(self, kernels: _Kernels):
        self.k = kernels
        entries = []
        for mono, dens in kernels.exp_terms.items():
            scale = functools.reduce(math.lcm, dens, 1)
            entries.append(("exp", mono, scale))
        for base, q in kernels.radicals.items():
            entries.append(("root", base, q))
        for arg in kernels.trig:
            entries.append(("cos", arg, None))
            entries.append(("sin", arg, None))
        for op in kernels.opaque:
            entries.append(("opaque", op, None))
        entries.sort(key=lambda en: (en[0], sp.default_sort_key(en[1])))

        self.sym = {}
        self.back = {}
        self.exp_scale = {}
        self.algebraic = []  # (indeterminate, degree, replacement of its power)
        for i, (kind, obj, extra) in enumerate(entries):
            s = sp.Symbol(f"_k{i:04d}")
            self.sym[(kind, obj)] = s
            if kind == "exp":
                self.exp_scale[obj] = extra
                self.back[s] = sp.exp(obj / extra)
            elif kind == "root":
                self.back[s] = obj ** sp.Rational(1, extra)
            elif kind == "cos":
                self.back[s] = sp.cos(obj)
            elif kind == "sin":
                self.back[s] = sp.sin(obj)
            else:
                self.back[s] = obj
        for (kind, obj), s in self.sym.items():
            if kind == "root":
                self.algebraic.append((s, kernels.radicals[obj], self.convert(obj)))
            elif kind == "sin":
                c = self.sym[("cos", obj)]
                self.algebraic.append((s, 2, 1 - c**2))
        self.algebraic.sort(key=lambda a: a[0].name)

    def convert(self, e):
        if e.is_Atom:
            if isinstance(e, sp.NumberSymbol):
                return self.sym[("opaque", e)]
            return e
        if isinstance(e, sp.exp):
            out = sp.S.One
            for term in _expanded_terms(e.args[0]):
                coeff, mono = term.as_coeff_Mul()
                scale = self.exp_scale[mono]
                out *= self.sym[("exp", mono)] ** int(coeff * scale)
            return out
        if isinstance(e, sp.Pow):
            if e.exp.is_Integer:
                return self.convert(e.base) ** e.exp
            key = self.k.radical_key[e.base]
            q = self.k.radicals[key]
            total = int(e.exp * q)
            whole, rest = divmod(total, q)
            return self.convert(key) ** whole * self.sym[("root", key)] ** rest
        if isinstance(e, sp.sin):
            return self.sym[("sin", e.args[0])]
        if isinstance(e, sp.cos):
            return self.sym[("cos", e.args[0])]
        if isinstance(e, (sp.atan, AppliedUndef, sp.Derivative, Int)):
            return self.sym[("opaque", e)]
        return _rebuild(e, [self.convert(a) for a in e.args])

    def reduce(self, poly):
        """Reduce a polynomial modulo the algebraic relations."""
        changed = True
        while changed:
            changed = False
            for s, deg, rep in self.algebraic:
                if not poly.has(s):
                    continue
                p = sp.Poly(poly, s)
                if p.degree() < deg:
                    continue
                changed = True
                out = sp.S.Zero
                for (k,), c in p.terms():
                    q, r = divmod(k, deg)
                    out += c * rep**q * s**r
                poly = sp.expand(out)
        return poly

    def rationalize(self, num, den):
        """Move algebraic indeterminates out of the denominator."""
        for s, deg, rep in self.algebraic:
            if not den.has(s):
                continue
            try:
                inv = sp.invert(den, s**deg - rep, s)
            except sp.polys.polyerrors.NotInvertible as exc:
                raise OutsideFragmentError("denominator vanishes identically") from exc
            # den*inv == 1 modulo the relation, so num/den == num*inv
            inv_num, inv_den = sp.fraction(sp.cancel(sp.together(inv)))
            if inv_den.has(s):
                raise OutsideFragmentError("failed to rationalize denominator")
            num = sp.expand(num * inv_num)
            den = sp.expand(inv_den)
        return num, den


def _field(gens):
    return sp.polys.fields.FracField(gens, sp.QQ, sp.polys.orderings.lex)


def _to_pair(e, R, index):
    """``(num, den)`` ring elements for an expression over the ring generators.

    No cancellation happens here; terms of a sum are grouped by denominator and
    distinct denominators are combined through their lcm.
    """
    if e.is_Rational:
        return R(e.p), R(e.q)
    if e.is_Symbol:
        return R.gens[index[e]], R.one
    if e.is_Add:
        groups = {}
        for a in e.args:
            n, d = _to_pair(a, R, index)
            groups[d] = groups.get(d, R.zero) + n
        num, den = R.zero, R.one
        for d, n in groups.items():
            if d == den:
                num += n
                continue
            l = den.lcm(d)
            num = num * l.exquo(den) + n * l.exquo(d)
            den = l
        return num, den
    if e.is_Mul:
        num, den = R.one, R.one
        for a in e.args:
            n, d = _to_pair(a, R, index)
            num, den = num * n, den * d
        return num, den
    if e.is_Pow and e.exp.is_Integer:
        n, d = _to_pair(e.base, R, index)
        k = int(e.exp)
        return (n**k, d**k) if k >= 0 else (d**-k, n**-k)
    raise OutsideFragmentError(f"cannot convert {e} to a rational function")


def _from_expr(K, e):
    index = {g: i for i, g in enumerate(K.symbols)}
    num, den = _to_pair(sp.sympify(e), K.ring, index)
    if den == 0:
        raise OutsideFragmentError("division by zero")
    return K.new(num, den)


def _reduce_in_field(K, f, algebraic):
    """Reduce the numerator of ``f`` modulo ``s^deg = rep`` for each relation."""
    R = K.ring
    index = {g: i for i, g in enumerate(K.symbols)}
    num, den = f.numer, f.denom
    changed = True
    while changed:
        changed = False
        for s, deg, rep in algebraic:
            i = index[s]
            if not num:
                break
            qmax = num.degree(i) // deg
            if qmax == 0:
                continue
            changed = True
            P, Q = _to_pair(sp.sympify(rep), R, index)
            Ppow, Qpow = [R.one], [R.one]
            for _ in range(qmax):
                Ppow.append(Ppow[-1] * P)
                Qpow.append(Qpow[-1] * Q)
            parts = [R.zero] * (qmax + 1)
            for monom, coeff in num.terms():
                q, r = divmod(monom[i], deg)
                parts[q] += R({monom[:i] + (r,) + monom[i + 1:]: coeff})
            num = sum((parts[q] * Ppow[q] * Qpow[qmax - q] for q in range(qmax + 1)), R.zero)
            den = den * Qpow[qmax]
    return K.new(num, den)


def rational_form(e) -> RationalForm:
    """Rewrite ``e`` as a reduced quotient over kernel indeterminates."""
    prepared = _prepare(sp.sympify(e))
    kernels = _Kernels()
    kernels.collect(prepared)
    b = _Builder(kernels)
    converted = b.convert(prepared)
    syms = set(converted.free_symbols)
    grow = True
    while grow:
        extra = set().union(*[sp.sympify(rep).free_symbols for s, _, rep in b.algebraic if s in syms])
        grow = not extra <= syms
        syms |= extra
    gens = sorted(syms, key=lambda g: (g.name, sp.default_sort_key(g)))
    if not gens:
        num, den = sp.fraction(sp.Rational(converted))
        return RationalForm(num, den, b.back)
    K = _field(gens)
    f = _from_expr(K, converted)
    alg = {s for s, _, _ in b.algebraic}
    idx = {g: i for i, g in enumerate(gens)}
    for _ in range(8):
        den = f.denom
        if any(den.degree(idx[s]) > 0 for s in alg if s in idx):
            num_e, den_e = b.rationalize(f.numer.as_expr(), den.as_expr())
            f = _from_expr(K, num_e) / _from_expr(K, den_e)
        g = _reduce_in_field(K, f, [a for a in b.algebraic if a[0] in idx])
        if g == f and not any(g.denom.degree(idx[s]) > 0 for s in alg if s in idx):
            break
        f = g
    else:
        raise OutsideFragmentError(f"no canonical form reached for {e}")
    num, den = f.numer, f.denom
    lc = den.LC
    num, den = num.quo_ground(lc), den.quo_ground(lc)
    # clear rational coefficients; the denominator keeps a positive leading coefficient
    scale = math.lcm(*[int(sp.Rational(c).q) for c in den.coeffs() + num.coeffs()])
    num_e = sp.expand(num.as_expr() * scale)
    den_e = sp.expand(den.as_expr() * scale)
    return RationalForm(num_e, den_e, b.back)


@functools.lru_cache(maxsize=8192)
def _normalize_cached(e):
    form = rational_form(e)
    if form.num == 0:
        return sp.S.Zero
    num = form.num.xreplace(form.back)
    den = sp.factor(form.den).xreplace(form.back)
    return _merge_exp(num / den)


def _merge_exp(e):
    """Combine exponential factors of each product into one ``exp``."""
    if isinstance(e, sp.Add):
        return sp.Add(*[_merge_exp(a) for a in e.args])
    if isinstance(e, sp.Pow) and not isinstance(e.base, sp.exp):
        return _merge_exp(e.base) ** e.exp
    if not isinstance(e, (sp.Mul, sp.Pow, sp.exp)):
        return e
    rest, arg = [], sp.S.Zero
    for f in sp.Mul.make_args(e):
        if isinstance(f, sp.exp):
            arg += f.args[0]
        elif isinstance(f, sp.Pow) and isinstance(f.base, sp.exp):
            arg += f.exp * f.base.args[0]
        else:
            rest.append(_merge_exp(f))
    return sp.Mul(*rest) * sp.exp(arg)


def normalize(e):
    """Return the canonical form of ``e``.

    Raises :class:`OutsideFragmentError` for constructs the canonical form does
    not cover rather than returning an undecided answer.
    """
    return _normalize_cached(sp.sympify(e))


def is_zero(e) -> bool:
    return normalize(e) == 0


def equal(a, b) -> bool:
    return is_zero(sp.sympify(a) - sp.sympify(b))


def diff(e, v, n: int = 1):
    """Partial derivative treating every other symbol as constant."""
    return normalize(sp.diff(sp.sympify(e), v, n))


# ---------------------------------------------------------------------------
# substitution


def _integrate_binding(value, var):
    if not value.is_polynomial(var):
        raise OutsideFragmentError(
            f"antiderivative of {value} in {var} is outside the fragment"
        )
    return sp.integrate(sp.expand(value), var)


def _function_binding(key, value):
    """Return (name, formal args, body) for a function binding."""
    if isinstance(key, AppliedUndef):
        return key.func.__name__, key.args, sp.sympify(value)
    if isinstance(key, sp.core.function.UndefinedFunction):
        if isinstance(value, sp.Lambda):
            return key.__name__, value.variables, value.expr
        return key.__name__, None, sp.sympify(value)
    raise TypeError(f"cannot bind {key!r}")


def apply_function_bindings(e, fbind):
    """Replace arbitrary functions by explicit expressions.

    ``fbind`` maps a function name to ``(formal_args, body)``; ``formal_args``
    may be ``None`` when ``body`` does not depend on the arguments.
    """

    def instantiate(name, actual):
        formal, body = fbind[name]
        if formal is None:
            return body
        return body.xreplace(dict(zip(formal, actual)))

    def walk(node):
        if node.is_Atom:
            return node
        if isinstance(node, Int):
            name = integrand_name(node)
            if name in fbind:
                var = node.args[1]
                return _integrate_binding(instantiate(name, (var,)), var)
            return node
        if isinstance(node, sp.Derivative) and isinstance(node.expr, AppliedUndef):
            name = node.expr.func.__name__
            if name in fbind:
                body = instantiate(name, node.expr.args)
                return sp.diff(body, *[v for v, k in node.variable_count for _ in range(k)])
            return node
        if isinstance(node, AppliedUndef):
            name = node.func.__name__
            if name in fbind:
                return instantiate(name, node.args)
            return node
        return node.func(*[walk(a) for a in node.args])

    return walk(sp.sympify(e))


def substitute(e, bindings):
    """Simultaneous substitution followed by :func:`normalize`.

    Keys are symbols, applied arbitrary functions (``A(u)`` bound to an
    expression in ``u``) or bare function classes bound to a constant or a
    ``Lambda``.  Substituting a non-variable for the integration variable of an
    ``Int`` raises :class:`OutsideFragmentError`.
    """
    sym_map = {}
    fbind = {}
    for key, value in bindings.items():
        if isinstance(key, sp.Symbol):
            sym_map[key] = sp.sympify(value)
        else:
            name, formal, body = _function_binding(key, value)
            fbind[name] = (formal, body)
    out = sp.sympify(e)
    if fbind:
        out = apply_function_bindings(out, fbind)
    if sym_map:
        out = out.xreplace(sym_map)
    return normalize(out)


# ---------------------------------------------------------------------------
# text output


class _Printer(StrPrinter):
    def _print_Int(self, e):
        return f"Int({integrand_name(e)},{self._print(e.args[1])})"

    def _print_Derivative(self, e):
        inner = e.expr
        wrt = [self._print(v) for v, k in e.variable_count for _ in range(k)]
        return f"Diff({inner.func.__name__},{','.join(wrt)})"

    def _print_Function(self, e):
        name = e.func.__name__
        if name == "atan":
            name = "arctan"
        return f"{name}({','.join(self._print(a) for a in e.args)})"

    def _print_Exp1(self, e):
        return "exp(1)"


_printer = _Printer({"order": None})


def to_text(e) -> str:
    """Render an expression in the kernel's text syntax (``^`` for powers)."""
    return _printer.doprint(sp.sympify(e)).replace("**", "^")
