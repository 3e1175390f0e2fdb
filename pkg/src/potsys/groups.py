"""Point transformations, their action on conserved vectors, and rule-driven
canonicalization of linear combinations of basis conservation laws.

A :class:`GroupSchema` describes a parametric family of affine point
transformations together with the induced scaling of arbitrary elements and of
the potential.  Normalization rules act on the coefficient tuple of a generic
combination; every applied rule instance is checked by transforming the
combination, re-expanding it in the basis and comparing with the claimed effect.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field, replace

import sympy as sp
from sympy.core.function import AppliedUndef

from .conservation import (
    Check,
    ConservedVector,
    linear_combination,
    verify_divergence,
)
from .jets import Equation, JetSpace, PdeSystem, reduce_mod_system
from .kernel import Int, normalize, rational_form


class GroupError(ValueError):
    pass


class ConstraintError(GroupError):
    """Parameter values violate (or are not known to satisfy) a constraint."""


class TransformationError(GroupError):
    """The transformed system does not match the declared class."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotInSpanError(GroupError):
    pass


class UnsoundRuleError(GroupError):
    def __init__(self, rule, residual, message=""):
        super().__init__(message or f"rule {rule} is unsound: residual {residual}")
        self.rule = rule
        self.residual = residual


class UncoveredRegionError(GroupError):
    def __init__(self, region, coeffs):
        text = " and ".join(region) or "everywhere"
        super().__init__(f"no rule normalizes {tuple(coeffs)} where {text}")
        self.region = tuple(region)
        self.coeffs = tuple(coeffs)


class CanonicalizationError(GroupError):
    pass


# ---------------------------------------------------------------------------
# point transformations


@dataclass(frozen=True)
class PointTransformation:
    """``t~ = a t + b``, ``x~ = c x + d``, ``u~ = e u + g`` per dependent variable,
    ``F~ = s F`` per arbitrary element and ``v~ = alpha v`` for potentials."""

    t: tuple = (sp.S.One, sp.S.Zero)
    x: tuple = (sp.S.One, sp.S.Zero)
    dependent: tuple = ()
    elements: tuple = ()
    potential: sp.Expr = sp.S.One

    def dep(self, name):
        return dict(self.dependent).get(name, (sp.S.One, sp.S.Zero))

    def element(self, name):
        return dict(self.elements).get(name, sp.S.One)

    def compose(self, then: "PointTransformation") -> "PointTransformation":
        """The transformation ``then ∘ self`` (``self`` acts first)."""

        def aff(p, q):
            return (normalize(q[0] * p[0]), normalize(q[0] * p[1] + q[1]))

        deps = sorted(set(dict(self.dependent)) | set(dict(then.dependent)))
        elems = sorted(set(dict(self.elements)) | set(dict(then.elements)))
        return PointTransformation(
            aff(self.t, then.t),
            aff(self.x, then.x),
            tuple((n, aff(self.dep(n), then.dep(n))) for n in deps),
            tuple((n, normalize(self.element(n) * then.element(n))) for n in elems),
            normalize(self.potential * then.potential),
        )

    def subs(self, bindings) -> "PointTransformation":
        def f(e):
            return normalize(sp.sympify(e).xreplace(bindings))

        return PointTransformation(
            (f(self.t[0]), f(self.t[1])),
            (f(self.x[0]), f(self.x[1])),
            tuple((n, (f(a), f(b))) for n, (a, b) in self.dependent),
            tuple((n, f(s)) for n, s in self.elements),
            f(self.potential),
        )

    def is_identity(self) -> bool:
        pairs = [self.t, self.x] + [p for _, p in self.dependent]
        return (all(normalize(a - 1) == 0 and normalize(b) == 0 for a, b in pairs)
                and all(normalize(s - 1) == 0 for _, s in self.elements)
                and normalize(self.potential - 1) == 0)


def _exactly_nonzero(e):
    e = normalize(e)
    return e != 0


@dataclass(frozen=True)
class GroupSchema:
    """Parametric affine transformations.

    ``formulas`` maps ``t``, ``x``, each dependent variable and each arbitrary
    element name to its image, e.g. ``t -> e1*t + e4`` or ``A -> e2^2/e1*A(u)``.
    ``constraints`` must be nonzero; ``potential`` is the potential scale.
    """

    params: tuple = ()
    formulas: tuple = ()
    constraints: tuple = ()
    potential: sp.Expr = sp.S.One
    identity: tuple = ()

    def identity_values(self):
        return {p: v for p, v in self.identity}

    def instantiate(self, values, space: JetSpace, decide=None) -> PointTransformation:
        """Evaluate the schema at ``values`` (missing parameters take identity values).

        ``decide(e)`` returns True/False/None for ``e != 0``; the default treats
        ``e`` as nonzero unless it normalizes to zero.
        """
        vals = self.identity_values()
        vals.update({sp.Symbol(str(k)): sp.sympify(v) for k, v in values.items()})
        unknown = set(vals) - set(self.params)
        if unknown:
            raise GroupError(f"unknown group parameters {sorted(map(str, unknown))}")
        decide = decide or _exactly_nonzero
        for c in self.constraints + (self.potential,):
            value = normalize(sp.sympify(c).xreplace(vals))
            ok = decide(value)
            if ok is not True:
                why = "is violated" if ok is False else "is not implied"
                raise ConstraintError(f"constraint {c} != 0 {why} at {value}")
        t, x = space.t, space.x
        variables = {t, x} | {sp.Symbol(d) for d in space.dependent}
        deps, elems = [], []
        tt = xx = (sp.S.One, sp.S.Zero)
        for name, formula in self.formulas:
            img = sp.sympify(formula).xreplace(vals)
            if name in space.independent or name in space.dependent:
                var = sp.Symbol(name)
                a = normalize(sp.diff(img, var))
                b = normalize(img.xreplace({var: 0}))
                if normalize(img - a * var - b) != 0 or (a.free_symbols | b.free_symbols) & variables:
                    raise GroupError(f"image of {name} is not affine in {name}: {formula}")
                if name == space.independent[0]:
                    tt = (a, b)
                elif name == space.independent[1]:
                    xx = (a, b)
                else:
                    deps.append((name, (a, b)))
            else:
                apps = [f for f in img.atoms(AppliedUndef) if f.func.__name__ == name]
                if len(apps) != 1:
                    raise GroupError(f"image of {name} must be a constant multiple of {name}")
                s = normalize(img / apps[0])
                if s.free_symbols & variables or s.has(AppliedUndef):
                    raise GroupError(f"image of {name} is not a constant multiple: {formula}")
                elems.append((name, s))
        alpha = normalize(sp.sympify(self.potential).xreplace(vals))
        return PointTransformation(tt, xx, tuple(sorted(deps)), tuple(sorted(elems)), alpha)

    def contains(self, g: PointTransformation, space: JetSpace) -> bool:
        """Whether ``g`` is an instance of the schema (solved for the parameters)."""
        generic = self.instantiate({p: p for p in self.params}, space, decide=lambda e: True)
        eqs = []
        pairs = [(generic.t, g.t), (generic.x, g.x)]
        pairs += [(generic.dep(n), g.dep(n)) for n in space.dependent]
        for (a0, b0), (a1, b1) in pairs:
            eqs += [a0 - a1, b0 - b1]
        names = {n for n, _ in generic.elements} | {n for n, _ in g.elements}
        eqs += [generic.element(n) - g.element(n) for n in sorted(names)]
        eqs.append(generic.potential - g.potential)
        eqs = [normalize(e) for e in eqs]
        eqs = [sp.fraction(sp.together(e))[0] for e in eqs if e != 0]
        if not eqs:
            return True
        sols = sp.solve(eqs, list(self.params), dict=True)
        for sol in sols:
            if all(normalize(sp.sympify(c).xreplace(sol)) != 0
                   for c in self.constraints + (self.potential,)):
                return True
        return False


def _substitution(g: PointTransformation, space: JetSpace, exprs):
    """Old coordinates and arbitrary elements expressed through the new ones."""
    t, x = space.t, space.x
    (a, b), (c, d) = g.t, g.x
    scale = {t: a, x: c}
    rep = {t: (t - b) / a, x: (x - d) / c}
    for dep in space.dependent:
        e, h = g.dep(dep)
        scale[sp.Symbol(dep)] = e
        rep[sp.Symbol(dep)] = (sp.Symbol(dep) - h) / e
    for expr in exprs:
        expr = sp.sympify(expr)
        for s in space.jets_in(expr):
            dep, i, j = space.info(s)
            if i or j:
                rep[s] = a**i * c**j * s / g.dep(dep)[0]
        for f in expr.atoms(AppliedUndef):
            rep[f] = f / g.element(f.func.__name__)
        for f in expr.atoms(sp.Derivative):
            k = sp.S.One
            for v, n in f.variable_count:
                k *= scale.get(v, sp.S.One) ** n
            rep[f] = f * k / g.element(f.expr.func.__name__)
        for f in expr.atoms(Int):
            fn = f.args[0]
            rep[f] = f / (g.element(fn.func.__name__) * scale.get(f.args[1], sp.S.One))
    return rep


def transformed_system(g: PointTransformation, sys: PdeSystem) -> PdeSystem:
    """Image of ``sys`` under ``g``, written in the original names."""
    space = sys.space
    rep = _substitution(g, space, [eq.rhs for eq in sys.equations])
    eqs = []
    for eq in sys.equations:
        dep, i, j = space.info(eq.lead)
        k = g.dep(dep)[0] / (g.t[0] ** i * g.x[0] ** j)
        eqs.append(Equation(eq.lead, normalize(k * sp.sympify(eq.rhs).xreplace(rep))))
    return PdeSystem(space, tuple(eqs), sys.name, sys.nondegenerate)


def system_residual(g: PointTransformation, sys: PdeSystem, target: PdeSystem | None = None):
    """Differences between the transformed right-hand sides and those of ``target``."""
    target = target or sys
    image = transformed_system(g, sys)
    return tuple(normalize(a.rhs - b.rhs) for a, b in zip(image.equations, target.equations))


def apply_transformation(g: PointTransformation, cv: ConservedVector, sys: PdeSystem,
                         target: PdeSystem | None = None, depth=None) -> ConservedVector:
    """Transform ``cv`` by ``g`` and re-express it in the original names.

    The transformed system must coincide with ``target`` (default ``sys``, i.e.
    the class is preserved with its arbitrary elements renamed); otherwise a
    :class:`TransformationError` carries the residual.  The characteristic is
    transformed alongside, giving an independent second description.
    """
    target = target or sys
    residual = system_residual(g, sys, target)
    if any(r != 0 for r in residual):
        raise TransformationError("transformed system leaves the class", residual)
    space = sys.space
    exprs = [cv.T, cv.X] + list(cv.char or ())
    rep = _substitution(g, space, exprs)
    (a, _), (c, _) = g.t, g.x
    alpha = g.potential
    T = normalize(alpha * sp.sympify(cv.T).xreplace(rep) / c)
    X = normalize(alpha * sp.sympify(cv.X).xreplace(rep) / a)
    char = None
    if cv.char is not None:
        char = []
        for lam, eq in zip(cv.char, sys.equations):
            dep, i, j = space.info(eq.lead)
            k = alpha * a ** (i - 1) * c ** (j - 1) / g.dep(dep)[0]
            char.append(normalize(k * sp.sympify(lam).xreplace(rep)))
        char = tuple(char)
    out = ConservedVector(T, X, char, cv.name)
    check = verify_divergence(out, target, depth)
    if cv.verified and not check:
        raise TransformationError("transformed vector fails verification", check.residual)
    return replace(out, verified=bool(check))


def _varies(s, back, variables) -> bool:
    expr = back.get(s, s)
    return bool(expr.free_symbols & variables) or s in variables


def expand_in_basis(cv: ConservedVector, basis, space: JetSpace):
    """Coefficients ``k`` with ``cv = Σ k_i basis_i + (kT, kX)`` for constants kT, kX.

    Returns ``(k, (kT, kX))``.  Raises :class:`NotInSpanError` if no such
    constants exist and :class:`GroupError` if the basis is dependent.
    """
    n = len(basis)
    ks = [sp.Dummy(f"k{i}") for i in range(n)]
    kT, kX = sp.Dummy("kT"), sp.Dummy("kX")
    eqs = []
    for comp, parts, k0 in ((cv.T, [b.T for b in basis], kT), (cv.X, [b.X for b in basis], kX)):
        expr = comp - sum((k * p for k, p in zip(ks, parts)), sp.S.Zero) - k0
        form = rational_form(expr)
        if form.num == 0:
            continue
        variables = {space.t, space.x}
        variables |= set(space.jets_in(form.num.xreplace(form.back)))
        variables |= {sp.Symbol(d) for d in space.dependent}
        gens = sorted((s for s in form.num.free_symbols if _varies(s, form.back, variables)),
                      key=lambda s: s.name)
        if gens:
            coeffs = sp.Poly(form.num, *gens).coeffs()
        else:
            coeffs = [form.num]
        eqs += [sp.expand(c.xreplace(form.back)) for c in coeffs]
    unknowns = ks + [kT, kX]
    sol = sp.linsolve(eqs, unknowns) if eqs else sp.FiniteSet(tuple(unknowns))
    if not sol:
        raise NotInSpanError(f"conserved vector {cv.name} is not in the span of the basis")
    (values,) = list(sol)
    values = [normalize(v) for v in values]
    if any(v.has(*unknowns) for v in values[:n]):
        raise GroupError("basis is linearly dependent")
    values = [v.xreplace({kT: 0, kX: 0}) for v in values]
    return tuple(values[:n]), (values[n], values[n + 1])


# ---------------------------------------------------------------------------
# regions of coefficient space


@dataclass(frozen=True)
class Region:
    """A set of coefficient tuples: solved equalities plus nonzero factors."""

    unknowns: tuple = ()
    subs: tuple = ()
    nonzero: tuple = ()

    def apply(self, e):
        return normalize(sp.sympify(e).xreplace(dict(self.subs)))

    def _known(self, fe) -> bool:
        return fe in self.nonzero or normalize(-fe) in self.nonzero

    def _factor_status(self, f, back):
        if f.is_number:
            return True
        if f in back and len(f.free_symbols) == 1:
            kern = back[f]
            if isinstance(kern, sp.exp):
                return True
            if isinstance(kern, sp.Pow):
                return self.decide(kern.base)[0]
        fe = normalize(f.xreplace(back))
        if fe.is_number:
            return fe != 0
        if self._known(fe):
            return True
        if not (f.free_symbols & set(back)):
            syms = sorted(f.free_symbols, key=lambda s: s.name)
            p = sp.Poly(f, *syms)
            signs = {sp.sign(c) for c in p.coeffs()}
            even = all(all(k % 2 == 0 for k in m) for m in p.monoms())
            if even and len(signs) == 1:
                for m in p.monoms():
                    if all(self._known(s) for s, k in zip(syms, m) if k):
                        return True
        return None

    def decide(self, e):
        """``(status, factor)``: status of ``e != 0`` and an undecided factor."""
        e = self.apply(e)
        if e == 0:
            return False, None
        form = rational_form(e)
        _, factors = sp.factor_list(form.num)
        for f, _ in factors:
            status = self._factor_status(f, form.back)
            if status is None:
                return None, normalize(f.xreplace(form.back))
            if status is False:
                return False, None
        return True, None

    def is_nonzero(self, e):
        return self.decide(e)[0]

    def assume_nonzero(self, e) -> "Region":
        e = self.apply(e)
        form = rational_form(e)
        _, factors = sp.factor_list(form.num)
        new = list(self.nonzero)
        for f, _ in factors:
            if self._factor_status(f, form.back) is None:
                new.append(normalize(f.xreplace(form.back)))
        return replace(self, nonzero=tuple(new))

    def assume_zero(self, e) -> "Region | None":
        """Solve ``e = 0`` for one unknown occurring linearly; ``None`` if infeasible."""
        e = self.apply(e)
        if e == 0:
            return self
        form = rational_form(e)
        p = form.num
        kernel_syms = set().union(*[form.back[s].free_symbols for s in p.free_symbols
                                    if s in form.back]) if p.free_symbols & set(form.back) else set()
        for s in sorted(self.unknowns, key=lambda s: s.name):
            if s not in p.free_symbols or s in kernel_syms:
                continue
            poly = sp.Poly(p, s)
            if poly.degree() != 1:
                continue
            lead = poly.coeff_monomial(s)
            if self.decide(lead.xreplace(form.back))[0] is not True:
                continue
            value = normalize((-(p - lead * s) / lead).xreplace(form.back))
            subs = [(k, normalize(v.xreplace({s: value}))) for k, v in self.subs]
            subs.append((s, value))
            region = Region(self.unknowns, tuple(sorted(subs, key=lambda kv: kv[0].name)), ())
            for m in self.nonzero:
                if region.apply(m) == 0:
                    return None
                region = region.assume_nonzero(m)
            return region
        raise CanonicalizationError(f"cannot solve {e} = 0 for a coefficient")

    def describe(self) -> tuple:
        from .kernel import to_text

        out = [f"{k} = {to_text(v)}" for k, v in self.subs]
        out += [f"{to_text(m)} != 0" for m in self.nonzero]
        return tuple(out)


# ---------------------------------------------------------------------------
# rules and canonicalization


@dataclass(frozen=True)
class Residual:
    """A discrete residual parameter: if ``component`` is nonzero after the
    rule's effect, apply ``transform`` to scale it to 1."""

    component: sp.Symbol
    transform: tuple = ()
    effect: tuple = ()


@dataclass(frozen=True)
class NormalizationRule:
    name: str
    guard: tuple = ()  # (expr, must_be_nonzero)
    transform: tuple = ()  # (param, expr in coefficient names)
    effect: tuple = ()
    residual: Residual | None = None


@dataclass(frozen=True)
class Step:
    rule: str
    params: tuple
    part: str = "main"


@dataclass(frozen=True)
class Branch:
    region: Region
    provenance: tuple
    transformation: PointTransformation
    marks: tuple = ()  # (rule, component index, 0|1)


@dataclass(frozen=True)
class CanonicalClass:
    coeffs: tuple
    cv: ConservedVector
    branches: tuple

    @property
    def characteristic(self):
        return self.cv.char


@dataclass(frozen=True)
class Family:
    coeffs: tuple
    members: tuple
    parameter: sp.Symbol | None = None


@dataclass(frozen=True)
class CanonicalSet:
    names: tuple
    classes: tuple
    trivial: tuple = ()
    checks: tuple = ()
    parametric: bool = False

    def __len__(self):
        return len(self.classes)

    def families(self, eps=sp.Symbol("epsilon")) -> tuple:
        """Group classes differing only in one residual component (0 versus 1)."""
        used = set()
        out = []
        keyed = {}
        for k, cls in enumerate(self.classes):
            for rule, idx, val in cls.branches[0].marks[-1:]:
                key = (rule, idx, tuple(c for i, c in enumerate(cls.coeffs) if i != idx))
                keyed.setdefault(key, []).append((k, idx))
        for key, members in keyed.items():
            if len(members) == 2:
                (k0, idx), (k1, _) = members
                coeffs = list(self.classes[k0].coeffs)
                coeffs[idx] = eps
                out.append((min(k0, k1), Family(tuple(coeffs), (k0, k1), eps)))
                used |= {k0, k1}
        for k, cls in enumerate(self.classes):
            if k not in used:
                out.append((k, Family(cls.coeffs, (k,))))
        return tuple(f for _, f in sorted(out, key=lambda p: p[0]))


@dataclass
class _State:
    coeffs: tuple
    region: Region
    provenance: tuple = ()
    transformation: PointTransformation = field(default_factory=PointTransformation)
    marks: tuple = ()
    rule: int = 0
    steps: int = 0


def _eval_guard(rule, cmap, region):
    for expr, nonzero in rule.guard:
        status, factor = region.decide(sp.sympify(expr).xreplace(cmap))
        if status is None:
            return None, factor
        if status is not nonzero:
            return False, None
    return True, None


def check_instance(g, coeffs, effect, basis, sys, region=None, depth=None, rule=""):
    """Soundness of one rule instance: transform, re-expand and compare.

    The transformed characteristic is compared too (modulo trivial ones).
    """
    region = region or Region()
    combo = linear_combination(coeffs, basis)
    image = apply_transformation(g, combo, sys, depth=depth)
    got, _ = expand_in_basis(image, basis, sys.space)
    residual = tuple(region.apply(a - b) for a, b in zip(got, effect))
    if any(r != 0 for r in residual):
        raise UnsoundRuleError(rule, residual)
    if image.char is not None and all(b.char is not None for b in basis):
        expected = linear_combination(effect, basis).char
        diff = tuple(region.apply(reduce_mod_system(region.apply(a - b), sys, depth))
                     for a, b in zip(image.char, expected))
        if any(r != 0 for r in diff):
            raise UnsoundRuleError(rule, diff, f"rule {rule}: characteristic route disagrees: {diff}")
    return residual


def _coeff_names(coeffs, names):
    if names is None:
        if not all(isinstance(c, sp.Symbol) for c in coeffs):
            raise GroupError("coefficient names are required for non-symbolic tuples")
        names = coeffs
    return tuple(sp.Symbol(str(n)) for n in names)


def canonicalize(coeffs, basis, rules, schema: GroupSchema | None = None,
                 sys: PdeSystem | None = None, names=None, max_steps: int = 32,
                 check: bool = True, depth=None) -> CanonicalSet:
    """Reduce the combination ``Σ coeffs_i basis_i`` by the ordered ``rules``.

    Undecided guards split the region into zero/nonzero parts; the first rule
    whose guard holds and whose effect changes the tuple is applied.  Leaves
    with free coefficients are uncovered regions (an error) unless ``rules`` is
    empty, in which case the generic tuple is returned as it stands.
    """
    coeffs = tuple(sp.sympify(c) for c in coeffs)
    names = _coeff_names(coeffs, names)
    schema = schema or GroupSchema()
    if len(coeffs) != len(basis) or len(names) != len(basis):
        raise GroupError("one coefficient per basis vector is required")
    if sys is None:
        raise GroupError("a system is required")
    unknowns = tuple(sorted(set().union(*[c.free_symbols for c in coeffs]) & set(names),
                            key=lambda s: s.name))
    if not rules:
        cv = linear_combination(coeffs, basis, "class1")
        cls = CanonicalClass(coeffs, cv, (Branch(Region(unknowns), (), PointTransformation()),))
        return CanonicalSet(names, (cls,), (), (), bool(unknowns))

    leaves = []
    trivial = []
    soundness = []
    stack = [_State(tuple(normalize(c) for c in coeffs), Region(unknowns))]
    while stack:
        st = stack.pop()
        if st.steps > max_steps:
            raise CanonicalizationError(f"no fixed point after {max_steps} rule applications")
        moved = False
        while st.rule < len(rules):
            rule = rules[st.rule]
            cmap = dict(zip(names, st.coeffs))
            status, factor = _eval_guard(rule, cmap, st.region)
            if status is None:
                _branch(stack, st, factor)
                moved = True
                break
            if not status:
                st.rule += 1
                continue
            outcome = _apply_rule(rule, st, names, schema, sys, basis, check, depth, soundness)
            if outcome is None:
                st.rule += 1
                continue
            if outcome[0] == "branch":
                _branch(stack, st, outcome[1])
            else:
                stack.append(outcome[1])
            moved = True
            break
        if moved:
            continue
        if all(c == 0 for c in st.coeffs):
            trivial.append(st.region.describe())
            continue
        free = set().union(*[c.free_symbols for c in st.coeffs]) & set(names)
        if free:
            raise UncoveredRegionError(st.region.describe(), [str(c) for c in st.coeffs])
        leaves.append(st)

    classes = {}
    for st in leaves:
        classes.setdefault(st.coeffs, []).append(
            Branch(st.region, st.provenance, st.transformation, st.marks))
    ordered = sorted(classes, key=lambda tup: [sp.default_sort_key(c) for c in reversed(tup)])
    out = []
    for k, tup in enumerate(ordered, 1):
        cv = linear_combination(tup, basis, f"class{k}")
        out.append(CanonicalClass(tup, cv, tuple(classes[tup])))
    checks = []
    if check:
        checks.append(Check("soundness", True, sp.Integer(len(soundness))))
        checks.append(check_provenance(coeffs, names, out, basis, schema, sys, depth))
        checks.append(check_exhaustive(names, rules, [c.coeffs for c in out]))
    return CanonicalSet(names, tuple(out), tuple(trivial), tuple(checks), False)


def _branch(stack, st, factor):
    zero = st.region.assume_zero(factor)
    if zero is not None:
        stack.append(replace(st, coeffs=tuple(zero.apply(c) for c in st.coeffs), region=zero))
    stack.append(replace(st, region=st.region.assume_nonzero(factor)))


def _instance(rule_name, transform, effect, cmap, region, schema, space, part):
    params = {p: region.apply(sp.sympify(v).xreplace(cmap)) for p, v in transform}
    eff = tuple(region.apply(sp.sympify(e).xreplace(cmap)) for e in effect)
    try:
        g = schema.instantiate(params, space, decide=region.is_nonzero)
    except ConstraintError as exc:
        raise GroupError(f"rule {rule_name}: {exc}") from exc
    step = Step(rule_name, tuple(sorted(((str(p), v) for p, v in params.items()))), part)
    return g, eff, step


def _apply_rule(rule, st, names, schema, sys, basis, check, depth, soundness):
    region = st.region
    cmap = dict(zip(names, st.coeffs))
    g, eff, step = _instance(rule.name, rule.transform, rule.effect, cmap, region, schema,
                             sys.space, "main")
    steps = [(g, st.coeffs, eff, step)]
    final = eff
    marks = st.marks
    if rule.residual is not None:
        cmap2 = dict(zip(names, eff))
        idx = names.index(rule.residual.component)
        status, factor = region.decide(rule.residual.component.xreplace(cmap2))
        if status is None:
            return "branch", factor
        marks = marks + ((rule.name, idx, 1 if status else 0),)
        if status:
            g2, eff2, step2 = _instance(rule.name, rule.residual.transform, rule.residual.effect,
                                        cmap2, region, schema, sys.space, "residual")
            steps.append((g2, eff, eff2, step2))
            final = eff2
    if all(region.apply(a - b) == 0 for a, b in zip(final, st.coeffs)):
        return None
    trans = st.transformation
    prov = st.provenance
    for g_k, before, after, step_k in steps:
        if all(region.apply(a - b) == 0 for a, b in zip(before, after)) and g_k.is_identity():
            continue
        if check:
            check_instance(g_k, before, after, basis, sys, region, depth, rule.name)
            soundness.append(step_k)
        trans = trans.compose(g_k)
        prov = prov + (step_k,)
    return "next", _State(final, region, prov, trans, marks, 0, st.steps + 1)


def check_provenance(coeffs, names, classes, basis, schema, sys, depth=None) -> Check:
    """Each leaf's composed chain maps the generic combination onto the leaf."""
    bad = []
    for cls in classes:
        for br in cls.branches:
            region = br.region
            g = br.transformation.subs(dict(region.subs))
            start = tuple(region.apply(c) for c in coeffs)
            try:
                if g.is_identity():
                    got = start
                else:
                    image = apply_transformation(g, linear_combination(start, basis), sys, depth=depth)
                    got, _ = expand_in_basis(image, basis, sys.space)
                residual = [region.apply(a - b) for a, b in zip(got, cls.coeffs)]
                in_schema = schema.contains(g, sys.space) if schema.params else g.is_identity()
            except GroupError as exc:
                bad.append(str(exc))
                continue
            if any(r != 0 for r in residual) or not in_schema:
                bad.append((cls.coeffs, tuple(residual), in_schema))
    return Check("provenance", not bad, sp.sympify(len(bad)))


def run_rules(values, names, rules, max_steps: int = 32):
    """Apply ``rules`` to a concrete coefficient tuple (effects only)."""
    names = tuple(sp.Symbol(str(n)) for n in names)
    cur = tuple(normalize(v) for v in values)
    for _ in range(max_steps):
        for rule in rules:
            cmap = dict(zip(names, cur))
            if not all((normalize(sp.sympify(e).xreplace(cmap)) != 0) == nz for e, nz in rule.guard):
                continue
            new = tuple(normalize(sp.sympify(e).xreplace(cmap)) for e in rule.effect)
            if rule.residual is not None:
                cmap2 = dict(zip(names, new))
                if normalize(rule.residual.component.xreplace(cmap2)) != 0:
                    new = tuple(normalize(sp.sympify(e).xreplace(cmap2)) for e in rule.residual.effect)
            if new != cur:
                cur = new
                break
        else:
            return cur
    raise CanonicalizationError(f"no fixed point for {values}")


def check_exhaustive(names, rules, leaves, samples: int = 2, seed: int = 0) -> Check:
    """Enumerate zero/sign patterns of the coefficients with random magnitudes and
    confirm every nonzero tuple ends on one of ``leaves``."""
    rng = random.Random(seed)
    leafset = set(tuple(l) for l in leaves)
    missed = []
    for pattern in itertools.product((0, 1, -1), repeat=len(names)):
        if not any(pattern):
            continue
        for _ in range(samples):
            vals = [sp.Rational(s * rng.randint(1, 9), rng.randint(1, 9)) for s in pattern]
            end = run_rules(vals, names, rules)
            if end not in leafset:
                missed.append((tuple(vals), end))
    return Check("exhaustiveness", not missed, sp.sympify(len(missed)))


@dataclass(frozen=True)
class CollapseReport:
    dimension: int
    classes: int
    collapsed: bool
    parametric: bool = False


def collapse_check(basis, rules, schema=None, sys=None, names=None) -> CollapseReport:
    """Compare the number of canonical classes with the basis dimension."""
    names = names or [f"c{i}" for i in range(len(basis), 0, -1)]
    coeffs = tuple(sp.Symbol(str(n)) for n in names)
    canon = canonicalize(coeffs, basis, rules, schema, sys, names=coeffs, check=False)
    n = len(canon.classes)
    return CollapseReport(len(basis), n, (not canon.parametric) and n < len(basis), canon.parametric)
