"""Lie point symmetries: prolongation, determining residuals, potential symmetries."""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp
from sympy.core.function import AppliedUndef

from .jets import JetSpace, PdeSystem, reduce_mod_system
from .kernel import normalize, rational_form, to_text
from .potentials import PotentialSystem


class SymmetryError(ValueError):
    pass


class UndeclaredSymbolError(SymmetryError):
    pass


class NotASymmetryError(SymmetryError):
    pass


@dataclass(frozen=True)
class VectorField:
    """``xi d_t + tau d_x + Σ eta_a d_{u^a}``; ``unknowns`` are unspecified functions."""

    xi: sp.Expr = sp.S.Zero
    tau: sp.Expr = sp.S.Zero
    eta: tuple = ()
    unknowns: tuple = ()
    name: str = ""

    def coefficient(self, dep: str):
        return dict(self.eta).get(dep, sp.S.Zero)

    def components(self, space: JetSpace) -> list:
        return [sp.sympify(self.xi), sp.sympify(self.tau)] + [
            sp.sympify(self.coefficient(d)) for d in space.dependent]

    def scaled(self, k) -> "VectorField":
        return VectorField(normalize(k * self.xi), normalize(k * self.tau),
                           tuple((d, normalize(k * e)) for d, e in self.eta), self.unknowns, self.name)

    def __add__(self, other: "VectorField") -> "VectorField":
        deps = sorted(set(dict(self.eta)) | set(dict(other.eta)))
        return VectorField(normalize(self.xi + other.xi), normalize(self.tau + other.tau),
                           tuple((d, normalize(self.coefficient(d) + other.coefficient(d))) for d in deps),
                           tuple(dict.fromkeys(self.unknowns + other.unknowns)), self.name)


def _check_point(vf: VectorField, space: JetSpace):
    for c in vf.components(space):
        bad = [s for s in space.jets_in(c) if sum(space.info(s)[1:]) > 0]
        if bad:
            raise SymmetryError(f"coefficient {c} depends on derivatives {bad}; point fields only")
    for d, _ in vf.eta:
        if d not in space.dependent:
            raise UndeclaredSymbolError(f"{d} is not a dependent variable of the system")


def prolong(vf: VectorField, space: JetSpace, order: int = 1) -> dict:
    """Coefficients of the prolonged field on jets of order 1..``order``.

    ``eta^J = D_J(Q) + xi u_{J+t} + tau u_{J+x}`` with characteristic
    ``Q = eta - xi u_t - tau u_x``.  Orders above 2 are not supported.
    """
    if order not in (1, 2):
        raise SymmetryError(f"prolongation of order {order} is not supported")
    _check_point(vf, space)
    tn, xn = space.independent
    out = {}
    for dep in space.dependent:
        Q = normalize(vf.coefficient(dep) - vf.xi * space.jet(dep, 1, 0) - vf.tau * space.jet(dep, 0, 1))
        for n in range(1, order + 1):
            for i in range(n, -1, -1):
                j = n - i
                DQ = space.D(Q, *([tn] * i + [xn] * j))
                out[space.jet(dep, i, j)] = normalize(
                    DQ + vf.xi * space.jet(dep, i + 1, j) + vf.tau * space.jet(dep, i, j + 1))
    return out


def apply_prolonged(vf: VectorField, pr: dict, F, space: JetSpace):
    """``pr(vf) F`` using partial derivatives in jet coordinates."""
    F = sp.sympify(F)
    out = vf.xi * sp.diff(F, space.t) + vf.tau * sp.diff(F, space.x)
    for dep in space.dependent:
        out += vf.coefficient(dep) * sp.diff(F, sp.Symbol(dep))
    for s in space.jets_in(F):
        if sum(space.info(s)[1:]) == 0:
            continue
        if s not in pr:
            raise SymmetryError(f"prolongation does not cover {s}")
        out += pr[s] * sp.diff(F, s)
    return normalize(out)


@dataclass(frozen=True)
class DeterminingSystem:
    """Residual relations that must vanish; empty means an unconditional symmetry.

    ``per_equation`` keeps the unsplit reduced residual for each equation and
    ``split_by`` the jet variables whose coefficients were separated.
    """

    equations: tuple = ()
    per_equation: tuple = ()
    split_by: tuple = ()

    @property
    def is_symmetry(self) -> bool:
        return not self.equations

    def __len__(self):
        return len(self.equations)


def _allowed_names(system: PdeSystem, parameters):
    names = {system.space.t, system.space.x} | {sp.Symbol(d) for d in system.space.dependent}
    funcs = set()
    for eq in system.equations:
        names |= {s for s in sp.sympify(eq.rhs).free_symbols if system.space.info(s) is None}
        funcs |= {f.func for f in sp.sympify(eq.rhs).atoms(AppliedUndef)}
    names |= {sp.Symbol(str(p)) for p in parameters}
    return names, funcs


def _validate(vf: VectorField, system: PdeSystem, parameters):
    names, funcs = _allowed_names(system, parameters)
    funcs |= {f.func for f in vf.unknowns}
    for c in vf.components(system.space):
        extra = {s for s in c.free_symbols if s not in names and system.space.info(s) is None}
        if extra:
            raise UndeclaredSymbolError(f"undeclared symbols {sorted(map(str, extra))} in {c}")
        for f in c.atoms(AppliedUndef):
            if f.func not in funcs:
                raise UndeclaredSymbolError(f"undeclared function {f.func} in {c}")


def _split(r, space: JetSpace):
    """Coefficients of ``r``'s numerator w.r.t. jet variables not inside kernels."""
    form = rational_form(r)
    if form.num == 0:
        return [], ()
    inside = set()
    for s in form.num.free_symbols:
        if s in form.back:
            inside |= form.back[s].free_symbols
    gens = sorted((s for s in form.num.free_symbols
                   if space.info(s) is not None and s not in inside), key=lambda s: s.name)
    coeffs = sp.Poly(form.num, *gens).coeffs() if gens else [form.num]
    return [normalize(c.xreplace(form.back)) for c in coeffs], tuple(gens)


def _dedupe(exprs):
    out = []
    for e in exprs:
        if e == 0:
            continue
        if any(normalize(e / o).is_Rational for o in out):
            continue
        out.append(e)
    return out


def check_symmetry(vf: VectorField, system, parameters=(), depth=None) -> DeterminingSystem:
    """Apply the prolonged field to the defining equations and reduce on solutions.

    For a complete potential system the potential equations are checked (the
    base equation is their differential consequence and is used for reduction).
    """
    if isinstance(system, PotentialSystem):
        ext = system.system
        eqs = system.equations if system.complete else ext.equations
    else:
        ext = system
        eqs = ext.equations
    space = ext.space
    _check_point(vf, space)
    _validate(vf, ext, parameters)
    order = max(max(sum(space.info(eq.lead)[1:]), space.order(eq.rhs)) for eq in eqs)
    pr = prolong(vf, space, order)
    per_eq, found, split_by = [], [], set()
    for eq in eqs:
        R = apply_prolonged(vf, pr, eq.lhs(), space)
        r = reduce_mod_system(R, ext, depth)
        per_eq.append((eq.lead, r))
        coeffs, gens = _split(r, space)
        split_by |= set(gens)
        found += coeffs
    return DeterminingSystem(tuple(_dedupe(found)), tuple(per_eq),
                             tuple(sorted(split_by, key=lambda s: s.name)))


def _unknown_atoms(exprs, unknowns):
    heads = {f.func for f in unknowns}
    atoms = set()
    for e in exprs:
        for a in sp.sympify(e).atoms(AppliedUndef, sp.Derivative):
            f = a.expr if isinstance(a, sp.Derivative) else a
            if isinstance(f, AppliedUndef) and f.func in heads:
                atoms.add(a)
    return sorted(atoms, key=sp.default_sort_key)


def in_span(exprs, generators, unknowns) -> bool:
    """Whether each of ``exprs`` is a combination of ``generators`` with coefficients
    free of the unknown functions (exact linear algebra over the unknown atoms)."""
    atoms = _unknown_atoms(list(exprs) + list(generators), unknowns)
    dummies = [sp.Dummy(f"a{i}") for i in range(len(atoms))]
    sub = dict(zip(atoms, dummies))

    def row(e):
        p = sp.Poly(sp.expand(normalize(e).xreplace(sub) * 1), *dummies) if dummies else None
        return [p.coeff_monomial(d) if p is not None else 0 for d in dummies], \
            (p.coeff_monomial(1) if p is not None else sp.sympify(e))

    gen_rows = [row(g) for g in generators]
    ks = [sp.Dummy(f"k{i}") for i in range(len(generators))]
    for e in exprs:
        target, const = row(e)
        if normalize(const) != 0:
            return False
        eqs = [sp.together(t - sum((k * g[0][i] for k, g in zip(ks, gen_rows)), sp.S.Zero))
               for i, t in enumerate(target)]
        eqs = [sp.fraction(q)[0] for q in eqs]
        if not ks:
            if any(normalize(q) != 0 for q in eqs):
                return False
            continue
        if not sp.linsolve(eqs, ks):
            return False
    return True


@dataclass(frozen=True)
class Match:
    rescaled: bool
    spans: bool

    def __bool__(self):
        return self.rescaled and self.spans


def match_expected(det: DeterminingSystem, expected, unknowns) -> Match:
    """Compare residuals with an expected determining system.

    ``rescaled``: a bijection up to nonzero rational factors.  ``spans``: both
    sets generate the same space over functions of the independent variables.
    """
    expected = [normalize(e) for e in expected]
    got = list(det.equations)
    rescaled = len(got) == len(expected) and all(
        any(normalize(g / e).is_Rational for e in expected) for g in got) and all(
        any(normalize(g / e).is_Rational for g in got) for e in expected)
    spans = in_span(got, expected, unknowns) and in_span(expected, got, unknowns)
    return Match(rescaled, spans)


def depends_on_potential(vf: VectorField, psys: PotentialSystem) -> bool:
    """Whether a t, x or base dependent coefficient has a nonzero partial in a potential."""
    base = [vf.xi, vf.tau] + [vf.coefficient(d) for d in psys.base.space.dependent]
    return any(normalize(sp.diff(c, sp.Symbol(v))) != 0 for c in base for v in psys.potentials)


def is_potential_symmetry(vf: VectorField, psys: PotentialSystem, parameters=(), depth=None) -> bool:
    """True iff the field is a symmetry whose base components depend on a potential."""
    det = check_symmetry(vf, psys, parameters, depth)
    if not det.is_symmetry:
        residual = ", ".join(to_text(e) for e in det.equations)
        raise NotASymmetryError(f"{vf.name or 'field'} is not a symmetry: {residual}")
    return depends_on_potential(vf, psys)


def commutator(a: VectorField, b: VectorField, space: JetSpace) -> VectorField:
    """Lie bracket ``[a, b]`` computed on the coefficients."""
    coords = [space.t, space.x] + [sp.Symbol(d) for d in space.dependent]

    def act(field, F):
        return sum((c * sp.diff(F, q) for c, q in zip(field.components(space), coords)), sp.S.Zero)

    comps = [normalize(act(a, cb) - act(b, ca)) for ca, cb in zip(a.components(space), b.components(space))]
    eta = tuple((d, c) for d, c in zip(space.dependent, comps[2:]))
    return VectorField(comps[0], comps[1], eta, tuple(dict.fromkeys(a.unknowns + b.unknowns)),
                       f"[{a.name},{b.name}]")
