"""Jet coordinates, total derivatives and reduction modulo a solved PDE system."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import sympy as sp

from .kernel import normalize


class ReductionDepthError(RuntimeError):
    """Rewriting by the solved system did not terminate within the depth bound."""

    def __init__(self, jet, bound):
        super().__init__(f"reduction of {jet} exceeded depth bound {bound}")
        self.jet = jet
        self.bound = bound


class InvalidSystemError(ValueError):
    """Ill-formed solved system (duplicate leads, lead in a right-hand side, ...)."""


@dataclass(frozen=True)
class JetSpace:
    """Jet coordinates over two independent variables (time first, then space).

    A jet variable is the symbol ``u`` for order zero and ``u_<letters>`` otherwise,
    with time letters before space letters, e.g. ``u_txx``.
    """

    independent: tuple[str, str] = ("t", "x")
    dependent: tuple[str, ...] = ("u",)

    def __post_init__(self):
        if len(self.independent) != 2 or any(len(n) != 1 for n in self.independent):
            raise ValueError("exactly two single-letter independent variables are required")
        for d in self.dependent:
            if "_" in d:
                raise ValueError(f"dependent variable name {d!r} may not contain '_'")

    @property
    def t(self) -> sp.Symbol:
        return sp.Symbol(self.independent[0])

    @property
    def x(self) -> sp.Symbol:
        return sp.Symbol(self.independent[1])

    def extend(self, *names: str) -> "JetSpace":
        return JetSpace(self.independent, self.dependent + tuple(names))

    def jet(self, dep: str, i: int = 0, j: int = 0) -> sp.Symbol:
        if dep not in self.dependent:
            raise KeyError(dep)
        if i == 0 and j == 0:
            return sp.Symbol(dep)
        tn, xn = self.independent
        return sp.Symbol(f"{dep}_{tn * i}{xn * j}")

    def parse_name(self, name: str):
        """Return ``(dep, i, j)`` for a jet-variable name, or ``None``."""
        if name in self.dependent:
            return name, 0, 0
        dep, sep, suffix = name.partition("_")
        if not sep or dep not in self.dependent or not suffix:
            return None
        tn, xn = self.independent
        if set(suffix) - {tn, xn}:
            return None
        return dep, suffix.count(tn), suffix.count(xn)

    def info(self, s):
        return self.parse_name(s.name) if isinstance(s, sp.Symbol) else None

    def jets_in(self, e) -> list[sp.Symbol]:
        found = [s for s in sp.sympify(e).free_symbols if self.info(s) is not None]
        return sorted(found, key=lambda s: s.name)

    def order(self, e) -> int:
        orders = [sum(self.info(s)[1:]) for s in self.jets_in(e)]
        return max(orders, default=0)

    def shift(self, s, w: str) -> sp.Symbol:
        dep, i, j = self.info(s)
        if w == self.independent[0]:
            return self.jet(dep, i + 1, j)
        return self.jet(dep, i, j + 1)

    def total_derivative(self, e, w):
        """``D_w e = ∂e/∂w + Σ u_{J+w} ∂e/∂u_J``, normalized."""
        w = str(w)
        if w not in self.independent:
            raise ValueError(f"{w} is not an independent variable")
        e = sp.sympify(e)
        out = sp.diff(e, sp.Symbol(w))
        for s in self.jets_in(e):
            out += self.shift(s, w) * sp.diff(e, s)
        return normalize(out)

    def D(self, e, *ws):
        for w in ws:
            e = self.total_derivative(e, w)
        return e


@dataclass(frozen=True)
class Equation:
    lead: sp.Symbol
    rhs: sp.Expr

    def lhs(self):
        """``L = lead - rhs``."""
        return self.lead - self.rhs


@dataclass(frozen=True)
class PdeSystem:
    """A system solved for leading derivatives.

    ``nondegenerate`` records the (unverified) total nondegeneracy assumption.
    """

    space: JetSpace
    equations: tuple[Equation, ...]
    name: str = ""
    nondegenerate: bool = True

    def __post_init__(self):
        leads = [eq.lead for eq in self.equations]
        if len(set(leads)) != len(leads):
            raise InvalidSystemError("a leading jet variable appears in more than one equation")
        for eq in self.equations:
            if self.space.info(eq.lead) is None:
                raise InvalidSystemError(f"{eq.lead} is not a jet variable")
            for s in self.space.jets_in(eq.rhs):
                hit = self.lead_for(s)
                if hit is not None:
                    raise InvalidSystemError(
                        f"right-hand side of {eq.lead} contains {s}, a derivative of leading {hit.lead}"
                    )

    @property
    def order(self) -> int:
        return max(
            [sum(self.space.info(eq.lead)[1:]) for eq in self.equations]
            + [self.space.order(eq.rhs) for eq in self.equations],
            default=0,
        )

    def lhs(self) -> list:
        return [eq.lhs() for eq in self.equations]

    def lead_for(self, s):
        """First equation whose leading jet divides ``s``."""
        dep, i, j = self.space.info(s)
        for eq in self.equations:
            d0, i0, j0 = self.space.info(eq.lead)
            if d0 == dep and i >= i0 and j >= j0:
                return eq
        return None

    def extend(self, equations, names=(), name=None) -> "PdeSystem":
        return PdeSystem(
            self.space.extend(*names),
            self.equations + tuple(equations),
            name or self.name,
            self.nondegenerate,
        )

    def specialize(self, bindings) -> "PdeSystem":
        from .kernel import substitute

        eqs = tuple(Equation(eq.lead, substitute(eq.rhs, bindings)) for eq in self.equations)
        return PdeSystem(self.space, eqs, self.name, self.nondegenerate)


@functools.lru_cache(maxsize=4096)
def _reduced_jet(sys: PdeSystem, s: sp.Symbol, level: int, bound: int):
    """Reduced replacement for the principal jet ``s`` (``None`` if parametric)."""
    eq = sys.lead_for(s)
    if eq is None:
        return None
    if level > bound:
        raise ReductionDepthError(s, bound)
    space = sys.space
    dep, i, j = space.info(s)
    _, i0, j0 = space.info(eq.lead)
    if (i, j) == (i0, j0):
        return _reduce(eq.rhs, sys, level + 1, bound)
    # differentiate the nearest principal parent: time first, then space
    if i > i0:
        parent, w = space.jet(dep, i - 1, j), space.independent[0]
    else:
        parent, w = space.jet(dep, i, j - 1), space.independent[1]
    base = _reduced_jet(sys, parent, level + 1, bound)
    return _reduce(space.total_derivative(base, w), sys, level + 1, bound)


def _reduce(e, sys: PdeSystem, level: int, bound: int):
    subs = {}
    for s in sys.space.jets_in(e):
        r = _reduced_jet(sys, s, level, bound)
        if r is not None:
            subs[s] = r
    if not subs:
        return normalize(e)
    return normalize(sp.sympify(e).xreplace(subs))


def reduce_mod_system(e, sys: PdeSystem, depth: int | None = None):
    """Rewrite ``e`` by the solved equations and their differential consequences.

    The result contains parametric jets only; it is zero iff ``e`` vanishes on
    solutions (within the kernel's fragment).  ``depth`` bounds the nesting of
    rewrites; the default is ``3 * max(order(e), order(sys))``.
    """
    e = normalize(e)
    bound = depth if depth is not None else 3 * max(sys.space.order(e), sys.order, 1)
    return _reduce(e, sys, 0, bound)
