"""Potential systems ``v_x = T, v_t = -X`` built from conserved vectors."""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from .conservation import ConservedVector, equivalent_by_characteristic, is_trivial_characteristic, verify_divergence
from .jets import Equation, PdeSystem, reduce_mod_system
from .kernel import normalize


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialSystem:
    """A base system extended by potentials.

    ``complete`` is True/False for single-equation bases and None (unknown)
    otherwise.  ``system`` is the extended solved system: the base equations
    (the derived one when complete) followed by ``v_x`` and ``v_t`` equations.
    """

    base: PdeSystem
    potentials: tuple
    sources: tuple
    equations: tuple
    complete: bool | None
    system: PdeSystem
    name: str = ""

    def potential_equations(self):
        return self.equations

    def cross_derivative(self, k: int):
        """``D_t(v_x) - D_x(v_t)`` for the k-th potential, reduced mod the base."""
        space = self.base.space
        vx, vt = self.equations[2 * k], self.equations[2 * k + 1]
        e = space.total_derivative(vx.rhs, space.independent[0]) - space.total_derivative(
            vt.rhs, space.independent[1])
        return reduce_mod_system(e, self.base)

    def source_from_equations(self, k: int) -> ConservedVector:
        """Recover ``(T, X)`` from the k-th pair of potential equations."""
        vx, vt = self.equations[2 * k], self.equations[2 * k + 1]
        return ConservedVector(vx.rhs, normalize(-vt.rhs), self.sources[k].char, self.sources[k].name)


def _completeness(cv: ConservedVector, base: PdeSystem):
    """Solve the compatibility condition for the base leading jet.

    Returns ``(complete, derived_rhs)``; ``complete`` is None for systems with
    several equations.
    """
    if len(base.equations) != 1:
        return None, None
    eq = base.equations[0]
    C = cv.divergence(base)
    num, den = sp.fraction(sp.together(C))
    num = sp.expand(num)
    lead = eq.lead
    if not num.has(lead) or sp.Poly(num, lead).degree() != 1:
        return False, None
    a = num.coeff(lead, 1)
    rest = num - a * lead
    derived = normalize(-rest / a)
    if any(base.lead_for(s) is not None for s in base.space.jets_in(derived)):
        return False, None
    return normalize(derived - eq.rhs) == 0, derived


def build_potential_system(cvs, sys: PdeSystem, names=None, name: str = "",
                           check: bool = True) -> PotentialSystem:
    """Extend ``sys`` by one potential per conserved vector."""
    cvs = list(cvs)
    if not cvs:
        raise PotentialError("at least one conserved vector is required")
    names = tuple(names) if names is not None else tuple(f"v{k}" for k in range(1, len(cvs) + 1))
    if len(names) != len(cvs):
        raise PotentialError("one name per potential is required")
    for cv in cvs:
        if not cv.verified and not verify_divergence(cv, sys):
            raise PotentialError(f"conserved vector {cv.name or cv} is not verified")
    if check:
        for i, a in enumerate(cvs):
            if a.char is not None and is_trivial_characteristic(a.char, sys):
                raise PotentialError(f"conserved vector {a.name or i + 1} is trivial")
            for j in range(i + 1, len(cvs)):
                b = cvs[j]
                if a.char is not None and b.char is not None and \
                        equivalent_by_characteristic(a.char, b.char, sys):
                    raise PotentialError(
                        f"conserved vectors {a.name or i + 1} and {b.name or j + 1} are dependent")
    space = sys.space.extend(*names)
    eqs = []
    for v, cv in zip(names, cvs):
        eqs.append(Equation(space.jet(v, 0, 1), normalize(cv.T)))
        eqs.append(Equation(space.jet(v, 1, 0), normalize(-cv.X)))
    complete = None
    base_eqs = sys.equations
    if len(sys.equations) == 1:
        flags = [_completeness(cv, sys) for cv in cvs]
        complete = any(f[0] for f in flags)
        if complete:
            derived = next(f[1] for f in flags if f[0])
            base_eqs = (Equation(sys.equations[0].lead, derived),)
    extended = PdeSystem(space, tuple(base_eqs) + tuple(eqs), name or sys.name, sys.nondegenerate)
    return PotentialSystem(sys, names, tuple(cvs), tuple(eqs), complete, extended, name)


def enumerate_potential_systems(canon, sys: PdeSystem) -> list:
    """One simplest potential system per canonical class, potentials ``v1, v2, ...``."""
    out = []
    for k, cls in enumerate(canon.classes, 1):
        out.append(build_potential_system([cls.cv], sys, names=(f"v{k}",), name=f"class{k}"))
    return out
