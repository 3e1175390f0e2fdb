"""Conserved vectors, characteristics and their verification."""

from __future__ import annotations

from dataclasses import dataclass, replace

import sympy as sp

from .jets import PdeSystem, reduce_mod_system
from .kernel import normalize


class MissingCharacteristicError(ValueError):
    pass


@dataclass(frozen=True)
class ConservedVector:
    """Density ``T`` and flux ``X`` with ``D_t T + D_x X = 0`` on solutions.

    ``char`` optionally holds the characteristic, one entry per equation.
    """

    T: sp.Expr
    X: sp.Expr
    char: tuple | None = None
    name: str = ""
    verified: bool = False

    def divergence(self, sys: PdeSystem):
        sp_ = sys.space
        return normalize(sp_.total_derivative(self.T, sp_.independent[0])
                         + sp_.total_derivative(self.X, sp_.independent[1]))

    def scaled(self, k) -> "ConservedVector":
        char = None if self.char is None else tuple(normalize(k * c) for c in self.char)
        return replace(self, T=normalize(k * self.T), X=normalize(k * self.X), char=char)


@dataclass(frozen=True)
class EquivalenceWitness:
    """Witness for ``T' = T + T_hat + D_x H`` and ``X' = X + X_hat - D_t H``."""

    H: sp.Expr = sp.S.Zero
    T_hat: sp.Expr = sp.S.Zero
    X_hat: sp.Expr = sp.S.Zero


@dataclass(frozen=True)
class Check:
    """Outcome of one verification: ``residual`` is zero exactly when it passed."""

    name: str
    passed: bool
    residual: sp.Expr = sp.S.Zero

    def __bool__(self):
        return self.passed


def verify_divergence(cv: ConservedVector, sys: PdeSystem, depth=None) -> Check:
    residual = reduce_mod_system(cv.divergence(sys), sys, depth)
    return Check("divergence", residual == 0, residual)


def verified(cv: ConservedVector, sys: PdeSystem) -> ConservedVector:
    """Return ``cv`` marked verified, or raise if its divergence does not vanish."""
    check = verify_divergence(cv, sys)
    if not check:
        raise ValueError(f"conserved vector {cv.name} fails verification: {check.residual}")
    return replace(cv, verified=True)


def characteristic_residual(cv: ConservedVector, sys: PdeSystem):
    if cv.char is None:
        raise MissingCharacteristicError(f"conserved vector {cv.name or cv} has no characteristic")
    if len(cv.char) != len(sys.equations):
        raise ValueError("characteristic length differs from the number of equations")
    combo = sum((lam * L for lam, L in zip(cv.char, sys.lhs())), sp.S.Zero)
    return normalize(cv.divergence(sys) - combo)


def verify_characteristic(cv: ConservedVector, sys: PdeSystem) -> Check:
    """Check the characteristic form identically, without reducing on solutions."""
    residual = characteristic_residual(cv, sys)
    return Check("characteristic", residual == 0, residual)


def is_trivial_characteristic(char, sys: PdeSystem) -> bool:
    return all(reduce_mod_system(lam, sys) == 0 for lam in char)


def equivalent_by_characteristic(char, other, sys: PdeSystem) -> bool:
    return is_trivial_characteristic([a - b for a, b in zip(char, other)], sys)


def check_equivalence(cv: ConservedVector, other: ConservedVector,
                      witness: EquivalenceWitness, sys: PdeSystem) -> Check:
    """Check a caller-supplied witness; this is not a decision procedure."""
    t, x = sys.space.independent
    D = sys.space.total_derivative
    hats = [reduce_mod_system(witness.T_hat, sys), reduce_mod_system(witness.X_hat, sys)]
    r_T = normalize(other.T - cv.T - witness.T_hat - D(witness.H, x))
    r_X = normalize(other.X - cv.X - witness.X_hat + D(witness.H, t))
    residual = sp.Matrix([*hats, r_T, r_X])
    passed = all(r == 0 for r in residual)
    return Check("equivalence", passed, residual)


def linear_combination(coeffs, cvs, name: str = "") -> ConservedVector:
    """Componentwise ``Σ c_i (T_i, X_i, λ_i)``."""
    coeffs = [sp.sympify(c) for c in coeffs]
    if len(coeffs) != len(cvs):
        raise ValueError("one coefficient per conserved vector is required")
    T = normalize(sum((c * cv.T for c, cv in zip(coeffs, cvs)), sp.S.Zero))
    X = normalize(sum((c * cv.X for c, cv in zip(coeffs, cvs)), sp.S.Zero))
    char = None
    if all(cv.char is not None for cv in cvs):
        n = len(cvs[0].char)
        char = tuple(
            normalize(sum((c * cv.char[k] for c, cv in zip(coeffs, cvs)), sp.S.Zero))
            for k in range(n)
        )
    return ConservedVector(T, X, char, name, all(cv.verified for cv in cvs))


def gauge_vector(H, sys: PdeSystem) -> ConservedVector:
    """The trivial conserved vector ``(D_x H, -D_t H)``."""
    t, x = sys.space.independent
    D = sys.space.total_derivative
    return ConservedVector(D(H, x), normalize(-D(H, t)), tuple(sp.S.Zero for _ in sys.equations),
                           "gauge")
