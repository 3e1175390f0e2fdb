from pathlib import Path

import pytest
import sympy as sp

from potsys.conservation import ConservedVector
from potsys.jets import Equation, JetSpace, PdeSystem
from potsys.kernel import Int
from potsys.problem import load_problem

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

t, x, u, v = sp.symbols("t x u v")
mu = sp.Symbol("mu")
A = sp.Function("A")
f = sp.Function("f")
SPACE = JetSpace()
u_t, u_x, u_tt, u_tx, u_xx = (SPACE.jet("u", i, j) for i, j in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2)))


def diffusion_system():
    rhs = sp.Derivative(A(u), u) * u_x**2 + A(u) * u_xx
    return PdeSystem(SPACE, (Equation(u_t, rhs),), "diffusion")


def wave_system(fu=None):
    fu = f(u) if fu is None else fu
    rhs = sp.diff(fu, u) * u_x**2 + fu * u_xx
    return PdeSystem(SPACE, (Equation(u_tt, rhs),), "wave")


def diffusion_basis():
    return [ConservedVector(u, -A(u) * u_x, (sp.S.One,), "mass"),
            ConservedVector(x * u, -x * A(u) * u_x + Int(A(u), u), (x,), "moment")]


def wave_basis():
    """Vectors with characteristics 1, t, x, tx (in that order)."""
    F = Int(f(u), u)
    return [ConservedVector(u_t, -f(u) * u_x, (sp.S.One,), "one"),
            ConservedVector(t * u_t - u, -t * f(u) * u_x, (t,), "t"),
            ConservedVector(x * u_t, -(x * f(u) * u_x - F), (x,), "x"),
            ConservedVector(x * (t * u_t - u), -t * (x * f(u) * u_x - F), (t * x,), "tx")]


@pytest.fixture(scope="session")
def wave_problem():
    return load_problem(FIXTURES / "wave.pot")


@pytest.fixture(scope="session")
def diffusion_problem():
    return load_problem(FIXTURES / "diffusion.pot")


@pytest.fixture(scope="session")
def convection_problem():
    return load_problem(FIXTURES / "convection.pot")


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str = ""):
    ACCEPTANCE[criterion] = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}" + (
        f"  ({detail})" if detail else "")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
