import pytest
import sympy as sp
from hypothesis import given, settings

from conftest import A, SPACE, diffusion_system, t, u, u_t, u_tt, u_tx, u_x, u_xx, wave_system, x
from potsys.jets import Equation, InvalidSystemError, JetSpace, PdeSystem, ReductionDepthError, reduce_mod_system
from potsys.kernel import Int, normalize
from strategies import differential_functions

D = SPACE.total_derivative


def test_jet_names():
    assert SPACE.jet("u", 1, 1).name == "u_tx"
    assert SPACE.parse_name("u_xt") == ("u", 1, 1)
    assert SPACE.parse_name("u") == ("u", 0, 0)
    assert SPACE.parse_name("w_x") is None
    ext = SPACE.extend("v1")
    assert ext.jet("v1", 0, 1).name == "v1_x"


def test_total_derivative_examples():
    assert D(u, "x") == u_x
    assert D(x * u, "t") == normalize(x * u_t)
    got = D(x * A(u) * u_x - Int(A(u), u), "x")
    assert normalize(got - (x * sp.Derivative(A(u), u) * u_x**2 + x * A(u) * u_xx)) == 0


def test_reduce_equation_itself():
    sys = diffusion_system()
    assert reduce_mod_system(u_t - D(A(u) * u_x, "x"), sys) == 0
    assert reduce_mod_system(u_tt - u_xx, wave_system(sp.S.One)) == 0


def test_reduce_time_derivative_on_diffusion():
    got = reduce_mod_system(u_t, diffusion_system())
    assert normalize(got - (sp.Derivative(A(u), u) * u_x**2 + A(u) * u_xx)) == 0


def test_reduce_differential_consequence():
    sys = wave_system(sp.S.One)
    assert reduce_mod_system(SPACE.jet("u", 3, 0), sys) == SPACE.jet("u", 1, 2)
    assert reduce_mod_system(SPACE.jet("u", 4, 1), sys) == SPACE.jet("u", 0, 5)


def test_depth_bound_is_an_error():
    sys = diffusion_system()
    with pytest.raises(ReductionDepthError) as info:
        reduce_mod_system(SPACE.jet("u", 6, 0), sys, depth=2)
    assert "u_" in str(info.value)


def test_invalid_systems():
    with pytest.raises(InvalidSystemError):
        PdeSystem(SPACE, (Equation(u_t, u_xx), Equation(u_t, u_x)))
    with pytest.raises(InvalidSystemError):
        PdeSystem(SPACE, (Equation(u_t, u_tx),))


@settings(max_examples=100, deadline=None)
@given(differential_functions)
def test_total_derivatives_commute(e):
    assert normalize(D(D(e, "t"), "x") - D(D(e, "x"), "t")) == 0


@settings(max_examples=60, deadline=None)
@given(differential_functions, differential_functions)
def test_total_derivative_leibniz_and_linearity(a, b):
    for w in ("t", "x"):
        assert normalize(D(a * b, w) - (D(a, w) * b + a * D(b, w))) == 0
        assert normalize(D(a + 3 * b, w) - D(a, w) - 3 * D(b, w)) == 0


@settings(max_examples=60, deadline=None)
@given(differential_functions)
def test_reduction_idempotent_and_commutes_with_normalize(e):
    for sys in (diffusion_system(), wave_system()):
        r = reduce_mod_system(e, sys)
        assert reduce_mod_system(r, sys) == r
        assert reduce_mod_system(normalize(e), sys) == r


@settings(max_examples=60, deadline=None)
@given(differential_functions)
def test_wave_reduction_never_reintroduces_u_tt(e):
    sys = wave_system()
    r = reduce_mod_system(D(e, "t"), sys)
    assert all(SPACE.info(s)[1] <= 1 for s in SPACE.jets_in(r))
