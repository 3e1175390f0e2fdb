import pytest
import sympy as sp

from conftest import A, diffusion_basis, diffusion_system, t, u, wave_basis, wave_system, x
from potsys.conservation import linear_combination, verified
from potsys.groups import (ConstraintError, NormalizationRule, PointTransformation,
                           TransformationError, UncoveredRegionError, UnsoundRuleError,
                           apply_transformation, canonicalize, check_exhaustive, collapse_check,
                           expand_in_basis)
from potsys.kernel import normalize

C = sp.symbols("c4 c3 c2 c1")


def _wave_canon(problem, rules=None, coeffs=None):
    return canonicalize(coeffs or problem.coefficient_symbols(), problem.basis(),
                        list(problem.rules if rules is None else rules), problem.group, problem.system(),
                        names=problem.coefficients)


def test_identity_leaves_vector_unchanged():
    sys = diffusion_system()
    for cv in diffusion_basis():
        out = apply_transformation(PointTransformation(), verified(cv, sys), sys)
        assert normalize(out.T - cv.T) == 0 and normalize(out.X - cv.X) == 0
        assert out.verified


def test_time_shift_removes_x_term():
    sys = wave_system()
    c2 = sp.Symbol("c2")
    combo = linear_combination((0, 0, c2, 1), wave_basis())
    out = apply_transformation(PointTransformation(t=(1, c2)), combo, sys)
    assert normalize(out.char[0] - t * x) == 0
    coeffs, _ = expand_in_basis(out, wave_basis(), sys.space)
    assert coeffs == (0, 0, 0, 1)


def test_scaling_then_potential_rescaling():
    sys = diffusion_system()
    e2 = sp.Symbol("e2", nonzero=True)
    g = PointTransformation(x=(e2, 0), elements=(("A", e2**2),))
    out = apply_transformation(g, diffusion_basis()[1], sys)
    # direct substitution: x -> x/e2, u_x -> e2*u_x, A -> A/e2^2, Int(A,u) -> Int(A,u)/e2^2
    assert normalize(out.T - x * u / e2**2) == 0
    assert expand_in_basis(out, diffusion_basis(), sys.space)[0] == (0, normalize(1 / e2**2))
    rescaled = apply_transformation(PointTransformation(x=(e2, 0), elements=(("A", e2**2),),
                                                        potential=e2**2), diffusion_basis()[1], sys)
    assert normalize(rescaled.T - x * u) == 0 and normalize(rescaled.X - diffusion_basis()[1].X) == 0


def test_leaving_the_class_is_reported():
    sys = diffusion_system()
    bad = PointTransformation(x=(2, 0))  # A not rescaled
    with pytest.raises(TransformationError) as info:
        apply_transformation(bad, diffusion_basis()[0], sys)
    assert info.value.residual


def test_constraints_checked(wave_problem):
    with pytest.raises(ConstraintError):
        wave_problem.group.instantiate({"e1": 0}, wave_problem.system().space)


def test_composition_stays_in_schema(wave_problem):
    space = wave_problem.system().space
    g = wave_problem.group
    a = g.instantiate({"e1": 2, "e4": 3, "a0": 5}, space)
    b = g.instantiate({"e2": -1, "e5": sp.Rational(1, 2), "e3": 7}, space)
    assert g.contains(a.compose(b), space)
    assert not g.contains(PointTransformation(elements=(("f", 2),)), space)


def test_wave_canonical_set(wave_problem):
    canon = _wave_canon(wave_problem)
    chars = sorted(str(normalize(c.cv.char[0])) for c in canon.classes)
    assert len(canon) == 6
    assert chars == sorted(str(normalize(e)) for e in (1, t, x, x + t, x * t, x * t + 1))
    assert all(c.passed for c in canon.checks)
    eps = sp.Symbol("epsilon")
    fams = {tuple(fam.coeffs) for fam in canon.families(eps)}
    assert fams == {(1, 0, 0, 0), (0, 1, 0, 0), (0, eps, 1, 0), (eps, 0, 0, 1)}


def test_wave_provenance_names_rules_in_order(wave_problem):
    canon = _wave_canon(wave_problem)
    order = [r.name for r in wave_problem.rules]
    assert order == ["shift_tx", "shift_x", "shift_t", "scale"]
    for cls in canon.classes:
        for br in cls.branches:
            assert br.provenance and all(s.rule in order for s in br.provenance)


def test_diffusion_two_classes(diffusion_problem):
    p = diffusion_problem
    canon = canonicalize(p.coefficient_symbols(), p.basis(), list(p.rules), p.group, p.system(),
                         names=p.coefficients)
    assert [c.coeffs for c in canon.classes] == [(1, 0), (0, 1)]
    regions = [c.branches[0].region.describe() for c in canon.classes]
    assert regions == [("c1 = 0", "c2 != 0"), ("c1 != 0",)]


def test_single_vector_without_rules():
    sys = diffusion_system()
    c = sp.Symbol("c1")
    canon = canonicalize((c,), diffusion_basis()[:1], [], sys=sys)
    assert len(canon) == 1 and canon.classes[0].cv.char == (c,)
    report = collapse_check(diffusion_basis()[:1], [], sys=sys)
    assert report.classes == 1 and not report.collapsed


def test_canonical_tuple_is_fixed(wave_problem):
    canon = _wave_canon(wave_problem, coeffs=(1, 0, 0, 1))
    assert [c.coeffs for c in canon.classes] == [(1, 0, 0, 1)]
    assert canon.classes[0].branches[0].provenance == ()


def test_unsound_rule_is_rejected(diffusion_problem):
    p = diffusion_problem
    rule = p.rules[0]
    bad = NormalizationRule(rule.name, rule.guard, rule.transform, (sp.Symbol("c2"), sp.S.One))
    with pytest.raises(UnsoundRuleError) as info:
        canonicalize(p.coefficient_symbols(), p.basis(), [bad, p.rules[1]], p.group, p.system(),
                     names=p.coefficients)
    assert info.value.residual


def test_uncovered_region_is_reported(wave_problem):
    with pytest.raises(UncoveredRegionError) as info:
        _wave_canon(wave_problem, rules=wave_problem.rules[:3])
    assert "c3 = 0" in " ".join(info.value.region)


def test_exhaustiveness_detects_missing_leaf(wave_problem):
    names = wave_problem.coefficients
    good = check_exhaustive(names, wave_problem.rules, [c.coeffs for c in _wave_canon(wave_problem).classes])
    assert good.passed
    assert not check_exhaustive(names, wave_problem.rules, [(1, 0, 0, 0)]).passed


def test_collapse_reports(wave_problem, convection_problem):
    p = wave_problem
    wave = collapse_check(p.basis(), list(p.rules), p.group, p.system(), names=p.coefficients)
    assert (wave.dimension, wave.classes, wave.collapsed) == (4, 6, False)
    q = convection_problem
    conv = collapse_check(q.basis(), list(q.rules), q.group, q.system(), names=q.coefficients)
    assert (conv.dimension, conv.classes, conv.collapsed) == (2, 1, True)
