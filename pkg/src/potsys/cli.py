"""Command line: ``potsys <command> <file> [--report text|machine] [--golden F] [--depth N]``.

Exit status 0 when every check passes, 1 when a check fails, 2 on input errors.
"""

from __future__ import annotations

import argparse
import difflib
import itertools
import sys as _sys
from dataclasses import dataclass, replace

import sympy as sp

from .conservation import linear_combination, verify_characteristic, verify_divergence
from .groups import CanonicalSet, GroupError, canonicalize, collapse_check
from .jets import ReductionDepthError
from .kernel import OutsideFragmentError, normalize, substitute, to_text
from .potentials import PotentialError, build_potential_system, enumerate_potential_systems
from .problem import Problem, load_problem
from .report import FLAG, Report
from .symmetry import (SymmetryError, check_symmetry, commutator, is_potential_symmetry,
                       match_expected)
from .syntax import ParseError

COMMANDS = ("verify", "canonicalize", "generate", "symmetries", "all")
RUNTIME_ERRORS = (GroupError, PotentialError, SymmetryError, OutsideFragmentError,
                  ReductionDepthError, ValueError)


def _tuple_text(values) -> str:
    return "(" + ", ".join(to_text(v) for v in values) + ")"


def _eq_text(eq) -> str:
    return f"{eq.lead} = {to_text(eq.rhs)}"


@dataclass
class Context:
    problem: Problem
    depth: int | None = None
    basis: list | None = None
    canon: CanonicalSet | None = None
    canon_error: str = ""

    def system(self):
        return self.problem.system()

    def verified_basis(self):
        if self.basis is None:
            sys = self.system()
            self.basis = []
            for cv in self.problem.basis():
                try:
                    ok = bool(verify_divergence(cv, sys, self.depth))
                except RUNTIME_ERRORS:
                    ok = False
                self.basis.append(replace(cv, verified=ok))
        return self.basis


def run_verify(ctx: Context, report: Report):
    sec = report.section("verify")
    sys = ctx.system()
    sec.info("system", "; ".join(_eq_text(eq) for eq in sys.equations))
    for cv in ctx.verified_basis():
        try:
            div = verify_divergence(cv, sys, ctx.depth)
            sec.check(f"{cv.name}.divergence", div.passed, "" if div else f"residual {to_text(div.residual)}")
            if cv.char is not None:
                ch = verify_characteristic(cv, sys)
                sec.check(f"{cv.name}.characteristic", ch.passed,
                          "" if ch else f"residual {to_text(ch.residual)}", _tuple_text(cv.char))
        except RUNTIME_ERRORS as exc:
            sec.check(f"{cv.name}.divergence", False, str(exc))


def _canonical(ctx: Context):
    p = ctx.problem
    if ctx.canon is None and not ctx.canon_error:
        try:
            ctx.canon = canonicalize(p.coefficient_symbols(), ctx.verified_basis(), list(p.rules),
                                     p.group, ctx.system(), depth=ctx.depth)
        except RUNTIME_ERRORS as exc:
            ctx.canon_error = f"{type(exc).__name__}: {exc}"
    return ctx.canon


def _provenance_text(steps) -> str:
    parts = []
    for s in steps:
        args = ", ".join(f"{k}={to_text(v)}" for k, v in s.params)
        tag = s.rule if s.part == "main" else f"{s.rule}/{s.part}"
        parts.append(f"{tag}[{args}]")
    return " -> ".join(parts) or "identity"


def run_canonicalize(ctx: Context, report: Report):
    p = ctx.problem
    sec = report.section("canonicalize")
    if not p.coefficients:
        sec.info("skipped", "no coefficients declared")
        return
    sec.info("coefficients", ", ".join(p.coefficients))
    sec.info("rules", ", ".join(r.name for r in p.rules) or "none")
    canon = _canonical(ctx)
    if canon is None:
        sec.check("canonicalization", False, ctx.canon_error)
        return
    sec.info("classes", len(canon.classes))
    for k, cls in enumerate(canon.classes, 1):
        sec.info(f"class{k}.coefficients", _tuple_text(cls.coeffs))
        if cls.cv.char is not None:
            sec.info(f"class{k}.characteristic", _tuple_text(cls.cv.char))
        for j, br in enumerate(cls.branches, 1):
            sec.info(f"class{k}.branch{j}.region", "; ".join(br.region.describe()) or "all")
            sec.info(f"class{k}.branch{j}.provenance", _provenance_text(br.provenance))
    eps = sp.Symbol("epsilon")
    basis = ctx.verified_basis()
    for k, fam in enumerate(canon.families(eps), 1):
        chars = linear_combination(fam.coeffs, basis).char if basis[0].char is not None else None
        value = _tuple_text(chars) if chars is not None else _tuple_text(fam.coeffs)
        if fam.parameter is not None:
            value += " with epsilon in {0, 1}"
        sec.info(f"family{k}", value)
    for k, region in enumerate(canon.trivial, 1):
        sec.info(f"trivial{k}", "; ".join(region))
    for c in canon.checks:
        sec.check(f"check.{c.name}", c.passed, value=to_text(c.residual))
    try:
        col = collapse_check(basis, list(p.rules), p.group, ctx.system(), names=p.coefficients)
        sec.info("collapse", f"dimension {col.dimension}, classes {col.classes}, "
                             f"collapsed {'yes' if col.collapsed else 'no'}")
    except RUNTIME_ERRORS as exc:
        sec.check("collapse", False, str(exc))
    if p.expect_classes is not None:
        sec.check("expect.classes", len(canon.classes) == p.expect_classes,
                  value=f"{len(canon.classes)} (expected {p.expect_classes})")
    if p.expect_characteristics:
        got = sorted(to_text(normalize(c.cv.char[0])) for c in canon.classes)
        want = sorted(to_text(normalize(c)) for c in p.expect_characteristics)
        sec.check("expect.characteristics", got == want, "" if got == want else f"got {got}",
                  ", ".join(want))


def _compare_system(sec, key, expected_eqs, actual_eqs, rename):
    actual = {str(eq.lead): to_text(eq.rhs) for eq in actual_eqs}
    problems = []
    for lead, rhs in expected_eqs:
        name = str(lead)
        pot, _, suffix = name.partition("_")
        name = f"{rename.get(pot, pot)}_{suffix}"
        rhs = normalize(rhs.xreplace({sp.Symbol(a): sp.Symbol(b) for a, b in rename.items()}))
        want = to_text(rhs)
        if actual.get(name) != want:
            problems.append(f"{name}: expected {want}, got {actual.get(name)}")
    if len(expected_eqs) != len(actual_eqs):
        problems.append(f"expected {len(expected_eqs)} equations, got {len(actual_eqs)}")
    sec.check(key, not problems, "; ".join(problems))


def run_generate(ctx: Context, report: Report):
    p = ctx.problem
    sec = report.section("generate")
    sys = ctx.system()
    basis = ctx.verified_basis()
    systems = []
    if p.coefficients:
        canon = _canonical(ctx)
        if canon is None:
            sec.check("canonical_set", False, ctx.canon_error)
        else:
            try:
                systems = enumerate_potential_systems(canon, sys)
            except RUNTIME_ERRORS as exc:
                sec.check("enumerate", False, str(exc))
    for k, ps in enumerate(systems, 1):
        sec.info(f"system{k}.coefficients", _tuple_text(canon.classes[k - 1].coeffs))
        for eq in ps.equations:
            sec.info(f"system{k}.{eq.lead}", to_text(eq.rhs))
        sec.info(f"system{k}.complete", {True: "yes", False: "no", None: "unknown"}[ps.complete])
        sec.check(f"system{k}.cross_derivative", ps.cross_derivative(0) == 0)
        back = ps.source_from_equations(0)
        src = ps.sources[0]
        sec.check(f"system{k}.round_trip", normalize(back.T - src.T) == 0 and normalize(back.X - src.X) == 0)
    joint = None
    if len(basis) > 1:
        try:
            joint = build_potential_system(basis, sys)
            for eq in joint.equations:
                sec.info(f"joint.{eq.lead}", to_text(eq.rhs))
            sec.info("joint.complete", {True: "yes", False: "no", None: "unknown"}[joint.complete])
            sec.check("joint.cross_derivative", all(joint.cross_derivative(i) == 0
                                                    for i in range(len(basis))))
        except RUNTIME_ERRORS as exc:
            sec.check("joint", False, str(exc))
    names = [cv.name for cv in basis]
    for exp in p.expected:
        symbols = [s for s, _ in exp.where]
        for values in itertools.product(*[vals for _, vals in exp.where]):
            sub = dict(zip(symbols, values))
            label = exp.name + "".join(f"[{s}={to_text(v)}]" for s, v in sub.items())
            eqs = [(lead, p.bind(rhs.xreplace(sub))) for lead, rhs in exp.equations]
            try:
                if exp.vectors:
                    cvs = [basis[names.index(n)] for n in exp.vectors]
                    built = build_potential_system(cvs, sys, names=exp.potentials)
                    _compare_system(sec, f"expect.{label}", eqs, built.equations, {})
                    continue
                want = tuple(normalize(c.xreplace(sub)) for c in exp.coefficients)
                idx = [k for k, cls in enumerate(canon.classes) if cls.coeffs == want] if systems else []
                if not idx:
                    sec.check(f"expect.{label}", False, f"no canonical class with coefficients {_tuple_text(want)}")
                    continue
                k = idx[0]
                _compare_system(sec, f"expect.{label}", eqs, systems[k].equations,
                                {exp.potentials[0]: f"v{k + 1}"})
            except RUNTIME_ERRORS as exc:
                sec.check(f"expect.{label}", False, str(exc))


def _specialize(ctx: Context, check):
    bindings = {}
    fdecl = dict(ctx.problem.functions)
    for name, body in check.specialize:
        args = [sp.Symbol(a) for a in fdecl[name]]
        bindings[sp.Function(name)] = sp.Lambda(tuple(args), body)
    sys = ctx.system()
    basis = ctx.verified_basis()
    if not bindings:
        return sys, basis
    sys = sys.specialize(bindings)
    basis = [replace(cv, T=substitute(cv.T, bindings), X=substitute(cv.X, bindings),
                     char=None if cv.char is None else tuple(substitute(c, bindings) for c in cv.char))
             for cv in basis]
    return sys, basis


def run_symmetries(ctx: Context, report: Report):
    p = ctx.problem
    if not p.symmetry_checks:
        report.section("symmetries").info("skipped", "no symmetry checks declared")
    for chk in p.symmetry_checks:
        sec = report.section(f"symmetries.{chk.name}")
        try:
            sys, basis = _specialize(ctx, chk)
            target = sys
            psys = None
            if chk.coefficients:
                cv = linear_combination(chk.coefficients, basis, chk.name)
                div = verify_divergence(cv, sys, ctx.depth)
                sec.check("vector", div.passed, "" if div else f"residual {to_text(div.residual)}")
                psys = build_potential_system([cv], sys, names=(chk.potential,))
                target = psys
                sec.info("complete", {True: "yes", False: "no", None: "unknown"}[psys.complete])
                for eq in psys.system.equations:
                    sec.info(f"system.{eq.lead}", to_text(eq.rhs))
            else:
                for eq in sys.equations:
                    sec.info(f"system.{eq.lead}", to_text(eq.rhs))
        except RUNTIME_ERRORS as exc:
            sec.check("setup", False, f"{type(exc).__name__}: {exc}")
            continue
        verified = []
        for fs in chk.fields:
            vf = fs.field
            key = vf.name
            try:
                det = check_symmetry(vf, target, p.parameters, ctx.depth)
            except RUNTIME_ERRORS as exc:
                sec.check(key, False, f"{type(exc).__name__}: {exc}")
                continue
            res = "; ".join(to_text(e) for e in det.equations) or "none"
            sec.info(f"{key}.residuals", res)
            if det.split_by:
                sec.info(f"{key}.split_by", ", ".join(str(s) for s in det.split_by))
            if fs.expect == "symmetry":
                ok, what = det.is_symmetry, "symmetry"
            elif fs.expect == "not-symmetry":
                ok, what = not det.is_symmetry, "not a symmetry"
            else:
                m = match_expected(det, fs.residuals, vf.unknowns)
                ok, what = bool(m), f"residuals match (rescaled {m.rescaled}, span {m.spans})"
            if ok:
                sec.check(f"{key}.expect", True, value=what)
            elif fs.status == "claim":
                sec.check(f"{key}.expect", FLAG, "possible misprint in the printed generator: "
                                                 f"expected {fs.expect}, residuals {res}", what)
            else:
                sec.check(f"{key}.expect", False, f"expected {fs.expect}", what)
            if det.is_symmetry and psys is not None:
                pot = is_potential_symmetry(vf, psys, p.parameters, ctx.depth)
                sec.info(f"{key}.potential_symmetry", "yes" if pot else "no")
                if fs.potential_symmetry is not None:
                    sec.check(f"{key}.expect_potential_symmetry", pot == fs.potential_symmetry)
                if not vf.unknowns:
                    verified.append(vf)
            elif det.is_symmetry and not vf.unknowns:
                verified.append(vf)
        if chk.closure:
            space = (psys.system if psys is not None else target).space
            for a, b in itertools.combinations(verified, 2):
                c = commutator(a, b, space)
                try:
                    det = check_symmetry(c, target, p.parameters, ctx.depth)
                    sec.check(f"closure.[{a.name},{b.name}]", det.is_symmetry,
                              "" if det.is_symmetry else "; ".join(to_text(e) for e in det.equations))
                except RUNTIME_ERRORS as exc:
                    sec.check(f"closure.[{a.name},{b.name}]", False, str(exc))


RUNNERS = {
    "verify": (run_verify,),
    "canonicalize": (run_canonicalize,),
    "generate": (run_generate,),
    "symmetries": (run_symmetries,),
    "all": (run_verify, run_canonicalize, run_generate, run_symmetries),
}


def run(command: str, problem: Problem, depth: int | None = None) -> Report:
    report = Report(command, problem.name)
    ctx = Context(problem, depth)
    for runner in RUNNERS[command]:
        runner(ctx, report)
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="potsys", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("file")
    parser.add_argument("--report", choices=("text", "machine"), default="text")
    parser.add_argument("--golden", help="compare the report with this file")
    parser.add_argument("--depth", type=int, help="reduction depth bound")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        problem = load_problem(args.file)
    except ParseError as exc:
        print(f"{args.file}:{exc}", file=_sys.stderr)
        return 2
    except OSError as exc:
        print(f"potsys: {exc}", file=_sys.stderr)
        return 2
    report = run(args.command, problem, args.depth)
    text = report.render(args.report)
    _sys.stdout.write(text)
    if args.golden:
        try:
            with open(args.golden, encoding="utf-8") as fh:
                golden = fh.read()
        except OSError as exc:
            print(f"potsys: {exc}", file=_sys.stderr)
            return 2
        if golden != text:
            diff = difflib.unified_diff(golden.splitlines(True), text.splitlines(True),
                                        args.golden, "report")
            _sys.stderr.writelines(diff)
            return 1
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
