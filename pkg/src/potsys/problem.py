"""Problem files: a small block format carrying a PDE system, its conserved
vectors, the group schema with normalization rules, candidate fields and
expected outputs.

Syntax::

    # comment
    key = "string" | 123 | ident | [value, ...] | { key = value ... }
    block_name { key = value ... }

All mathematical content sits in strings using the infix expression grammar.
Every symbol must be declared; diagnostics carry ``line:col`` positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import sympy as sp

from .conservation import ConservedVector
from .groups import GroupSchema, NormalizationRule, Residual
from .jets import Equation, InvalidSystemError, JetSpace, PdeSystem
from .kernel import OutsideFragmentError, apply_function_bindings, to_text
from .symmetry import VectorField
from .syntax import RESERVED, ParseError, SymbolTable, parse_expr

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# generic block syntax


@dataclass
class Node:
    kind: str  # string | number | ident | list | block
    value: object
    line: int
    col: int


@dataclass
class Entry:
    key: str
    node: Node
    line: int
    col: int


_LEX = re.compile(
    r'(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)|(?P<string>"(?:[^"\\\n]|\\.)*")'
    r'|(?P<number>-?\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_\-]*)|(?P<punct>[{}\[\]=,])'
)


@dataclass
class _Tok:
    kind: str
    value: str
    line: int
    col: int


def _lex(text: str):
    toks = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _LEX.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line=line, col=col)
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                if kind == "string":
                    value = re.sub(r"\\(.)", r"\1", value[1:-1])
                toks.append(_Tok(kind, value, line, col))
            col += len(m.group())
        pos = m.end()
    toks.append(_Tok("end", "", line, col))
    return toks


class _BlockParser:
    def __init__(self, text):
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, expected=()):
        t = self.tok
        return ParseError(msg, line=t.line, col=t.col, expected=expected)

    def describe(self, t):
        return "end of input" if t.kind == "end" else repr(t.value)

    def document(self):
        entries = self.entries(top=True)
        return Node("block", entries, 1, 1)

    def entries(self, top=False):
        out = []
        while True:
            t = self.tok
            if t.kind == "end":
                if not top:
                    raise self.error("unexpected end of input", expected=["'}'", "name"])
                return out
            if t.kind == "punct" and t.value == "}":
                if top:
                    raise self.error("unexpected '}'", expected=["name", "end of input"])
                return out
            if t.kind != "ident":
                raise self.error(f"unexpected {self.describe(t)}", expected=["name"] + ([] if top else ["'}'"]))
            self.i += 1
            nxt = self.tok
            if nxt.kind == "punct" and nxt.value == "=":
                self.i += 1
                out.append(Entry(t.value, self.value(), t.line, t.col))
            elif nxt.kind == "punct" and nxt.value == "{":
                out.append(Entry(t.value, self.block(), t.line, t.col))
            else:
                raise self.error(f"unexpected {self.describe(nxt)}", expected=["'='", "'{'"])

    def block(self):
        t = self.tok
        self.i += 1
        entries = self.entries()
        self.i += 1
        return Node("block", entries, t.line, t.col)

    def value(self):
        t = self.tok
        if t.kind in ("string", "ident"):
            self.i += 1
            return Node(t.kind, t.value, t.line, t.col)
        if t.kind == "number":
            self.i += 1
            return Node("number", int(t.value), t.line, t.col)
        if t.kind == "punct" and t.value == "[":
            self.i += 1
            items = []
            while not (self.tok.kind == "punct" and self.tok.value == "]"):
                items.append(self.value())
                if self.tok.kind == "punct" and self.tok.value == ",":
                    self.i += 1
                elif not (self.tok.kind == "punct" and self.tok.value == "]"):
                    raise self.error(f"unexpected {self.describe(self.tok)}", expected=["','", "']'"])
            self.i += 1
            return Node("list", items, t.line, t.col)
        if t.kind == "punct" and t.value == "{":
            return self.block()
        raise self.error(f"unexpected {self.describe(t)}",
                         expected=["string", "number", "name", "'['", "'{'"])


def parse_blocks(text: str) -> Node:
    return _BlockParser(text).document()


# ---------------------------------------------------------------------------
# problem structure


@dataclass(frozen=True)
class ExpectedSystem:
    name: str
    equations: tuple  # (lead symbol, rhs)
    coefficients: tuple = ()
    vectors: tuple = ()
    where: tuple = ()  # (symbol, values)
    potentials: tuple = ("v",)


@dataclass(frozen=True)
class FieldSpec:
    field: VectorField
    expect: str = "symmetry"  # symmetry | not-symmetry | residuals
    residuals: tuple = ()
    status: str = "checked"  # checked | claim
    potential_symmetry: bool | None = None


@dataclass(frozen=True)
class SymmetryCheck:
    name: str
    specialize: tuple = ()  # (function name, body)
    coefficients: tuple = ()  # empty: check the base system
    potential: str = "v"
    fields: tuple = ()
    closure: bool = False


@dataclass(frozen=True)
class Problem:
    name: str
    space: JetSpace
    parameters: tuple = ()
    functions: tuple = ()  # (name, argnames)
    defines: tuple = ()  # (name, body)
    equations: tuple = ()
    vectors: tuple = ()
    coefficients: tuple = ()
    group: GroupSchema | None = None
    rules: tuple = ()
    expect_characteristics: tuple = ()
    expect_classes: int | None = None
    expected: tuple = ()
    symmetry_checks: tuple = ()
    format: int = FORMAT_VERSION

    # bound views -----------------------------------------------------------

    def bindings(self):
        fdecl = dict(self.functions)
        return {n: (tuple(sp.Symbol(a) for a in fdecl[n]), body) for n, body in self.defines}

    def bind(self, e):
        b = self.bindings()
        return apply_function_bindings(e, b) if b else e

    def system(self) -> PdeSystem:
        eqs = tuple(Equation(eq.lead, self.bind(eq.rhs)) for eq in self.equations)
        return PdeSystem(self.space, eqs, self.name)

    def basis(self) -> list:
        out = []
        for cv in self.vectors:
            char = None if cv.char is None else tuple(self.bind(c) for c in cv.char)
            out.append(ConservedVector(self.bind(cv.T), self.bind(cv.X), char, cv.name))
        return out

    def coefficient_symbols(self):
        return tuple(sp.Symbol(c) for c in self.coefficients)


# ---------------------------------------------------------------------------
# semantic layer


_TOP_KEYS = {
    "format", "name", "independent", "dependent", "parameters", "functions", "define",
    "equation", "conserved_vector", "coefficients", "group", "rule", "expect_characteristics",
    "expect_classes", "expect_system", "symmetry_check",
}
_REPEATABLE = {"equation", "conserved_vector", "rule", "expect_system", "symmetry_check"}


class _Builder:
    def __init__(self, text):
        self.text = text

    def err(self, node_or_entry, msg, expected=()):
        return ParseError(msg, line=node_or_entry.line, col=node_or_entry.col, expected=expected)

    # value helpers
    def fields(self, block: Node, allowed, required=(), repeatable=()):
        seen = {}
        for e in block.value:
            if e.key not in allowed:
                raise self.err(e, f"unknown key {e.key}", expected=sorted(allowed))
            if e.key in seen and e.key not in repeatable:
                raise self.err(e, f"duplicate key {e.key}")
            seen.setdefault(e.key, []).append(e)
        for r in required:
            if r not in seen:
                raise self.err(block, f"missing key {r}")
        return seen

    def one(self, seen, key, kind=None, default=None):
        if key not in seen:
            return default
        e = seen[key][0]
        if kind is not None and e.node.kind not in kind:
            raise self.err(e.node, f"{key} must be a {' or '.join(kind)}")
        return e.node

    def string(self, seen, key, default=None):
        n = self.one(seen, key, ("string",))
        return default if n is None else n.value

    def strings(self, seen, key):
        n = self.one(seen, key, ("list",))
        if n is None:
            return []
        for item in n.value:
            if item.kind != "string":
                raise self.err(item, f"{key} entries must be strings")
        return n.value

    def expr(self, node: Node, table: SymbolTable):
        if node.kind == "number":
            return sp.Integer(node.value)
        if node.kind != "string":
            raise self.err(node, "expected an expression string")
        try:
            return parse_expr(node.value, table)
        except ParseError as exc:
            raise ParseError(exc.message, line=node.line, col=node.col + exc.col,
                             expected=exc.expected) from None

    def declare(self, names, nodes, taken):
        for n, node in zip(names, nodes):
            if not re.fullmatch(r"[A-Za-z][A-Za-z0-9]*", n):
                raise self.err(node, f"invalid name {n!r}")
            if n in taken or n in RESERVED:
                raise self.err(node, f"duplicate declaration of {n}")
            taken.add(n)

    def build(self) -> Problem:
        doc = parse_blocks(self.text)
        top = self.fields(doc, _TOP_KEYS, ("equation",), _REPEATABLE)
        fmt = self.one(top, "format", ("number",))
        if fmt is not None and fmt.value != FORMAT_VERSION:
            raise self.err(fmt, f"unsupported format version {fmt.value}")
        name = self.string(top, "name", "")
        taken = set()
        ind_nodes = self.strings(top, "independent")
        independent = tuple(n.value for n in ind_nodes) or ("t", "x")
        if ind_nodes and len(ind_nodes) != 2:
            raise self.err(self.one(top, "independent"), "exactly two independent variables are required")
        self.declare(independent, ind_nodes or [doc, doc], taken)
        dep_nodes = self.strings(top, "dependent")
        dependent = tuple(n.value for n in dep_nodes) or ("u",)
        self.declare(dependent, dep_nodes or [doc], taken)
        space = JetSpace(independent, dependent)
        par_nodes = self.strings(top, "parameters")
        parameters = tuple(n.value for n in par_nodes)
        self.declare(parameters, par_nodes, taken)
        functions = []
        for n in self.strings(top, "functions"):
            m = re.fullmatch(r"\s*([A-Za-z][A-Za-z0-9]*)\s*\(([^()]*)\)\s*", n.value)
            if not m:
                raise self.err(n, "function declarations look like A(u)")
            args = tuple(a.strip() for a in m.group(2).split(","))
            for a in args:
                if a not in independent and a not in dependent:
                    raise self.err(n, f"argument {a} of {m.group(1)} is not a variable")
            self.declare([m.group(1)], [n], taken)
            functions.append((m.group(1), args))
        table = SymbolTable(space, parameters, dict(functions))

        defines = []
        d = self.one(top, "define", ("block",))
        if d is not None:
            for e in d.value:
                if e.key not in dict(functions):
                    raise self.err(e, f"define: {e.key} is not a declared function")
                defines.append((e.key, self.expr(e.node, table)))

        equations = []
        for e in top["equation"]:
            if e.node.kind != "block":
                raise self.err(e, "equation must be a block")
            f = self.fields(e.node, {"lead", "rhs"}, ("lead", "rhs"))
            lead_node = self.one(f, "lead", ("string",))
            lead = self.expr(lead_node, table)
            if space.info(lead) is None:
                raise self.err(lead_node, f"leading term {lead_node.value} is not a jet variable")
            equations.append(Equation(lead, self.expr(self.one(f, "rhs"), table)))
        try:
            PdeSystem(space, tuple(equations), name)
        except InvalidSystemError as exc:
            raise self.err(top["equation"][0], str(exc)) from None

        vectors = []
        vnames = set()
        for k, e in enumerate(top.get("conserved_vector", []), 1):
            if e.node.kind != "block":
                raise self.err(e, "conserved_vector must be a block")
            f = self.fields(e.node, {"name", "T", "X", "char"}, ("T", "X"))
            vname = self.string(f, "name", f"cv{k}")
            if vname in vnames:
                raise self.err(e, f"duplicate conserved vector {vname}")
            vnames.add(vname)
            char = None
            if "char" in f:
                char = tuple(self.expr(n, table) for n in self.strings(f, "char"))
                if len(char) != len(equations):
                    raise self.err(self.one(f, "char"), "one characteristic entry per equation is required")
            vectors.append(ConservedVector(self.expr(self.one(f, "T"), table),
                                           self.expr(self.one(f, "X"), table), char, vname))

        co_nodes = self.strings(top, "coefficients")
        coefficients = tuple(n.value for n in co_nodes)
        self.declare(coefficients, co_nodes, taken)
        if coefficients and len(coefficients) != len(vectors):
            raise self.err(self.one(top, "coefficients"), "one coefficient per conserved vector is required")
        ctable = table.with_parameters(*coefficients)

        group = None
        g = self.one(top, "group", ("block",))
        gtable = table
        if g is not None:
            group, gtable = self.group(g, table, space, dict(functions), taken)
        rules = []
        rnames = set()
        for k, e in enumerate(top.get("rule", []), 1):
            if group is None:
                raise self.err(e, "rules require a group block")
            rule = self.rule(e, k, ctable, group, coefficients)
            if rule.name in rnames:
                raise self.err(e, f"duplicate rule {rule.name}")
            rnames.add(rule.name)
            rules.append(rule)

        expect_chars = tuple(self.expr(n, table) for n in self.strings(top, "expect_characteristics"))
        ec = self.one(top, "expect_classes", ("number",))
        expected = tuple(self.expect_system(e, table, coefficients, vnames)
                         for e in top.get("expect_system", []))
        checks = tuple(self.symmetry_check(e, table, space, dict(functions), coefficients)
                       for e in top.get("symmetry_check", []))
        return Problem(name, space, parameters, tuple(functions), tuple(defines), tuple(equations),
                       tuple(vectors), coefficients, group, tuple(rules), expect_chars,
                       None if ec is None else ec.value, expected, checks)

    def group(self, g, table, space, functions, taken):
        allowed = {"parameters", "constraints", "potential", "identity"} | set(space.independent) \
            | set(space.dependent) | set(functions)
        f = self.fields(g, allowed, ("parameters",))
        pnodes = self.strings(f, "parameters")
        params = tuple(n.value for n in pnodes)
        self.declare(params, pnodes, taken)
        gtable = table.with_parameters(*params)
        formulas = []
        for key in list(space.independent) + list(space.dependent) + sorted(functions):
            if key in f:
                formulas.append((key, self.expr(self.one(f, key), gtable)))
        constraints = tuple(self.expr(n, gtable) for n in self.strings(f, "constraints"))
        pot = self.one(f, "potential")
        potential = self.expr(pot, gtable) if pot is not None else sp.S.One
        identity = []
        idn = self.one(f, "identity", ("block",))
        if idn is not None:
            for e in idn.value:
                if e.key not in params:
                    raise self.err(e, f"identity: {e.key} is not a group parameter")
                identity.append((sp.Symbol(e.key), self.expr(e.node, table)))
        named = {p for p, _ in identity}
        identity += [(sp.Symbol(p), sp.S.Zero) for p in params if sp.Symbol(p) not in named]
        schema = GroupSchema(tuple(sp.Symbol(p) for p in params), tuple(formulas), constraints,
                             potential, tuple(identity))
        return schema, gtable

    def guard(self, node, table):
        if node is None:
            return ()
        if node.kind != "string":
            raise self.err(node, "guard must be a string")
        atoms = []
        offset = 0
        for part in re.split(r"(\band\b)", node.value):
            if part == "and":
                offset += len(part)
                continue
            if part.strip():
                m = re.fullmatch(r"(.*?)(!=|==)\s*0\s*", part)
                if not m:
                    raise ParseError("guard atoms look like 'expr != 0' or 'expr == 0'",
                                     line=node.line, col=node.col + 1 + offset)
                sub = Node("string", m.group(1), node.line, node.col + offset)
                atoms.append((self.expr(sub, table), m.group(2) == "!="))
            offset += len(part)
        return tuple(atoms)

    def assignments(self, node, table, params, what):
        out = []
        if node is None:
            return ()
        for e in node.value:
            if sp.Symbol(e.key) not in params:
                raise self.err(e, f"{what}: {e.key} is not a group parameter")
            out.append((sp.Symbol(e.key), self.expr(e.node, table)))
        return tuple(out)

    def effect(self, f, table, n):
        nodes = self.strings(f, "effect")
        if len(nodes) != n:
            raise self.err(self.one(f, "effect") or nodes, f"effect needs {n} entries")
        return tuple(self.expr(x, table) for x in nodes)

    def rule(self, e, k, table, group, coefficients):
        if e.node.kind != "block":
            raise self.err(e, "rule must be a block")
        f = self.fields(e.node, {"name", "guard", "transform", "effect", "residual"}, ("effect",))
        name = self.string(f, "name", f"rule{k}")
        guard = self.guard(self.one(f, "guard"), table)
        transform = self.assignments(self.one(f, "transform", ("block",)), table, group.params, "transform")
        effect = self.effect(f, table, len(coefficients))
        residual = None
        r = self.one(f, "residual", ("block",))
        if r is not None:
            rf = self.fields(r, {"component", "transform", "effect"}, ("component", "effect"))
            comp = self.one(rf, "component", ("string", "ident"))
            if comp.value not in coefficients:
                raise self.err(comp, f"{comp.value} is not a coefficient")
            residual = Residual(sp.Symbol(comp.value),
                                self.assignments(self.one(rf, "transform", ("block",)), table,
                                                 group.params, "transform"),
                                self.effect(rf, table, len(coefficients)))
        return NormalizationRule(name, guard, transform, effect, residual)

    def equation_line(self, node, table):
        if node.kind != "string" or node.value.count("=") != 1:
            raise self.err(node, "equations look like 'v_x = expr'")
        lhs, rhs = node.value.split("=")
        lead = self.expr(Node("string", lhs, node.line, node.col), table)
        if table.space.info(lead) is None:
            raise self.err(node, f"{lhs.strip()} is not a jet variable")
        return lead, self.expr(Node("string", rhs, node.line, node.col + len(lhs) + 1), table)

    def expect_system(self, e, table, coefficients, vnames):
        f = self.fields(e.node, {"name", "coefficients", "vectors", "where", "equations", "potentials"},
                        ("equations",))
        name = self.string(f, "name", "")
        where = []
        w = self.one(f, "where", ("block",))
        if w is not None:
            for we in w.value:
                if we.node.kind != "list":
                    raise self.err(we, "where entries are lists of values")
                where.append((sp.Symbol(we.key), tuple(self.expr(n, table) for n in we.node.value)))
        wtable = table.with_parameters(*[str(s) for s, _ in where])
        vectors = tuple(n.value for n in self.strings(f, "vectors"))
        for n, node in zip(vectors, self.strings(f, "vectors")):
            if n not in vnames:
                raise self.err(node, f"unknown conserved vector {n}")
        pots = tuple(n.value for n in self.strings(f, "potentials"))
        if not pots:
            pots = tuple(f"v{k}" for k in range(1, len(vectors) + 1)) if vectors else ("v",)
        etable = wtable.with_dependent(*pots)
        coeffs = tuple(self.expr(n, wtable) for n in self.strings(f, "coefficients"))
        if coeffs and len(coeffs) != len(coefficients):
            raise self.err(self.one(f, "coefficients"), "one value per coefficient is required")
        eqs = tuple(self.equation_line(n, etable) for n in self.strings(f, "equations"))
        return ExpectedSystem(name, eqs, coeffs, vectors, tuple(where), pots)

    def symmetry_check(self, e, table, space, functions, coefficients):
        f = self.fields(e.node, {"name", "specialize", "coefficients", "potential", "field", "closure"},
                        ("field",), ("field",))
        name = self.string(f, "name", "")
        spec = []
        s = self.one(f, "specialize", ("block",))
        if s is not None:
            for se in s.value:
                if se.key not in functions:
                    raise self.err(se, f"specialize: {se.key} is not a declared function")
                spec.append((se.key, self.expr(se.node, table)))
        coeffs = tuple(self.expr(n, table) for n in self.strings(f, "coefficients"))
        if coeffs and len(coeffs) != len(coefficients):
            raise self.err(self.one(f, "coefficients"), "one value per coefficient is required")
        potential = self.string(f, "potential", "v")
        ftable = table.with_dependent(potential) if coeffs else table
        closure = self.one(f, "closure", ("ident",))
        fields = []
        fnames = set()
        for k, fe in enumerate(f["field"], 1):
            spec_field = self.field(fe, k, ftable, potential if coeffs else None)
            if spec_field.field.name in fnames:
                raise self.err(fe, f"duplicate field {spec_field.field.name}")
            fnames.add(spec_field.field.name)
            fields.append(spec_field)
        return SymmetryCheck(name, tuple(spec), coeffs, potential, tuple(fields),
                             closure is not None and closure.value == "true")

    def field(self, fe, k, table, potential):
        deps = list(table.space.dependent)
        allowed = {"name", "xi", "tau", "unknowns", "expect", "residuals", "status", "potential_symmetry"}
        allowed |= {f"eta_{d}" for d in deps}
        f = self.fields(fe.node, allowed)
        name = self.string(f, "name", f"field{k}")
        unknowns = []
        unames = {}
        for n in self.strings(f, "unknowns"):
            m = re.fullmatch(r"\s*([A-Za-z][A-Za-z0-9]*)\s*\(([^()]*)\)\s*", n.value)
            if not m:
                raise self.err(n, "unknowns look like mu(t,x)")
            args = tuple(a.strip() for a in m.group(2).split(","))
            for a in args:
                if a not in table.space.independent and a not in deps:
                    raise self.err(n, f"argument {a} of {m.group(1)} is not a variable")
            if m.group(1) in table.names() or m.group(1) in table.functions or m.group(1) in unames:
                raise self.err(n, f"duplicate declaration of {m.group(1)}")
            unames[m.group(1)] = args
            unknowns.append(sp.Function(m.group(1))(*[sp.Symbol(a) for a in args]))
        ftable = table.with_functions(unames)

        def get(key):
            node = self.one(f, key)
            return sp.S.Zero if node is None else self.expr(node, ftable)

        eta = tuple((d, get(f"eta_{d}")) for d in deps if f"eta_{d}" in f)
        vf = VectorField(get("xi"), get("tau"), eta, tuple(unknowns), name)
        expect = self.one(f, "expect", ("ident", "string"))
        expect = "symmetry" if expect is None else expect.value
        if expect not in ("symmetry", "not-symmetry", "residuals"):
            raise self.err(self.one(f, "expect"), "expect is one of symmetry, not-symmetry, residuals")
        status = self.one(f, "status", ("ident", "string"))
        status = "checked" if status is None else status.value
        if status not in ("checked", "claim"):
            raise self.err(self.one(f, "status"), "status is one of checked, claim")
        residuals = tuple(self.expr(n, ftable) for n in self.strings(f, "residuals"))
        ps = self.one(f, "potential_symmetry", ("ident",))
        psym = None if ps is None else ps.value == "true"
        return FieldSpec(vf, expect, residuals, status, psym)


def parse_problem(text: str) -> Problem:
    """Parse problem-file text; raises :class:`ParseError` with line/column."""
    try:
        return _Builder(text).build()
    except OutsideFragmentError as exc:
        raise ParseError(str(exc), line=1, col=1) from None


def load_problem(path) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


# ---------------------------------------------------------------------------
# printing


def _q(e) -> str:
    s = to_text(e) if not isinstance(e, str) else e
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _list(items) -> str:
    return "[" + ", ".join(_q(i) for i in items) + "]"


def _guard_text(guard) -> str:
    return " and ".join(f"{to_text(e)} {'!=' if nz else '=='} 0" for e, nz in guard)


def format_problem(p: Problem) -> str:
    """Canonical text of a problem; parsing it gives back an equal structure."""
    out = [f"format = {p.format}", f"name = {_q(p.name)}",
           f"independent = {_list(p.space.independent)}", f"dependent = {_list(p.space.dependent)}"]
    if p.parameters:
        out.append(f"parameters = {_list(p.parameters)}")
    if p.functions:
        out.append(f"functions = {_list([f'{n}({chr(44).join(a)})' for n, a in p.functions])}")
    if p.defines:
        out.append("define {")
        out += [f"  {n} = {_q(b)}" for n, b in p.defines]
        out.append("}")
    for eq in p.equations:
        out += ["equation {", f"  lead = {_q(eq.lead)}", f"  rhs = {_q(eq.rhs)}", "}"]
    for cv in p.vectors:
        out += ["conserved_vector {", f"  name = {_q(cv.name)}", f"  T = {_q(cv.T)}", f"  X = {_q(cv.X)}"]
        if cv.char is not None:
            out.append(f"  char = {_list(cv.char)}")
        out.append("}")
    if p.coefficients:
        out.append(f"coefficients = {_list(p.coefficients)}")
    g = p.group
    if g is not None:
        out += ["group {", f"  parameters = {_list([str(s) for s in g.params])}"]
        out += [f"  {k} = {_q(v)}" for k, v in g.formulas]
        if g.constraints:
            out.append(f"  constraints = {_list(g.constraints)}")
        out.append(f"  potential = {_q(g.potential)}")
        out.append("  identity {")
        out += [f"    {k} = {_q(v)}" for k, v in g.identity]
        out += ["  }", "}"]
    for r in p.rules:
        out += ["rule {", f"  name = {_q(r.name)}"]
        if r.guard:
            out.append(f"  guard = {_q(_guard_text(r.guard))}")
        out.append("  transform {")
        out += [f"    {k} = {_q(v)}" for k, v in r.transform]
        out += ["  }", f"  effect = {_list(r.effect)}"]
        if r.residual is not None:
            out += ["  residual {", f"    component = {_q(str(r.residual.component))}", "    transform {"]
            out += [f"      {k} = {_q(v)}" for k, v in r.residual.transform]
            out += ["    }", f"    effect = {_list(r.residual.effect)}", "  }"]
        out.append("}")
    if p.expect_characteristics:
        out.append(f"expect_characteristics = {_list(p.expect_characteristics)}")
    if p.expect_classes is not None:
        out.append(f"expect_classes = {p.expect_classes}")
    for e in p.expected:
        out += ["expect_system {", f"  name = {_q(e.name)}"]
        if e.where:
            out.append("  where {")
            out += [f"    {s} = {_list(vals)}" for s, vals in e.where]
            out.append("  }")
        if e.coefficients:
            out.append(f"  coefficients = {_list(e.coefficients)}")
        if e.vectors:
            out.append(f"  vectors = {_list(e.vectors)}")
        out.append(f"  potentials = {_list(e.potentials)}")
        out.append(f"  equations = {_list([f'{l} = {to_text(r)}' for l, r in e.equations])}")
        out.append("}")
    for c in p.symmetry_checks:
        out += ["symmetry_check {", f"  name = {_q(c.name)}"]
        if c.specialize:
            out.append("  specialize {")
            out += [f"    {k} = {_q(v)}" for k, v in c.specialize]
            out.append("  }")
        if c.coefficients:
            out.append(f"  coefficients = {_list(c.coefficients)}")
            out.append(f"  potential = {_q(c.potential)}")
        if c.closure:
            out.append("  closure = true")
        for fs in c.fields:
            vf = fs.field
            out += ["  field {", f"    name = {_q(vf.name)}", f"    xi = {_q(vf.xi)}", f"    tau = {_q(vf.tau)}"]
            out += [f"    eta_{d} = {_q(e)}" for d, e in vf.eta]
            if vf.unknowns:
                out.append(f"    unknowns = {_list([to_text(u) for u in vf.unknowns])}")
            out.append(f"    expect = {fs.expect}")
            if fs.residuals:
                out.append(f"    residuals = {_list(fs.residuals)}")
            out.append(f"    status = {fs.status}")
            if fs.potential_symmetry is not None:
                out.append(f"    potential_symmetry = {'true' if fs.potential_symmetry else 'false'}")
            out.append("  }")
        out.append("}")
    return "\n".join(out) + "\n"
