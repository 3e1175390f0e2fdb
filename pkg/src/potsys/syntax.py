"""Infix expression syntax.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("+" | "-") unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Built-in calls: ``exp sin cos arctan sqrt``, ``Int(A,u)`` for the formal
antiderivative and ``Diff(A,u[,...])`` for formal derivatives of a declared
function.  ``pi`` is the only named constant.  Integer literals divide exactly,
so ``3/2`` is a rational.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import sympy as sp

from .jets import JetSpace
from .kernel import Int

BUILTINS = {"exp": sp.exp, "sin": sp.sin, "cos": sp.cos, "arctan": sp.atan, "sqrt": sp.sqrt}
RESERVED = set(BUILTINS) | {"Int", "Diff", "pi"}


class ParseError(ValueError):
    """Lexical, syntactic or semantic error with a source position."""

    def __init__(self, message, pos=0, text="", expected=(), line=None, col=None):
        self.message = message
        self.pos = pos
        self.expected = tuple(sorted(expected))
        if line is None:
            line = text.count("\n", 0, pos) + 1
            col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        self.line = line
        self.col = col
        super().__init__(str(self))

    def __str__(self):
        s = f"{self.line}:{self.col}: {self.message}"
        if self.expected:
            s += f" (expected one of: {', '.join(self.expected)})"
        return s


@dataclass
class SymbolTable:
    """Names an expression may use.

    ``functions`` maps an arbitrary-function name to its argument names.
    With ``strict=False`` unknown names become fresh symbols/functions.
    """

    space: JetSpace = field(default_factory=JetSpace)
    parameters: tuple[str, ...] = ()
    functions: dict[str, tuple[str, ...]] = field(default_factory=dict)
    strict: bool = True

    def with_dependent(self, *names: str) -> "SymbolTable":
        return SymbolTable(self.space.extend(*names), self.parameters, dict(self.functions), self.strict)

    def with_parameters(self, *names: str) -> "SymbolTable":
        return SymbolTable(self.space, self.parameters + tuple(names), dict(self.functions), self.strict)

    def with_functions(self, functions) -> "SymbolTable":
        merged = dict(self.functions)
        merged.update(functions)
        return SymbolTable(self.space, self.parameters, merged, self.strict)

    def names(self) -> set[str]:
        return set(self.space.independent) | set(self.space.dependent) | set(self.parameters)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str
    value: str
    pos: int


def tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        if value == "**":
            value = "^"
        toks.append(_Tok(kind, value, start))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str, table: SymbolTable):
        self.text = text
        self.table = table
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message, tok=None, expected=()):
        tok = tok or self.tok
        return ParseError(message, tok.pos, self.text, expected)

    def take(self, value):
        if self.tok.value != value or self.tok.kind not in ("op",):
            found = self.tok.value or "end of input"
            raise self.error(f"unexpected {found!r}", expected=[repr(value)])
        self.i += 1

    def parse(self):
        e = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.value!r}", expected=["operator", "end of input"])
        return e

    def expr(self):
        e = self.term()
        while self.tok.kind == "op" and self.tok.value in "+-":
            op = self.tok.value
            self.i += 1
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        # a leading sign covers the whole product: -a*b is -(a*b)
        if self.tok.kind == "op" and self.tok.value in "+-":
            op = self.tok.value
            self.i += 1
            e = self.term()
            return -e if op == "-" else e
        e = self.power()
        while self.tok.kind == "op" and self.tok.value in "*/":
            op = self.tok.value
            self.i += 1
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self):
        if self.tok.kind == "op" and self.tok.value in "+-":
            op = self.tok.value
            self.i += 1
            e = self.unary()
            return -e if op == "-" else e
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.value == "^":
            self.i += 1
            return base ** self.unary()
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return sp.Integer(int(tok.value))
        if tok.kind == "op" and tok.value == "(":
            self.i += 1
            e = self.expr()
            self.take(")")
            return e
        if tok.kind == "name":
            self.i += 1
            if self.tok.kind == "op" and self.tok.value == "(":
                return self.call(tok)
            return self.name(tok)
        found = tok.value or "end of input"
        raise self.error(f"unexpected {found!r}", expected=["number", "name", "'('"])

    def name(self, tok):
        name = tok.value
        table = self.table
        if name == "pi":
            return sp.pi
        if name in RESERVED:
            raise self.error(f"{name} must be called with arguments", tok)
        if name in table.names():
            return sp.Symbol(name)
        info = table.space.parse_name(name)
        if info is not None:
            return table.space.jet(*info)
        if name in table.functions:
            raise self.error(f"function {name} must be applied to arguments", tok)
        if not table.strict:
            return sp.Symbol(name)
        raise self.error(f"undeclared symbol {name}", tok)

    def args(self):
        self.take("(")
        out = [self.expr()]
        while self.tok.kind == "op" and self.tok.value == ",":
            self.i += 1
            out.append(self.expr())
        self.take(")")
        return out

    def function_name(self):
        tok = self.tok
        if tok.kind != "name":
            raise self.error("expected a function name", expected=["name"])
        self.i += 1
        return tok

    def variable(self):
        tok = self.tok
        e = self.expr()
        if not isinstance(e, sp.Symbol):
            raise self.error("expected a variable", tok)
        return e

    def declared_function(self, tok, arity=None):
        name = tok.value
        if name in self.table.functions:
            argnames = self.table.functions[name]
            if arity is not None and len(argnames) != arity:
                raise self.error(f"{name} takes {len(argnames)} arguments", tok)
            return sp.Function(name), [sp.Symbol(a) for a in argnames]
        if not self.table.strict:
            return sp.Function(name), None
        raise self.error(f"undeclared function {name}", tok)

    def call(self, tok):
        name = tok.value
        if name in BUILTINS:
            args = self.args()
            if len(args) != 1:
                raise self.error(f"{name} takes one argument", tok)
            return BUILTINS[name](args[0])
        if name == "Int":
            self.take("(")
            ftok = self.function_name()
            self.take(",")
            var = self.variable()
            self.take(")")
            fn, declared = self.declared_function(ftok, arity=1)
            if declared is not None and declared[0] != var:
                raise self.error(f"{ftok.value} is a function of {declared[0]}, not {var}", ftok)
            return Int(fn(var), var)
        if name == "Diff":
            self.take("(")
            ftok = self.function_name()
            wrt = []
            while self.tok.kind == "op" and self.tok.value == ",":
                self.i += 1
                wrt.append(self.variable())
            self.take(")")
            if not wrt:
                raise self.error("Diff needs at least one variable", ftok)
            fn, declared = self.declared_function(ftok)
            applied = fn(*(declared if declared is not None else wrt[:1]))
            for v in wrt:
                applied = applied.diff(v)
            return applied
        if name in self.table.functions or not self.table.strict:
            fn, declared = self.declared_function(tok)
            args = self.args()
            if declared is not None and len(args) != len(declared):
                raise self.error(f"{name} takes {len(declared)} arguments", tok)
            return fn(*args)
        raise self.error(f"undeclared function {name}", tok)


def parse_expr(text: str, table: SymbolTable | None = None):
    """Parse ``text`` into a sympy expression (not normalized)."""
    if table is None:
        table = SymbolTable(strict=False)
    return _Parser(text, table).parse()
