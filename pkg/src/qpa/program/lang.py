"""Source language: AST, parser and bounded-loop unrolling.

Grammar (``#`` and ``//`` start comments, semicolons are optional)::

    program := (decl | stmt)*            declarations precede statements
    decl    := 'input' NAME ':' TYPE (',' NAME ':' TYPE)*
             | 'var' NAME ':' TYPE ('=' expr)? (',' ...)*
    TYPE    := 'u' WIDTH                 1 <= WIDTH <= 64
    stmt    := NAME ('=' | OP'=') expr
             | 'if' expr block ('else' (block | if-stmt))?
             | 'repeat' INT block
             | 'weight' INT
             | 'return' expr
    block   := '{' stmt* '}'

Operators, loosest first: ``or ||``, ``and &&``, ``not !``, comparisons
(``== != < <= > >=``, unsigned), ``|``, ``^``, ``&``, ``<< >>``, ``+ -``,
``* %`` (unsigned remainder), unary ``~``.  Integer literals take the width
of the expression they meet.  A ``var`` initializer is an ordinary assignment
at the top of the program; uninitialized variables start at 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .. import expr as bv
from ..errors import BudgetExceeded, ParseError, StructureError


@dataclass(frozen=True)
class Decl:
    name: str
    width: int
    line: int = 0


@dataclass(frozen=True)
class Assign:
    target: str
    expr: bv.BVExpr
    line: int = 0


@dataclass(frozen=True)
class If:
    cond: bv.BVExpr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] = ()
    line: int = 0


@dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple["Stmt", ...]
    line: int = 0


@dataclass(frozen=True)
class Weight:
    amount: int
    line: int = 0


@dataclass(frozen=True)
class Return:
    expr: bv.BVExpr
    line: int = 0


Stmt = Union[Assign, If, Repeat, Weight, Return]


@dataclass(frozen=True)
class SourceProgram:
    inputs: tuple[Decl, ...]
    locals: tuple[Decl, ...]
    body: tuple[Stmt, ...]

    @property
    def widths(self) -> dict[str, int]:
        return {d.name: d.width for d in (*self.inputs, *self.locals)}

    @property
    def input_widths(self) -> tuple[tuple[str, int], ...]:
        return tuple((d.name, d.width) for d in self.inputs)

    @property
    def num_input_bits(self) -> int:
        return sum(d.width for d in self.inputs)

    def is_loop_free(self) -> bool:
        return not any(isinstance(s, Repeat) for s in walk(self.body))


def walk(stmts) -> Iterator[Stmt]:
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from walk(s.then)
            yield from walk(s.orelse)
        elif isinstance(s, Repeat):
            yield from walk(s.body)


def count_conditionals(p: SourceProgram) -> int:
    return sum(isinstance(s, If) for s in walk(p.body))


# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>(\#|//)[^\n]*)
  | (?P<num>0[xX][0-9a-fA-F_]+|0[bB][01_]+|[0-9][0-9_]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><<=|>>=|<<|>>|==|!=|<=|>=|&&|\|\||[-+*%&|^]=|[-+*%&|^~!<>=(){}:;,])
    """,
    re.VERBOSE,
)

KEYWORDS = {"input", "var", "if", "else", "repeat", "weight", "return", "and", "or", "not"}


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'name' | 'kw' | 'op' | 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "name":
            tokens.append(Token("kw" if m.group() in KEYWORDS else "name", m.group(), line, col))
        elif kind in ("num", "op"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------- parser

_BINARY_LEVELS = [
    ("|",),
    ("^",),
    ("&",),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "%"),
]
_COMPARE = ("==", "!=", "<", "<=", ">", ">=")


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.widths: dict[str, int] = {}
        self.inputs: list[Decl] = []
        self.locals: list[Decl] = []

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text in texts

    def take(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.take()

    def skip_semis(self) -> None:
        while self.at(";"):
            self.take()

    # program structure
    def program(self) -> SourceProgram:
        prelude: list[Stmt] = []
        self.skip_semis()
        while self.at("input", "var"):
            prelude += self.decl()
            self.skip_semis()
        body = prelude + self.stmts(top=True)
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return SourceProgram(tuple(self.inputs), tuple(self.locals), tuple(body))

    def type_width(self) -> int:
        tok = self.take()
        m = re.fullmatch(r"u([0-9]+)", tok.text) if tok.kind == "name" else None
        if not m:
            raise self.error(f"expected a type like u8, found {tok.text!r}", tok)
        width = int(m.group(1))
        if not 1 <= width <= bv.MAX_WIDTH:
            raise self.error(f"width {width} outside 1..{bv.MAX_WIDTH}", tok)
        return width

    def declare(self, tok: Token, width: int, is_input: bool) -> Decl:
        if tok.kind != "name":
            raise self.error(f"expected a variable name, found {tok.text!r}", tok)
        if tok.text in self.widths:
            raise self.error(f"duplicate declaration of {tok.text!r}", tok)
        self.widths[tok.text] = width
        d = Decl(tok.text, width, tok.line)
        (self.inputs if is_input else self.locals).append(d)
        return d

    def decl(self) -> list[Stmt]:
        kw = self.take()
        init: list[Stmt] = []
        while True:
            name = self.take()
            self.expect(":")
            d = self.declare(name, self.type_width(), kw.text == "input")
            if kw.text == "var" and self.at("="):
                self.take()
                init.append(Assign(d.name, self.typed(self.expr(), d.width, name), name.line))
            if not self.at(","):
                return init
            self.take()

    def stmts(self, top: bool = False) -> list[Stmt]:
        out: list[Stmt] = []
        while True:
            self.skip_semis()
            if self.tok.kind == "eof" or self.at("}"):
                return out
            if out and isinstance(out[-1], Return):
                raise self.error("unreachable statement after return")
            if self.at("input", "var"):
                raise self.error("declarations must precede statements")
            out.append(self.stmt())

    def block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        body = self.stmts()
        self.expect("}")
        return tuple(body)

    def stmt(self) -> Stmt:
        tok = self.tok
        if self.at("if"):
            self.take()
            cond = bv.to_bool(self.build(self.expr(), None))
            then = self.block()
            orelse: tuple[Stmt, ...] = ()
            if self.at("else"):
                self.take()
                orelse = (self.stmt(),) if self.at("if") else self.block()
            return If(cond, then, orelse, tok.line)
        if self.at("repeat"):
            self.take()
            n = self.take()
            if n.kind != "num":
                raise self.error("repeat bound must be a non-negative integer literal", n)
            return Repeat(_int(n.text), self.block(), tok.line)
        if self.at("weight"):
            self.take()
            n = self.take()
            if n.kind != "num":
                raise self.error("weight must be an integer literal", n)
            return Weight(_int(n.text), tok.line)
        if self.at("return"):
            self.take()
            return Return(self.build(self.expr(), None), tok.line)
        if tok.kind == "name":
            self.take()
            if tok.text not in self.widths:
                raise self.error(f"undeclared identifier {tok.text!r}", tok)
            width = self.widths[tok.text]
            op = self.take()
            if op.kind != "op" or not op.text.endswith("=") or op.text in ("==", "!=", "<=", ">="):
                raise self.error(f"expected assignment, found {op.text!r}", op)
            rhs = self.expr()
            if op.text != "=":
                rhs = ("bin", op.text[:-1], ("var", tok.text, tok), rhs, op)
            return Assign(tok.text, self.typed(rhs, width, tok), tok.line)
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")

    # expressions: untyped trees first, widths resolved by build()
    def expr(self):
        return self.disj()

    def disj(self):
        node = self.conj()
        while self.at("or", "||"):
            op = self.take()
            node = ("bool", "or", node, self.conj(), op)
        return node

    def conj(self):
        node = self.negation()
        while self.at("and", "&&"):
            op = self.take()
            node = ("bool", "and", node, self.negation(), op)
        return node

    def negation(self):
        if self.at("not", "!"):
            op = self.take()
            return ("not", self.negation(), op)
        return self.comparison()

    def comparison(self):
        node = self.binary(0)
        if self.at(*_COMPARE):
            op = self.take()
            node = ("cmp", op.text, node, self.binary(0), op)
            if self.at(*_COMPARE):
                raise self.error("comparisons do not chain; add parentheses")
        return node

    def binary(self, level: int):
        if level == len(_BINARY_LEVELS):
            return self.unary()
        node = self.binary(level + 1)
        while self.at(*_BINARY_LEVELS[level]):
            op = self.take()
            node = ("bin", op.text, node, self.binary(level + 1), op)
        return node

    def unary(self):
        if self.at("~"):
            op = self.take()
            return ("inv", self.unary(), op)
        tok = self.take()
        if tok.kind == "num":
            return ("num", _int(tok.text), tok)
        if tok.kind == "name":
            if tok.text not in self.widths:
                raise self.error(f"undeclared identifier {tok.text!r}", tok)
            return ("var", tok.text, tok)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"expected an expression, found {tok.text or 'end of input'!r}", tok)

    def infer(self, node) -> int | None:
        kind = node[0]
        if kind == "num":
            return None
        if kind == "var":
            return self.widths[node[1]]
        if kind == "inv":
            return self.infer(node[1])
        if kind == "bin":
            return self.infer(node[2]) or self.infer(node[3])
        return 1

    def typed(self, node, width: int, where: Token) -> bv.BVExpr:
        e = self.build(node, width)
        if e.width != width:
            raise self.error(f"width mismatch: expected u{width}, expression is u{e.width}", where)
        return e

    def build(self, node, want: int | None) -> bv.BVExpr:
        kind = node[0]
        tok = node[-1]
        if kind == "num":
            width = want or 64
            if node[1] >= 1 << width:
                raise self.error(f"literal {node[1]} does not fit in u{width}", tok)
            return bv.const(node[1], width)
        if kind == "var":
            return bv.local(node[1], self.widths[node[1]])
        if kind == "inv":
            return bv.unop("~", self.build(node[1], want))
        if kind == "not":
            return bv.unop("not", bv.to_bool(self.build(node[1], None)))
        if kind == "bool":
            a = bv.to_bool(self.build(node[2], None))
            b = bv.to_bool(self.build(node[3], None))
            return bv.binop(node[1], a, b)
        width = self.infer(node[2]) or self.infer(node[3])
        if kind == "bin":
            width = width or want or 64
        else:
            width = width or 64
        a, b = self.build(node[2], width), self.build(node[3], width)
        if a.width != b.width:
            raise self.error(f"operand widths differ: u{a.width} {node[1]} u{b.width}", tok)
        op = node[1]
        if op == ">":
            return bv.binop("<", b, a)
        if op == "<=":
            return bv.unop("not", bv.binop("<", b, a))
        if op == ">=":
            return bv.unop("not", bv.binop("<", a, b))
        return bv.binop(op, a, b)


def _int(text: str) -> int:
    return int(text.replace("_", ""), 0)


def parse(text: str) -> SourceProgram:
    """Parse program text; raises :class:`ParseError` with line/column."""
    try:
        return _Parser(text).program()
    except StructureError as exc:
        raise ParseError(str(exc)) from exc


# ---------------------------------------------------------------- unrolling


def unroll(p: SourceProgram, max_statements: int = 1_000_000, max_depth: int = 64) -> SourceProgram:
    """Expand every ``repeat N`` loop in place."""
    count = 0

    def expand(stmts, depth: int) -> tuple[Stmt, ...]:
        nonlocal count
        if depth > max_depth:
            raise BudgetExceeded(f"nesting depth exceeds {max_depth}")
        out: list[Stmt] = []
        for s in stmts:
            if isinstance(s, Repeat):
                body = expand(s.body, depth + 1)
                for _ in range(s.count):
                    out.extend(body)
                    count += sum(1 for _ in walk(body))
            elif isinstance(s, If):
                out.append(If(s.cond, expand(s.then, depth + 1), expand(s.orelse, depth + 1), s.line))
                count += 1
            else:
                out.append(s)
                count += 1
            if count > max_statements:
                raise BudgetExceeded(f"unrolled program exceeds {max_statements} statements")
        for s in out[:-1]:
            if isinstance(s, Return):
                raise StructureError(f"line {s.line}: unreachable statements after return")
        return tuple(out)

    return SourceProgram(p.inputs, p.locals, expand(p.body, 0))


def stmt_str(s: Stmt) -> str:
    """One-line rendering of a simple statement (used in CFG dumps and traces)."""
    if isinstance(s, Assign):
        return f"{s.target} = {bv.to_str(s.expr)}"
    if isinstance(s, Return):
        return f"return {bv.to_str(s.expr)}"
    if isinstance(s, Weight):
        return f"weight {s.amount}"
    if isinstance(s, If):
        return f"if {bv.to_str(s.cond)} {{...}}"
    return f"repeat {s.count} {{...}}"
