"""Recursive-descent parser for graph expressions ``f(u, v)``.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := unary ('^' factor)?          # right associative
    unary  := '-' unary | atom
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

Unary minus sits below ``^`` in the grammar, so ``-u^2`` is ``(-u)^2``.
The Unicode minus sign is accepted as ``-``.  Variables are ``u, v`` and
``u1 .. un``; functions are ``sqrt, exp, log, sin, cos``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

from . import jets
from .jets import Jet

FUNCTIONS: dict[str, Callable] = {
    "sqrt": jets.sqrt,
    "exp": jets.exp,
    "log": jets.log,
    "sin": jets.sin,
    "cos": jets.cos,
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()−,])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    """Malformed expression; ``position`` is a 0-based character offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at offset {position}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            out.append(Token(kind, "-" if tok == "−" else tok, pos))
        pos = m.end()
    out.append(Token("end", "", len(text)))
    return out


def _var_index(name: str, n: int | None) -> int | None:
    if name == "u":
        return 0
    if name == "v":
        return 1
    m = re.fullmatch(r"u([1-9]\d*)", name)
    if m:
        return int(m.group(1)) - 1
    return None


class _Parser:
    def __init__(self, text: str, n: int | None):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.n = n

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(message, tok.pos, self.text)

    def eat(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind not in ("op",):
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            self.error(f"expected {text!r}, found {found}")
        tok = self.tok
        self.i += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        node = self.unary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.i += 1
            node = BinOp("^", node, self.factor())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.i += 1
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if self.tok.kind == "op" and self.tok.text == "(":
                if tok.text not in FUNCTIONS:
                    self.error(f"unknown function {tok.text!r}", tok)
                self.i += 1
                arg = self.expr()
                if self.tok.kind == "op" and self.tok.text == ",":
                    self.error(f"function {tok.text!r} takes exactly one argument")
                self.eat(")")
                return Call(tok.text, arg)
            if tok.text in FUNCTIONS:
                self.error(f"function {tok.text!r} requires one argument in parentheses", tok)
            k = _var_index(tok.text, self.n)
            if k is None or (self.n is not None and k >= self.n):
                self.error(f"unknown identifier {tok.text!r}", tok)
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.i += 1
            node = self.expr()
            self.eat(")")
            return node
        if tok.kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected {tok.text!r}")


def parse(text: str, n: int | None = None) -> Node:
    """Parse ``text``; with ``n`` given, variables beyond ``u_n`` are rejected."""
    return _Parser(text, n).parse()


def pretty(node: Node) -> str:
    """Fully parenthesized form that re-parses to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    return f"({pretty(node.left)} {node.op} {pretty(node.right)})"


def variables_used(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return variables_used(node.operand if isinstance(node, Neg) else node.arg)
    return variables_used(node.left) | variables_used(node.right)


def num_vars(node: Node) -> int:
    """Smallest ``n`` covering the variables in ``node`` (at least 2)."""
    idx = [_var_index(v, None) for v in variables_used(node)]
    return max([2] + [k + 1 for k in idx])


def _power(a, b):
    if isinstance(b, Jet):
        return a**b
    if isinstance(a, Jet):
        return jets.pow_real(a, b)
    return jets.pow_real(float(a), b)


def evaluate(node: Node, coords: Sequence):
    """Evaluate over floats or jets; ``coords[k]`` is ``u_{k+1}``."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return coords[_var_index(node.name, None)]
    if isinstance(node, Neg):
        return -evaluate(node.operand, coords)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](evaluate(node.arg, coords))
    a = evaluate(node.left, coords)
    b = evaluate(node.right, coords)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if not isinstance(b, Jet) and b == 0:
            raise ZeroDivisionError("division by zero in expression")
        return a / b
    return _power(a, b)


def parse_surface_expression(text: str, n: int | None = None) -> Callable[[Sequence], object]:
    """Parse ``text`` and return ``f(coords)`` usable with floats or jets."""
    node = parse(text, n)

    def f(coords):
        return evaluate(node, coords)

    f.ast = node  # type: ignore[attr-defined]
    f.text = text  # type: ignore[attr-defined]
    return f
