"""
Expression language
===================

Arithmetic expressions over the features ``x1, ..., xn`` (1-based), real
literals, the constant ``pi``, the binary operators ``+ - * / ^``, unary
minus and the functions ``exp, sin, cos, sqrt, abs, log``.

Binding strength from weakest to strongest is ``+ -``, ``* /``, unary
minus, ``^``. Binary ``+ - * /`` associate to the left, ``^`` to the right.

Example
-------
>>> tree = parse("x1 + 2*x2", 2)
>>> to_source(tree)
'(x1 + (2.0 * x2))'
>>> to_source(parse("-x1^2", 1))
'(-(x1 ^ 2.0))'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import FrozenSet, Iterator, List, Union

from .errors import ExpressionSyntaxError

FUNCTIONS = ("exp", "sin", "cos", "sqrt", "abs", "log")
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Constant:
    name: str


@dataclass(frozen=True)
class Variable:
    index: int
    """0-based feature index"""


@dataclass(frozen=True)
class Negate:
    operand: "Node"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    argument: "Node"


Node = Union[Number, Constant, Variable, Negate, BinaryOp, Call]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


_token_pat = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)

_binary_bp = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_unary_bp = 30


def tokenize(text: str) -> Iterator[Token]:
    """
    Split an expression into tokens.

    Example
    -------
    >>> [t.text for t in tokenize("exp(x1)*2.5e-1")]
    ['exp', '(', 'x1', ')', '*', '2.5e-1', '']
    """
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            yield Token("end", "", pos)
            return
        match = _token_pat.match(text, pos)
        if match is None or match.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = match.lastgroup
        yield Token(kind, match.group(kind), match.start(kind))
        pos = match.end()


class _Parser:
    """Precedence climbing parser over a token stream."""

    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens: List[Token] = list(tokenize(text))
        self.pos = 0

    @property
    def token(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def error(self, message: str, token: Token) -> ExpressionSyntaxError:
        return ExpressionSyntaxError(message, self.text, token.position)

    def expect(self, text: str):
        if self.token.text != text or self.token.kind == "end":
            found = self.token.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}", self.token)
        self.advance()

    def parse(self) -> Node:
        node = self.expression(0)
        if self.token.kind != "end":
            raise self.error(f"unexpected {self.token.text!r}", self.token)
        return node

    def expression(self, rbp: int) -> Node:
        left = self.prefix()
        while self.token.kind == "op" and _binary_bp.get(self.token.text, 0) > rbp:
            op = self.advance().text
            lbp = _binary_bp[op]
            # right associative power
            right = self.expression(lbp - 1 if op == "^" else lbp)
            left = BinaryOp(op, left, right)
        return left

    def prefix(self) -> Node:
        token = self.advance()
        if token.kind == "number":
            value = float(token.text)
            if not math.isfinite(value):
                raise self.error(f"literal {token.text} is not finite", token)
            return Number(value)
        if token.kind == "name":
            return self.name(token)
        if token.text == "-":
            return Negate(self.expression(_unary_bp))
        if token.text == "(":
            node = self.expression(0)
            self.expect(")")
            return node
        found = token.text or "end of input"
        raise self.error(f"unexpected {found!r}", token)

    def name(self, token: Token) -> Node:
        name = token.text
        if self.token.text == "(":
            if name not in FUNCTIONS:
                raise self.error(f"unknown function {name!r}", token)
            self.advance()
            argument = self.expression(0)
            self.expect(")")
            return Call(name, argument)
        if name in CONSTANTS:
            return Constant(name)
        match = re.fullmatch(r"x([1-9]\d*)", name)
        if match is None:
            raise self.error(f"unknown name {name!r}", token)
        k = int(match.group(1))
        if k > self.n:
            raise self.error(f"variable {name} exceeds the {self.n} features", token)
        return Variable(k - 1)


def parse(text: str, n: int) -> Node:
    """
    Parse an expression over ``n`` features into a syntax tree.

    Raises
    ------
    ExpressionSyntaxError
        On malformed input, unknown functions or names, and references to
        ``xk`` with ``k > n``.
    """
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", text or "", 0)
    return _Parser(text, n).parse()


def to_source(node: Node) -> str:
    """Fully parenthesized source text that parses back to the same tree."""
    if isinstance(node, Number):
        return repr(node.value)
    if isinstance(node, Constant):
        return node.name
    if isinstance(node, Variable):
        return f"x{node.index + 1}"
    if isinstance(node, Negate):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinaryOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({to_source(node.argument)})"
    raise TypeError(f"not an expression node: {node!r}")


def variables(node: Node) -> FrozenSet[int]:
    """
    Feature indices referenced by an expression.

    Example
    -------
    >>> sorted(variables(parse("x1 * exp(x3)", 3)))
    [0, 2]
    """
    if isinstance(node, Variable):
        return frozenset((node.index,))
    if isinstance(node, Negate):
        return variables(node.operand)
    if isinstance(node, BinaryOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        return variables(node.argument)
    return frozenset()
