"""Tiny expression language for vector-field components.

Grammar (whitespace insignificant)::

    field := expr (";" expr)*
    expr  := term (("+" | "-") term)*
    term  := factor (("*" | "/") factor)*
    factor:= base ("^" base)?
    base  := number | "x"digits | func "(" expr ("," expr)* ")"
           | "(" expr ")" | "-" base

Expressions evaluate elementwise on numpy arrays; domain errors such as
``log(0)`` surface as non-finite values rather than exceptions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, ParseError, UnknownIdentifierError

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Node",
    "parse_expression",
    "parse_components",
    "to_text",
    "evaluate_node",
]

FUNCTIONS = {
    "log": (1, np.log),
    "exp": (1, np.exp),
    "sqrt": (1, np.sqrt),
    "abs": (1, np.abs),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "min": (None, None),
    "max": (None, None),
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written


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
    name: str
    args: tuple


Node = Num | Var | Neg | BinOp | Call

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Parser:
    def __init__(self, text: str, n: int | None):
        self.text = text
        self.pos = 0
        self.n = n

    def error(self, msg, pos=None):
        raise ParseError(msg, self.pos if pos is None else pos, self.text)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos : self.pos + 1]

    def expect(self, ch: str):
        if self.peek() != ch:
            got = self.peek() or "end of input"
            self.error(f"expected '{ch}', got '{got}'")
        self.pos += 1

    def components(self) -> list:
        out = [self.expr()]
        while self.peek() == ";":
            self.pos += 1
            out.append(self.expr())
        if self.peek():
            self.error(f"unexpected character '{self.peek()}'")
        return out

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek() == "^":
            self.pos += 1
            node = BinOp("^", node, self.base())
            if self.peek() == "^":
                self.error("chained '^' needs parentheses")
        return node

    def base(self):
        ch = self.peek()
        if not ch:
            self.error("unexpected end of input")
        if ch == "-":
            self.pos += 1
            return Neg(self.base())
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        m = _NUMBER.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return Num(float(m.group(0)))
        m = _NAME.match(self.text, self.pos)
        if not m:
            self.error(f"unexpected character '{ch}'")
        start, name = self.pos, m.group(0)
        self.pos = m.end()
        if re.fullmatch(r"x\d+", name):
            index = int(name[1:])
            if index < 1 or (self.n is not None and index > self.n):
                raise UnknownIdentifierError(name, start, self.text)
            return Var(index)
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(name, start, self.text)
        self.expect("(")
        args = [self.expr()]
        while self.peek() == ",":
            self.pos += 1
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name][0]
        if arity is not None and len(args) != arity:
            self.error(f"{name}() takes {arity} argument(s), got {len(args)}", start)
        if arity is None and len(args) < 2:
            self.error(f"{name}() needs at least 2 arguments", start)
        return Call(name, tuple(args))


def parse_expression(text: str, n: int | None = None) -> Node:
    """Parse a single scalar expression in variables x1..xn."""
    comps = _Parser(text, n).components()
    if len(comps) != 1:
        raise ArityError(f"expected one expression, got {len(comps)}")
    return comps[0]


def parse_components(text: str, n: int | None = None) -> list:
    """Parse a ';'-separated list of expressions.

    When ``n`` is given, variables beyond ``x<n>`` are rejected and the
    component count must equal ``n``.
    """
    comps = _Parser(text, n).components()
    if n is not None and len(comps) != n:
        raise ArityError(f"field has {len(comps)} components, dimension is {n}")
    return comps


def to_text(node: Node) -> str:
    """Print an AST so that parsing the result gives an equal evaluation."""
    if isinstance(node, Num):
        text = repr(float(node.value))
        if text in ("inf", "nan", "-inf"):
            raise ValueError(f"cannot print non-finite constant {text}")
        return f"({text})" if text.startswith("-") else text
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def max_variable(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return max_variable(node.operand)
    if isinstance(node, BinOp):
        return max(max_variable(node.left), max_variable(node.right))
    if isinstance(node, Call):
        return max(max_variable(a) for a in node.args)
    return 0


def evaluate_node(node: Node, x: np.ndarray):
    """Evaluate on points ``x`` of shape (..., n); returns shape (...)."""
    if isinstance(node, Num):
        return np.full(x.shape[:-1], node.value)
    if isinstance(node, Var):
        return x[..., node.index - 1]
    if isinstance(node, Neg):
        return -evaluate_node(node.operand, x)
    if isinstance(node, BinOp):
        a = evaluate_node(node.left, x)
        b = evaluate_node(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    if isinstance(node, Call):
        args = [evaluate_node(a, x) for a in node.args]
        if node.name == "min":
            return np.minimum.reduce(args)
        if node.name == "max":
            return np.maximum.reduce(args)
        return FUNCTIONS[node.name][1](args[0])
    raise TypeError(f"not an expression node: {node!r}")
