"""Tokenizer, recursive-descent parser and evaluator for Countdown expressions.

Grammar (left-associative, ``* /`` bind tighter than ``+ -``)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := NUMBER | '(' expr ')'

Unary minus, variables, words and ``=`` are rejected. With
``extended=True`` the parser also accepts ``^``, ``**``, ``%`` and ``//``
as binary operators so that the verifier can report them as operator
violations instead of parse failures.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

ALLOWED_OPS = ("+", "-", "*", "/")
EXTENDED_OPS = ("**", "//", "^", "%")

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|(\*\*|//|[-+*/()^%]))")


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class Num:
    value: Union[int, float]


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Num, BinOp]


@dataclass(frozen=True)
class ExpressionTree:
    root: Node
    source_text: str

    def leaves(self) -> list:
        out = []

        def walk(n):
            if isinstance(n, Num):
                out.append(n.value)
            else:
                walk(n.left)
                walk(n.right)

        walk(self.root)
        return out

    def operators(self) -> list[str]:
        out = []

        def walk(n):
            if isinstance(n, BinOp):
                out.append(n.op)
                walk(n.left)
                walk(n.right)

        walk(self.root)
        return out

    def __str__(self) -> str:
        return to_text(self.root)


def tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r} at {pos}")
        tokens.append(m.group(1) or m.group(2))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str], extended: bool):
        self.tokens = tokens
        self.pos = 0
        self.add_ops = ("+", "-")
        self.mul_ops = ("*", "/") + (EXTENDED_OPS if extended else ())

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expr(self) -> Node:
        node = self.term()
        while self.peek() in self.add_ops:
            op = self.take()
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek() in self.mul_ops:
            op = self.take()
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        tok = self.take()
        if tok is None:
            raise ParseError("unexpected end of expression")
        if tok == "(":
            node = self.expr()
            if self.take() != ")":
                raise ParseError("missing closing parenthesis")
            return node
        if tok[0].isdigit():
            return Num(float(tok) if "." in tok else int(tok))
        raise ParseError(f"unexpected token {tok!r}")


def parse_expression(text, extended: bool = False) -> ExpressionTree:
    if text is None or not str(text).strip():
        raise ParseError("missing or empty expression")
    text = str(text)
    parser = _Parser(tokenize(text), extended)
    root = parser.expr()
    if parser.peek() is not None:
        raise ParseError(f"unexpected token {parser.peek()!r}")
    return ExpressionTree(root, text)


def _apply(op: str, a: float, b: float) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if op in ("**", "^"):
        return float(a) ** b
    if op == "%":
        return a % b
    if op == "//":
        return a // b
    raise ValueError(f"unknown operator {op!r}")


def eval_node(node: Node) -> float:
    if isinstance(node, Num):
        return float(node.value)
    return _apply(node.op, eval_node(node.left), eval_node(node.right))


def eval_expression(tree: ExpressionTree) -> float:
    """Floating-point value; raises ``ZeroDivisionError`` on division by zero."""
    return eval_node(tree.root)


def to_text(node: Node, top: bool = True) -> str:
    """Fully parenthesized text (outermost pair omitted)."""
    if isinstance(node, Num):
        return str(node.value)
    inner = f"{to_text(node.left, False)}{node.op}{to_text(node.right, False)}"
    return inner if top else f"({inner})"
