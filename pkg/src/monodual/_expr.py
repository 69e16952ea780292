"""A small arithmetic expression grammar, compiled to vectorized functions.

Model files carry coefficient formulas as strings.  Python's own syntax is
unsuitable (``^`` means xor, ``eval`` is unsafe), so this module parses a
deliberately tiny language:

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          right-associative
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names resolve to declared variables, the constants ``pi`` and ``e``, or the
functions ``exp``, ``tanh``, ``abs``.  Everything compiles down to numpy
operations, so compiled expressions accept and return arrays.
"""

from __future__ import annotations

import re
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .errors import InputFormatError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

_FUNCTIONS: Dict[str, Callable] = {
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
}

_CONSTANTS: Dict[str, float] = {
    "pi": float(np.pi),
    "e": float(np.e),
}


def _tokenize(src: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            tail = src[pos:].lstrip()
            if not tail:
                break
            raise InputFormatError(
                f"cannot read expression at position {pos}: {tail[:12]!r}"
            )
        pos = m.end()
        for kind in ("num", "name", "op"):
            text = m.group(kind)
            if text is not None:
                tokens.append((kind, text, m.start(kind)))
                break
    return tokens


class _Parser:
    def __init__(self, src: str, variables: Sequence[str]):
        self.src = src
        self.variables = tuple(variables)
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise InputFormatError(f"unexpected end of expression: {self.src!r}")
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        tok = self.take()
        if tok[0] != "op" or tok[1] != op:
            raise InputFormatError(
                f"expected {op!r} at position {tok[2]} in {self.src!r}"
            )

    def parse(self) -> Callable:
        fn = self.expr()
        if self.peek() is not None:
            tok = self.peek()
            raise InputFormatError(
                f"trailing input at position {tok[2]} in {self.src!r}"
            )
        return fn

    def expr(self) -> Callable:
        left = self.term()
        while True:
            tok = self.peek()
            if tok and tok[0] == "op" and tok[1] in "+-":
                self.take()
                right = self.term()
                if tok[1] == "+":
                    left = (lambda a, b: lambda v: a(v) + b(v))(left, right)
                else:
                    left = (lambda a, b: lambda v: a(v) - b(v))(left, right)
            else:
                return left

    def term(self) -> Callable:
        left = self.unary()
        while True:
            tok = self.peek()
            if tok and tok[0] == "op" and tok[1] in "*/":
                self.take()
                right = self.unary()
                if tok[1] == "*":
                    left = (lambda a, b: lambda v: a(v) * b(v))(left, right)
                else:
                    left = (lambda a, b: lambda v: a(v) / b(v))(left, right)
            else:
                return left

    def unary(self) -> Callable:
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self.take()
            inner = self.unary()
            return lambda v: -inner(v)
        return self.power()

    def power(self) -> Callable:
        base = self.atom()
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self.take()
            exponent = self.unary()
            return lambda v: np.power(base(v), exponent(v))
        return base

    def atom(self) -> Callable:
        tok = self.take()
        kind, text, at = tok
        if kind == "num":
            value = float(text)
            return lambda v: value
        if kind == "name":
            nxt = self.peek()
            if nxt and nxt[0] == "op" and nxt[1] == "(":
                if text not in _FUNCTIONS:
                    raise InputFormatError(
                        f"unknown function {text!r} at position {at}; "
                        f"available: {sorted(_FUNCTIONS)}"
                    )
                func = _FUNCTIONS[text]
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return lambda v: func(arg(v))
            if text in self.variables:
                idx = self.variables.index(text)
                return lambda v: v[idx]
            if text in _CONSTANTS:
                value = _CONSTANTS[text]
                return lambda v: value
            raise InputFormatError(
                f"unknown name {text!r} at position {at}; "
                f"variables here: {list(self.variables)}, "
                f"constants: {sorted(_CONSTANTS)}"
            )
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise InputFormatError(f"unexpected {text!r} at position {at} in {self.src!r}")


class Expression:
    """A compiled expression; call with one positional argument per variable."""

    def __init__(self, source: str, variables: Sequence[str]):
        self.source = source
        self.variables = tuple(variables)
        self._fn = _Parser(source, variables).parse()

    def __call__(self, *args):
        if len(args) != len(self.variables):
            raise TypeError(
                f"expression {self.source!r} takes {len(self.variables)} "
                f"argument(s) ({', '.join(self.variables)}), got {len(args)}"
            )
        return self._fn(args)

    def __repr__(self):
        return f"Expression({self.source!r}, variables={self.variables})"


def parse_expression(source: str, variables: Sequence[str] = ("x",)) -> Expression:
    """Compile ``source`` to a function of the named variables."""
    if not isinstance(source, str):
        raise InputFormatError(f"expected an expression string, got {source!r}")
    return Expression(source, variables)
