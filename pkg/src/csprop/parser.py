"""Hamiltonian expression parser.

Grammar:
    expr   := term (('+'|'-') term)*
    term   := factor ('*' factor)*
    factor := number | token ('^' uint)?
    token  := 'q' | 'p' | 'a' | 'ad'
    number := decimal, optional 'i' suffix for a pure-imaginary value

Whitespace is insignificant.  'q' and 'p' are substituted by
q = b (a + ad)/sqrt(2) and p = -i c (a - ad)/sqrt(2) and the whole
expression is Wick-reduced to normal order.  Factors within a term
multiply in written order (operators do not commute).
"""

from __future__ import annotations

import math
import re

from .symbols import DEFAULT_MAX_DEGREE, OperatorPoly, ScaleParams

__all__ = ["parse_hamiltonian", "ExpressionError"]


class ExpressionError(ValueError):
    """Syntax error in a Hamiltonian expression; carries the offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?i?)"
    r"|(?P<name>ad|a|q|p)"
    r"|(?P<op>[-+*^()])"
    r")"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = pos + (len(text[pos:]) - len(stripped))
            raise ExpressionError(f"unexpected character {stripped[0]!r}", bad_at)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, scales: ScaleParams, max_degree: int):
        self.tokens = _tokenize(text)
        self.idx = 0
        self.scales = scales
        self.max_degree = max_degree
        root2 = math.sqrt(2.0)
        self.atoms = {
            "a": OperatorPoly({(0, 1): 1.0}, scales, max_degree),
            "ad": OperatorPoly({(1, 0): 1.0}, scales, max_degree),
            "q": OperatorPoly(
                {(0, 1): scales.b / root2, (1, 0): scales.b / root2},
                scales,
                max_degree,
            ),
            "p": OperatorPoly(
                {(0, 1): -1j * scales.c / root2, (1, 0): 1j * scales.c / root2},
                scales,
                max_degree,
            ),
        }

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expr(self) -> OperatorPoly:
        sign = 1.0
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.advance()
            sign = -1.0 if val == "-" else 1.0
        total = self.term().scaled(sign)
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                nxt = self.term()
                total = total + (nxt if val == "+" else nxt.scaled(-1.0))
            else:
                return total

    def term(self) -> OperatorPoly:
        product = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.advance()
                product = product * self.factor()
            else:
                return product

    def factor(self) -> OperatorPoly:
        kind, val, pos = self.advance()
        if kind == "number":
            if val.endswith("i"):
                coeff = 1j * float(val[:-1])
            else:
                coeff = complex(float(val))
            return OperatorPoly({(0, 0): coeff}, self.scales, self.max_degree)
        if kind == "name":
            base = self.atoms[val]
            kind2, val2, _ = self.peek()
            if kind2 == "op" and val2 == "^":
                self.advance()
                kind3, val3, pos3 = self.advance()
                if kind3 != "number" or not val3.isdigit():
                    raise ExpressionError("exponent must be a nonnegative integer", pos3)
                return base.power(int(val3))
            return base
        raise ExpressionError(f"expected number or operator token, got {val!r}", pos)


def parse_hamiltonian(
    text: str,
    scales: ScaleParams | None = None,
    max_degree: int = DEFAULT_MAX_DEGREE,
) -> OperatorPoly:
    """Parse an expression in q, p, a, ad into a normal-ordered OperatorPoly."""
    if scales is None:
        scales = ScaleParams()
    if not text or not text.strip():
        raise ExpressionError("empty expression", 0)
    parser = _Parser(text, scales, max_degree)
    result = parser.expr()
    kind, val, pos = parser.peek()
    if kind != "end":
        raise ExpressionError(f"unexpected trailing input {val!r}", pos)
    return result
