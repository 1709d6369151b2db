"""Recursive-descent parser for the textual STL formula language.

Grammar (lowest precedence first)::

    formula  := disj ('U' interval formula)?
    disj     := conj ('|' conj)*
    conj     := unary ('&' unary)*
    unary    := '!' unary | ('G' | 'F') interval formula | '(' formula ')' | atom
    interval := '[' num ',' num ']' | '[' num ',' 'inf' ')'
    atom     := linexpr ('>' | '<') linexpr

Prefix temporal operators extend as far to the right as possible, so
``G[0,1] p & q`` is ``G[0,1] (p & q)``.  ``U`` is right-associative.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .formula import (
    INF,
    And,
    Eventually,
    Formula,
    FormulaError,
    Globally,
    Interval,
    Not,
    Or,
    Predicate,
    Until,
)


class STLSyntaxError(FormulaError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<inf>inf\b)
  | (?P<temporal>[GFU])(?=\s*\[)
  | (?P<ident>[xuw]\d+\b)
  | (?P<op>>=|<=|==|[!&|()\[\],><*+\-])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise STLSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "ws":
            newlines = chunk.count("\n")
            if newlines:
                line += newlines
                line_start = pos + chunk.rfind("\n") + 1
        else:
            toks.append(_Tok(kind, chunk, line, col))
        pos = m.end()
    col = pos - line_start + 1
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: _Tok | None = None) -> STLSyntaxError:
        tok = tok or self.tok
        return STLSyntaxError(message, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        if not (self.tok.kind == "op" and self.tok.text == text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def parse(self) -> Formula:
        phi = self.formula()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return phi

    def formula(self) -> Formula:
        left = self.disj()
        if self.tok.kind == "temporal" and self.tok.text == "U":
            self.i += 1
            interval = self.interval()
            right = self.formula()
            return Until(interval, left, right)
        return left

    def disj(self) -> Formula:
        args = [self.conj()]
        while self.accept("|"):
            args.append(self.conj())
        return args[0] if len(args) == 1 else Or(args)

    def conj(self) -> Formula:
        args = [self.unary()]
        while self.accept("&"):
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(args)

    def unary(self) -> Formula:
        tok = self.tok
        if self.accept("!"):
            return Not(self.unary())
        if tok.kind == "temporal":
            if tok.text == "U":
                raise self.error("'U' needs a left operand")
            self.i += 1
            interval = self.interval()
            arg = self.formula()
            return Globally(interval, arg) if tok.text == "G" else Eventually(interval, arg)
        if self.accept("("):
            phi = self.formula()
            self.expect(")")
            return phi
        return self.atom()

    def number(self) -> float:
        sign = 1.0
        while self.tok.kind == "op" and self.tok.text in "+-":
            if self.tok.text == "-":
                sign = -sign
            self.i += 1
        if self.tok.kind != "num":
            raise self.error(f"expected a number, found {self.tok.text or 'end of input'!r}")
        value = float(self.tok.text)
        self.i += 1
        return sign * value

    def interval(self) -> Interval:
        start = self.expect("[")
        lo = self.number()
        self.expect(",")
        if self.tok.kind == "inf":
            self.i += 1
            if not (self.accept(")") or self.accept("]")):
                raise self.error("expected ')' after inf")
            hi = INF
        else:
            hi = self.number()
            self.expect("]")
        try:
            return Interval(lo, hi)
        except FormulaError as exc:
            raise self.error(str(exc), start) from None

    def atom(self) -> Formula:
        start = self.tok
        lhs = self.linexpr()
        tok = self.tok
        if tok.kind == "op" and tok.text in (">=", "<=", "=="):
            raise self.error(f"only strict comparisons are supported, found {tok.text!r}")
        if self.accept(">"):
            sign = 1.0
        elif self.accept("<"):
            sign = -1.0
        else:
            raise self.error(f"expected '>' or '<', found {tok.text or 'end of input'!r}")
        rhs = self.linexpr()
        coeffs: dict[str, float] = {}
        for name, c in lhs[0].items():
            coeffs[name] = coeffs.get(name, 0.0) + c
        for name, c in rhs[0].items():
            coeffs[name] = coeffs.get(name, 0.0) - c
        offset = lhs[1] - rhs[1]
        vecs: dict[str, list[float]] = {"x": [], "u": [], "w": []}
        for name, c in coeffs.items():
            kind, idx = name[0], int(name[1:])
            if idx < 1:
                raise self.error(f"identifiers are 1-based, found {name!r}", start)
            vec = vecs[kind]
            vec.extend([0.0] * (idx - len(vec)))
            vec[idx - 1] += sign * c
        return Predicate(vecs["x"], vecs["u"], vecs["w"], sign * offset)

    def linexpr(self) -> tuple[dict[str, float], float]:
        coeffs: dict[str, float] = {}
        const = 0.0
        while True:
            sign = 1.0
            while self.tok.kind == "op" and self.tok.text in "+-":
                if self.tok.text == "-":
                    sign = -sign
                self.i += 1
            name, value = self.term()
            if name is None:
                const += sign * value
            else:
                coeffs[name] = coeffs.get(name, 0.0) + sign * value
            if not (self.tok.kind == "op" and self.tok.text in "+-"):
                return coeffs, const

    def term(self) -> tuple[str | None, float]:
        value = 1.0
        name = None
        while True:
            tok = self.tok
            if tok.kind == "num":
                value *= float(tok.text)
            elif tok.kind == "ident":
                if name is not None:
                    raise self.error(f"non-linear term {name}*{tok.text}", tok)
                name = tok.text
            else:
                raise self.error(f"expected a number or identifier, found {tok.text or 'end of input'!r}")
            self.i += 1
            if not self.accept("*"):
                return name, value


def parse(text: str) -> Formula:
    """Parse concrete STL syntax into a :mod:`stlmpc.formula` tree."""
    return _Parser(text).parse()
