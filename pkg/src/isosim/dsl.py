"""Small arithmetic language for potentials and fields.

Grammar (highest precedence last)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so
``-x1^2`` is ``-(x1^2)`` and ``2^3^2`` is ``2^(3^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import EvaluationError, LexError, ParseError

FUNCTIONS = {
    "sin": (1, math.sin),
    "cos": (1, math.cos),
    "exp": (1, math.exp),
    "sqrt": (1, math.sqrt),
    "abs": (1, abs),
    "tanh": (1, math.tanh),
    "min": (2, min),
    "max": (2, max),
}
IMPLICIT_CONSTANTS = {"pi": math.pi, "e": math.e}

WIRE_VARIABLE = re.compile(r"x\d+\Z")
TIME_VARIABLE = "t"


# --------------------------------------------------------------------- tokens

@dataclass(frozen=True)
class Token:
    kind: str  # number | identifier | operator | lparen | rparen | comma | end
    text: str
    position: int  # byte offset into the UTF-8 source


_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_SINGLE = {"+": "operator", "-": "operator", "*": "operator", "/": "operator",
           "^": "operator", "(": "lparen", ")": "rparen", ",": "comma"}


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens, always ending with an ``end`` token."""
    tokens: list[Token] = []
    i = 0
    byte = 0  # running byte offset of source[i]
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            byte += len(ch.encode("utf-8"))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            text = m.group(0)
            end = m.end()
            if end < n and (source[end].isalnum() or source[end] in "._"):
                raise LexError(f"malformed number {source[i:end + 1]!r}", byte)
            if not math.isfinite(float(text)):
                raise LexError(f"number {text!r} is not finite", byte)
            tokens.append(Token("number", text, byte))
        elif ch.isalpha() or ch == "_":
            m = _IDENT.match(source, i)
            if m is None:
                raise LexError(f"unknown character {ch!r}", byte)
            text = m.group(0)
            tokens.append(Token("identifier", text, byte))
        elif ch in _SINGLE:
            text = ch
            tokens.append(Token(_SINGLE[ch], ch, byte))
        else:
            raise LexError(f"unknown character {ch!r}", byte)
        byte += len(text.encode("utf-8"))
        i += len(text)
    tokens.append(Token("end", "", byte))
    return tokens


# ------------------------------------------------------------------------ AST

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Const, Var, Neg, BinOp, Call]


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {what}, found {_describe(tok)}", tok.position)
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {_describe(tok)}", tok.position)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "operator" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "operator" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "operator" and tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "operator" and self.peek().text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "lparen":
            self.advance()
            node = self.expr()
            self.expect("rparen", "')'")
            return node
        if tok.kind == "identifier":
            self.advance()
            if self.peek().kind != "lparen":
                return Var(tok.text)
            if tok.text not in FUNCTIONS:
                raise ParseError(f"unknown function {tok.text!r}", tok.position)
            self.advance()
            args = [self.expr()]
            while self.peek().kind == "comma":
                self.advance()
                args.append(self.expr())
            self.expect("rparen", "')'")
            arity = FUNCTIONS[tok.text][0]
            if len(args) != arity:
                raise ParseError(
                    f"{tok.text} takes {arity} argument(s), got {len(args)}", tok.position
                )
            return Call(tok.text, tuple(args))
        raise ParseError(f"unexpected {_describe(tok)}", tok.position)


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "end" else repr(tok.text)


def parse(source: str) -> Expr:
    """Parse ``source`` into an immutable expression tree."""
    return _Parser(source).parse()


# ----------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _NEG_PREC
    if isinstance(e, Const) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return _NEG_PREC
    return _ATOM_PREC


def _wrap(e: Expr, needs: bool) -> str:
    s = to_source(e)
    return f"({s})" if needs else s


def to_source(e: Expr) -> str:
    """Print ``e`` with minimal parentheses; ``parse(to_source(e)) == e``
    for trees whose constants are non-negative (as produced by ``parse``)."""
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.child, _prec(e.child) < _NEG_PREC)
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_source(a) for a in e.args)})"
    p = _PREC[e.op]
    if e.op == "^":
        left = _wrap(e.left, _prec(e.left) <= p)
        right = _wrap(e.right, _prec(e.right) < _NEG_PREC)
        return f"{left}^{right}"
    left = _wrap(e.left, _prec(e.left) < p)
    right = _wrap(e.right, _prec(e.right) <= p)
    return f"{left} {e.op} {right}"


# --------------------------------------------------------------- evaluation

def _check(value: float, node: Expr) -> float:
    if isinstance(value, complex) or not math.isfinite(value):
        raise EvaluationError("non-finite result", to_source(node))
    return value


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` with real arithmetic.

    ``pi`` and ``e`` resolve to their usual values unless rebound. Any
    non-finite intermediate raises :class:`EvaluationError` naming the
    sub-expression where it appeared.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        if e.name in bindings:
            return float(bindings[e.name])
        if e.name in IMPLICIT_CONSTANTS:
            return IMPLICIT_CONSTANTS[e.name]
        raise EvaluationError(f"unbound variable {e.name!r}", e.name)
    if isinstance(e, Neg):
        return -evaluate(e.child, bindings)
    if isinstance(e, Call):
        args = [evaluate(a, bindings) for a in e.args]
        try:
            value = FUNCTIONS[e.func][1](*args)
        except (ValueError, OverflowError) as exc:
            raise EvaluationError(str(exc), to_source(e)) from None
        return _check(float(value), e)
    a = evaluate(e.left, bindings)
    b = evaluate(e.right, bindings)
    try:
        if e.op == "+":
            value = a + b
        elif e.op == "-":
            value = a - b
        elif e.op == "*":
            value = a * b
        elif e.op == "/":
            value = a / b
        else:
            value = math.pow(a, b)
    except ZeroDivisionError:
        raise EvaluationError("division by zero", to_source(e)) from None
    except (ValueError, OverflowError) as exc:
        raise EvaluationError(str(exc), to_source(e)) from None
    return _check(value, e)


def free_variables(e: Expr) -> frozenset[str]:
    """Variable names in ``e``, excluding the implicit constants."""
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Var):
        return frozenset() if e.name in IMPLICIT_CONSTANTS else frozenset({e.name})
    if isinstance(e, Neg):
        return free_variables(e.child)
    if isinstance(e, Call):
        return frozenset().union(*(free_variables(a) for a in e.args))
    return free_variables(e.left) | free_variables(e.right)
