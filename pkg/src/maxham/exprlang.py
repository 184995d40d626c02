"""Closed-form coefficient expressions in the coordinates x1, x2, x3.

Metric, permittivity, and permeability components are written as small
arithmetic formulas ("2 - (x1^2 + x2^2)", "sin(x2)/x1", ...).  This module
parses them into an immutable AST and evaluates them at points or on whole
lattices.  Evaluation is reentrant: expressions carry no state, so one Expr
may be evaluated concurrently from many workers.

Grammar (EBNF, also reproduced in the README):

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;
    unary  = "-" unary | power ;
    power  = atom [ "^" unary ] ;          (* right associative *)
    atom   = NUMBER | "pi" | "x1" | "x2" | "x3"
           | FUNC "(" expr ")" | "(" expr ")" ;
    FUNC   = "sin" | "cos" | "exp" | "sqrt" | "abs" ;

"^" binds tightest, unary minus binds tighter than "*" and "/", which bind
tighter than "+" and "-".  Division by zero, sqrt of a negative number and
overflow are evaluation-time domain errors, not parse errors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("x1", "x2", "x3")
FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs")
CONSTANTS = {"pi": math.pi}


class ExprError(Exception):
    """Base class for expression-language failures."""


class ParseError(ExprError):
    def __init__(self, message, offset, expected=None):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)


class UnknownIdentifierError(ParseError):
    def __init__(self, name, offset):
        self.name = name
        ParseError.__init__(self, f"unknown identifier '{name}'", offset)


class DomainError(ExprError):
    """Evaluation left the expression's domain (x/0, sqrt(-1), overflow).

    Carries the offending sub-expression and, for lattice evaluation, the
    grid index of the first bad node.
    """

    def __init__(self, message, subexpr, grid_index=None):
        self.subexpr = subexpr
        self.grid_index = grid_index
        detail = f"{message} in sub-expression '{pretty(subexpr)}'"
        if grid_index is not None:
            detail += f" at grid node {tuple(int(i) for i in grid_index)}"
        super().__init__(detail)


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0, 1, 2 for x1, x2, x3


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Num | Var | Const | Neg | BinOp | Call


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # only whitespace may remain
            rest = source[pos:]
            if rest.strip() == "":
                break
            bad = pos + len(rest) - len(rest.lstrip())
            raise ParseError(f"unexpected character {source[bad]!r}", bad)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text, offset = self.peek()
        if kind == "op" and text == op:
            return self.advance()
        raise ParseError(f"got {text!r}" if text else "got end of input",
                         offset, expected=repr(op))

    def parse(self):
        node = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {text!r}", offset,
                             expected="operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.unary())
            else:
                return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return BinOp("^", base, self.unary())  # right associative
        return base

    def atom(self):
        kind, text, offset = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            nk, ntext, _ = self.peek()
            if nk == "op" and ntext == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(text, offset)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            if text in VARIABLES:
                return Var(VARIABLES.index(text))
            if text in CONSTANTS:
                return Const(text)
            raise UnknownIdentifierError(text, offset)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"got {text!r}" if text else "got end of input",
                         offset, expected="a number, name, '(' or '-'")


def parse(source: str) -> Expr:
    """Parse a coefficient expression, or raise ParseError with the offset."""
    return _Parser(source).parse()


# --- evaluation ------------------------------------------------------------

def _raise_domain(message, node, bad_mask):
    idx = None
    if np.ndim(bad_mask) > 0:
        flat = int(np.argmax(np.asarray(bad_mask)))
        idx = np.unravel_index(flat, np.shape(bad_mask))
    raise DomainError(message, node, grid_index=idx)


def _ev(node, x1, x2, x3):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return (x1, x2, x3)[node.index]
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_ev(node.operand, x1, x2, x3)
    if isinstance(node, Call):
        arg = _ev(node.arg, x1, x2, x3)
        if node.func == "sqrt":
            bad = np.less(arg, 0.0)
            if np.any(bad):
                _raise_domain("sqrt of negative value", node, bad)
            return np.sqrt(arg)
        fn = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[node.func]
        with np.errstate(over="ignore"):
            out = fn(arg)
        bad = ~np.isfinite(out)
        if np.any(bad):
            _raise_domain("non-finite result", node, bad)
        return out
    # BinOp
    lhs = _ev(node.left, x1, x2, x3)
    rhs = _ev(node.right, x1, x2, x3)
    if node.op == "/":
        bad = np.equal(rhs, 0.0)
        if np.any(bad):
            _raise_domain("division by zero", node, bad)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if node.op == "+":
            out = np.add(lhs, rhs)
        elif node.op == "-":
            out = np.subtract(lhs, rhs)
        elif node.op == "*":
            out = np.multiply(lhs, rhs)
        elif node.op == "/":
            out = np.divide(lhs, rhs)
        else:
            out = np.power(lhs, rhs)
    bad = ~np.isfinite(out)
    if np.any(bad):
        _raise_domain("non-finite result", node, bad)
    return out


def evaluate(e: Expr, point) -> float:
    """Value of the expression at a 3-point, round-to-nearest arithmetic."""
    x1, x2, x3 = (float(v) for v in point)
    if not all(math.isfinite(v) for v in (x1, x2, x3)):
        raise ValueError("evaluation point must have finite coordinates")
    return float(_ev(e, x1, x2, x3))


def evaluate_on_grid(e: Expr, x1, x2, x3) -> np.ndarray:
    """Vectorized evaluation on coordinate lattices of a common shape."""
    out = _ev(e, np.asarray(x1, float), np.asarray(x2, float), np.asarray(x3, float))
    return np.broadcast_to(np.asarray(out, float), np.shape(x1)).copy()


# --- printing --------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 5


def pretty(node: Expr) -> str:
    """Render an AST back to source.  parse(pretty(e)) == e structurally."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return VARIABLES[node.index]
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    if isinstance(node, Neg):
        inner = pretty(node.operand)
        if _prec(node.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left = pretty(node.left)
    right = pretty(node.right)
    if node.op == "^":
        # left operand of ^ must be atomic; right may be unary/power
        if _prec(node.left) < 5:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    return f"{left} {node.op} {right}"
