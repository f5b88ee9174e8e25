"""Tiny expression language for densities and form components.

Grammar (``^`` binds tighter than unary minus, and is right-associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | name | name '(' expr ')' | '(' expr ')'

Names are the coordinates ``x, y, z``, the constant ``pi`` and the
functions ``exp, sin, cos, sqrt, abs``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import CornerMoserError, PositivityError

VARIABLES = {"x": 0, "y": 1, "z": 2}
CONSTANTS = {"pi": np.pi}
FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt, "abs": np.abs}


class ExprSyntaxError(CornerMoserError, ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExprSyntaxError):
    pass


class EvaluationError(CornerMoserError, ValueError):
    def __init__(self, msg: str, point=None):
        super().__init__(msg if point is None else f"{msg} at {tuple(point)}")
        self.point = point


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str

    @property
    def index(self) -> int:
        return VARIABLES[self.name]


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    pos = 0
    out = []
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _TOKEN.match(src, pos)
        if not m:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, off = self.take()
        if val != text:
            raise ExprSyntaxError(f"expected {text!r}", off)

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in VARIABLES:
                return Var(val)
            if val in CONSTANTS:
                return Const(val)
            raise UnknownIdentifier(f"unknown identifier {val!r}", off)
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"unexpected {val!r}", off)


def parse(src: str):
    """Parse ``src`` into an expression tree."""
    p = _Parser(src)
    node = p.expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected {val!r}", off)
    return node


def to_source(e) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def dimension(e) -> int:
    """Smallest ``m`` for which every variable of ``e`` is a coordinate."""
    if isinstance(e, Var):
        return e.index + 1
    if isinstance(e, Neg):
        return dimension(e.operand)
    if isinstance(e, BinOp):
        return max(dimension(e.left), dimension(e.right))
    if isinstance(e, Call):
        return dimension(e.arg)
    return 0


def _eval(e, coords):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return coords[e.index]
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Neg):
        return -_eval(e.operand, coords)
    if isinstance(e, Call):
        return FUNCTIONS[e.func](_eval(e.arg, coords))
    a, b = _eval(e.left, coords), _eval(e.right, coords)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return np.divide(a, b)
    return np.power(a, b)


def evaluate(e, *coords):
    """Evaluate at scalar or array coordinates ``x, y, z``.

    Any non-finite value raises :class:`EvaluationError` naming the first
    offending point.
    """
    m = dimension(e)
    if len(coords) < m:
        raise EvaluationError(f"expression uses {m} coordinates, {len(coords)} given")
    coords = [np.asarray(c, dtype=float) for c in coords]
    with np.errstate(all="ignore"):
        out = np.asarray(_eval(e, coords), dtype=float)
    if coords:
        out = np.broadcast_to(out, np.broadcast_shapes(*(c.shape for c in coords), out.shape))
    bad = ~np.isfinite(out)
    if bad.any():
        k = np.unravel_index(int(np.flatnonzero(bad)[0]), out.shape) if out.ndim else ()
        point = [float(np.broadcast_to(c, out.shape)[k]) for c in coords]
        raise EvaluationError("non-finite value", point)
    return float(out) if out.ndim == 0 else np.array(out)


def eval(e, point):  # noqa: A001 - mirrors the operation name
    """Evaluate at a single point given as a sequence of coordinates."""
    if isinstance(e, str):
        e = parse(e)
    return float(evaluate(e, *point))


def sample(e, grid) -> np.ndarray:
    """Node values of ``e`` on ``grid``."""
    if isinstance(e, str):
        e = parse(e)
    if dimension(e) > grid.m:
        raise EvaluationError(f"expression needs {dimension(e)} coordinates on an m={grid.m} grid")
    return np.broadcast_to(evaluate(e, *grid.coords()), grid.shape).copy()


def sample_positive(e, grid) -> np.ndarray:
    """Like :func:`sample`, but every node value must be positive."""
    vals = sample(e, grid)
    bad = np.flatnonzero(~(vals > 0))
    if bad.size:
        k = int(bad[0])
        raise PositivityError(
            f"density is {vals.flat[k]:.6g} at node {k} {tuple(grid.points()[k])}", node=k
        )
    return vals
