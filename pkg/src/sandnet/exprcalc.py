"""Parser and evaluator for one-variable formulas used in ``.net`` files.

Formulas are written in the edge parameter ``t`` (normalized to ``[0, 1]``)::

    1-2*t
    2*chi(abs(t-0.25)<=0.125)
    0.2+0.1*sin(3*t)^2

Grammar, loosest to tightest binding::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | 't' | 'pi' | NAME '(' args ')' | '(' expr ')'

``chi(a <op> b [<op> c ...])`` is the indicator of a comparison chain; the
comparison operators ``< <= > >=`` are only accepted inside ``chi``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Chi",
    "ExprSyntaxError",
    "ExprEvalError",
    "parse",
    "evaluate",
    "to_string",
    "FUNCTIONS",
    "walk",
]


class ExprSyntaxError(ValueError):
    """Raised on malformed formula text."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = tuple(expected)
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected one of: {', '.join(expected)})"
        super().__init__(detail)


class ExprEvalError(ArithmeticError):
    """Raised when a formula has no finite value at some ``t``."""

    def __init__(self, message: str, t: float):
        self.t = t
        super().__init__(f"{message} at t={t!r}")


# ---------------------------------------------------------------------------
# AST


class Expr:
    """Base class of formula nodes. Instances are immutable and callable."""

    __slots__ = ()

    def __call__(self, t):
        return evaluate(self, t)

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str = "t"


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Call(Expr):
    name: str
    args: tuple[Expr, ...]


@dataclass(frozen=True, eq=True)
class Chi(Expr):
    """Indicator of ``operands[0] ops[0] operands[1] ops[1] ...``."""

    operands: tuple[Expr, ...]
    ops: tuple[str, ...]


FUNCTIONS: dict[str, tuple[int, int | None]] = {
    # name -> (min arity, max arity); None = unbounded
    "sin": (1, 1),
    "cos": (1, 1),
    "tan": (1, 1),
    "exp": (1, 1),
    "log": (1, 1),
    "sqrt": (1, 1),
    "abs": (1, 1),
    "min": (2, None),
    "max": (2, None),
}

CONSTANTS = {"pi": math.pi}

# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<cmp><=|>=|<|>)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, name, cmp, op, end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.chi_depth = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind == "end":
            raise ExprSyntaxError(
                f"unexpected {self._describe(self.tok)}", self.tok.offset, (repr(text),)
            )
        return self.advance()

    @staticmethod
    def _describe(tok: _Token) -> str:
        return "end of input" if tok.kind == "end" else f"token {tok.text!r}"

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            expected = ("'+'", "'-'", "'*'", "'/'", "'^'", "end of input")
            if self.tok.kind == "cmp":
                raise ExprSyntaxError(
                    "comparison outside chi(...)", self.tok.offset, expected
                )
            raise ExprSyntaxError(
                f"unexpected {self._describe(self.tok)}", self.tok.offset, expected
            )
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text == "t":
                return Var("t")
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            if tok.text == "chi":
                return self.chi(tok)
            if tok.text in FUNCTIONS:
                return self.call(tok)
            raise ExprSyntaxError(
                f"unknown name {tok.text!r}",
                tok.offset,
                ("'t'", "'pi'", "function name"),
            )
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(
            f"unexpected {self._describe(tok)}",
            tok.offset,
            ("number", "'t'", "function call", "'('", "'-'"),
        )

    def call(self, name_tok: _Token) -> Expr:
        self.expect("(")
        args = [self.expr()]
        while self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        lo, hi = FUNCTIONS[name_tok.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ExprSyntaxError(
                f"{name_tok.text}() takes {lo if hi == lo else f'at least {lo}'} "
                f"argument(s), got {len(args)}",
                name_tok.offset,
            )
        return Call(name_tok.text, tuple(args))

    def chi(self, name_tok: _Token) -> Expr:
        self.expect("(")
        operands = [self.expr()]
        ops = []
        while self.tok.kind == "cmp":
            ops.append(self.advance().text)
            operands.append(self.expr())
        if not ops:
            raise ExprSyntaxError(
                "chi() needs a comparison", self.tok.offset, ("'<'", "'<='", "'>'", "'>='")
            )
        self.expect(")")
        return Chi(tuple(operands), tuple(ops))


def walk(node: Expr):
    """Yield ``node`` and all its descendants, depth first."""
    yield node
    if isinstance(node, Neg):
        yield from walk(node.operand)
    elif isinstance(node, BinOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Call):
        for a in node.args:
            yield from walk(a)
    elif isinstance(node, Chi):
        for a in node.operands:
            yield from walk(a)


def parse(text: str) -> Expr:
    """Parse formula text into an expression tree."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Printing

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL}.get(
            node.op, _PREC_POW
        )
    if isinstance(node, Neg):
        return _PREC_UNARY
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1, node.value) < 0):
        return _PREC_UNARY
    return _PREC_ATOM


def _wrap(node: Expr, min_prec: int) -> str:
    s = to_string(node)
    return f"({s})" if _prec(node) < min_prec else s


def to_string(node: Expr) -> str:
    """Canonical text form without whitespace; ``parse`` reads it back exactly."""
    if isinstance(node, Num):
        if node.value == math.pi:
            return "pi"
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _PREC_UNARY)
    if isinstance(node, BinOp):
        if node.op in "+-":
            return _wrap(node.left, _PREC_ADD) + node.op + _wrap(node.right, _PREC_MUL)
        if node.op in "*/":
            return _wrap(node.left, _PREC_MUL) + node.op + _wrap(node.right, _PREC_UNARY)
        return _wrap(node.left, _PREC_ATOM) + "^" + _wrap(node.right, _PREC_UNARY)
    if isinstance(node, Call):
        return f"{node.name}({','.join(to_string(a) for a in node.args)})"
    if isinstance(node, Chi):
        parts = [to_string(node.operands[0])]
        for op, rhs in zip(node.ops, node.operands[1:]):
            parts.append(op)
            parts.append(to_string(rhs))
        return f"chi({''.join(parts)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Evaluation

_UNARY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_CMP = {"<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal}


def _eval(node: Expr, t: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full_like(t, node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -_eval(node.operand, t)
    if isinstance(node, BinOp):
        a = _eval(node.left, t)
        b = _eval(node.right, t)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            # x/0 must fail even for x == 0
            return np.where(b == 0.0, np.nan, a / np.where(b == 0.0, 1.0, b))
        return np.power(a, b)
    if isinstance(node, Call):
        if node.name in _UNARY_FUNCS:
            x = _eval(node.args[0], t)
            if node.name == "log":
                x = np.where(x > 0.0, x, np.nan)
            return _UNARY_FUNCS[node.name](x)
        vals = [_eval(a, t) for a in node.args]
        reducer = np.minimum if node.name == "min" else np.maximum
        out = vals[0]
        for v in vals[1:]:
            out = reducer(out, v)
        return out
    if isinstance(node, Chi):
        vals = [_eval(a, t) for a in node.operands]
        mask = np.ones(t.shape, dtype=bool)
        for op, lhs, rhs in zip(node.ops, vals, vals[1:]):
            mask &= _CMP[op](lhs, rhs)
        bad = ~np.isfinite(vals[0])
        for v in vals[1:]:
            bad |= ~np.isfinite(v)
        return np.where(bad, np.nan, mask.astype(float))
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Expr, t) -> Union[float, np.ndarray]:
    """Evaluate at a scalar or array of parameter values.

    Raises ExprEvalError (carrying the first offending ``t``) when the result
    is not finite: division by zero, log of a non-positive number, overflow...
    """
    scalar = np.ndim(t) == 0
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    with np.errstate(all="ignore"):
        out = np.broadcast_to(_eval(node, arr), arr.shape).astype(float)
    finite = np.isfinite(out)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise ExprEvalError(f"non-finite value of {to_string(node)}", float(arr[bad]))
    return float(out[0]) if scalar else out
