"""Satisfaction-function expressions.

Inner expressions range over network inputs ``x1, x2, ...`` and outputs
``y1, y2, ...``; outer expressions range over probabilities ``p1, p2, ...``.
Identifiers in text are 1-based; AST nodes store 0-based indices.

Grammar::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | atom
    atom    := NUMBER | IDENT | FUNC "(" expr ("," expr)* ")" | "(" expr ")"
    IDENT   := ("x" | "y" | "p") DIGITS
    FUNC    := "min" | "max" | "relu" | "sigmoid" | "tanh"

``min``/``max`` with more than two arguments fold left into binary nodes. A
minus sign directly in front of a numeric literal produces a negative constant.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Input",
    "Output",
    "Prob",
    "Neg",
    "Relu",
    "Sigmoid",
    "Tanh",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Min",
    "Max",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "UndefinedValueError",
    "parse_expr",
    "to_text",
    "eval_inner",
    "eval_outer",
    "affine_form",
    "walk",
    "min_of",
    "max_of",
]


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class UndefinedValueError(ExprError, ArithmeticError):
    """The expression evaluates to 0/0."""


class Expr:
    """Base class of all expression nodes."""

    children: Tuple["Expr", ...] = ()

    def __add__(self, other):
        return Add(self, _lift(other))

    def __radd__(self, other):
        return Add(_lift(other), self)

    def __sub__(self, other):
        return Sub(self, _lift(other))

    def __rsub__(self, other):
        return Sub(_lift(other), self)

    def __mul__(self, other):
        return Mul(self, _lift(other))

    def __rmul__(self, other):
        return Mul(_lift(other), self)

    def __truediv__(self, other):
        return Div(self, _lift(other))

    def __rtruediv__(self, other):
        return Div(_lift(other), self)

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_text(self)


def _lift(v) -> Expr:
    return v if isinstance(v, Expr) else Const(float(v))


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Input(Expr):
    index: int


@dataclass(frozen=True)
class Output(Expr):
    index: int


@dataclass(frozen=True)
class Prob(Expr):
    index: int


@dataclass(frozen=True)
class _Unary(Expr):
    arg: Expr

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class _Binary(Expr):
    left: Expr
    right: Expr

    @property
    def children(self):
        return (self.left, self.right)


class Neg(_Unary):
    pass


class Relu(_Unary):
    pass


class Sigmoid(_Unary):
    pass


class Tanh(_Unary):
    pass


class Add(_Binary):
    pass


class Sub(_Binary):
    pass


class Mul(_Binary):
    pass


class Div(_Binary):
    pass


class Min(_Binary):
    pass


class Max(_Binary):
    pass


_FUNCS = {"min": Min, "max": Max, "relu": Relu, "sigmoid": Sigmoid, "tanh": Tanh}
_FUNC_NAMES = {cls: name for name, cls in _FUNCS.items()}
_LEAVES = {"x": Input, "y": Output, "p": Prob}
_LEAF_PREFIX = {cls: prefix for prefix, cls in _LEAVES.items()}


def min_of(*args: Expr) -> Expr:
    out = args[0]
    for a in args[1:]:
        out = Min(out, a)
    return out


def max_of(*args: Expr) -> Expr:
    out = args[0]
    for a in args[1:]:
        out = Max(out, a)
    return out


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order traversal."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


# --- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/(),]))"
)


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos, self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            if self.peek()[0] == "num":
                return Const(-float(self.take()[1]))
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in _FUNCS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                cls = _FUNCS[val]
                if cls in (Min, Max):
                    if len(args) < 2:
                        raise ExprSyntaxError(f"{val} needs at least two arguments", pos, self.text)
                    return min_of(*args) if cls is Min else max_of(*args)
                if len(args) != 1:
                    raise ExprSyntaxError(f"{val} takes one argument", pos, self.text)
                return cls(args[0])
            m = re.fullmatch(r"([xyp])([1-9]\d*)", val)
            if m is None or m.group(1) not in self.allowed:
                raise UnknownIdentifierError(f"unknown identifier {val!r}", pos, self.text)
            return _LEAVES[m.group(1)](int(m.group(2)) - 1)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos, self.text)


def parse_expr(text: str, kind: Optional[str] = None) -> Expr:
    """Parse an expression.

    ``kind="inner"`` admits ``x``/``y`` identifiers only, ``kind="outer"``
    admits ``p`` only, ``None`` admits all three.
    """
    allowed = {"inner": "xy", "outer": "p", None: "xyp"}[kind]
    return _Parser(text, allowed).parse()


# --- printing ---------------------------------------------------------------

_BINOPS = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def to_text(expr: Expr) -> str:
    """Render ``expr`` so that ``parse_expr(to_text(e)) == e``."""
    if isinstance(expr, Const):
        return repr(float(expr.value))
    if type(expr) in _LEAF_PREFIX:
        return f"{_LEAF_PREFIX[type(expr)]}{expr.index + 1}"
    if isinstance(expr, Neg):
        inner = to_text(expr.arg)
        if _is_atomic(expr.arg):
            return f"-{inner}"
        return f"-({inner})"
    if type(expr) in _FUNC_NAMES:
        args = ", ".join(to_text(c) for c in expr.children)
        return f"{_FUNC_NAMES[type(expr)]}({args})"
    if type(expr) in _BINOPS:
        return f"({to_text(expr.left)} {_BINOPS[type(expr)]} {to_text(expr.right)})"
    raise ExprError(f"cannot print {expr!r}")


def _is_atomic(expr: Expr) -> bool:
    if isinstance(expr, Const):
        # "-0.5" would re-parse as a negative literal, not a negation
        return False
    return type(expr) in _LEAF_PREFIX or type(expr) in _FUNC_NAMES


# --- evaluation -------------------------------------------------------------


def _safe_div(num, den):
    num, den = np.broadcast_arrays(np.asarray(num, dtype=float), np.asarray(den, dtype=float))
    zero = den == 0
    if np.any(zero & (num == 0)):
        raise UndefinedValueError("0/0 in expression")
    with np.errstate(divide="ignore"):
        out = np.where(zero, np.where(num > 0, np.inf, -np.inf), num / np.where(zero, 1.0, den))
    return out


def _evaluate(expr: Expr, env: Dict[type, np.ndarray]):
    memo: Dict[int, np.ndarray] = {}

    def ev(node: Expr):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            val = np.asarray(node.value, dtype=float)
        elif type(node) in _LEAF_PREFIX:
            arr = env.get(type(node))
            if arr is None:
                raise ExprError(f"{to_text(node)} is not available in this context")
            if node.index >= arr.shape[-1]:
                raise ExprError(f"{to_text(node)} is out of range ({arr.shape[-1]} available)")
            val = arr[..., node.index]
        elif isinstance(node, Neg):
            val = -ev(node.arg)
        elif isinstance(node, Relu):
            val = np.maximum(ev(node.arg), 0.0)
        elif isinstance(node, Sigmoid):
            from .interval import _sigmoid

            val = _sigmoid(np.asarray(ev(node.arg), dtype=float))
        elif isinstance(node, Tanh):
            val = np.tanh(ev(node.arg))
        else:
            a, b = ev(node.left), ev(node.right)
            if isinstance(node, Add):
                val = a + b
            elif isinstance(node, Sub):
                val = a - b
            elif isinstance(node, Mul):
                with np.errstate(invalid="ignore"):
                    val = np.asarray(a * b)
                val = np.where(np.isnan(val), 0.0, val)
            elif isinstance(node, Div):
                val = _safe_div(a, b)
            elif isinstance(node, Min):
                val = np.minimum(a, b)
            elif isinstance(node, Max):
                val = np.maximum(a, b)
            else:
                raise ExprError(f"unsupported node {type(node).__name__}")
        memo[key] = val
        return val

    out = ev(expr)
    if np.ndim(out) == 0:
        return float(out)
    return out


def eval_inner(expr: Expr, x, y):
    """Evaluate an inner expression at input ``x`` and network output ``y``.

    Both may be single vectors or batches with a leading batch axis.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = _evaluate(expr, {Input: x, Output: y})
    if x.ndim == 2 and np.ndim(out) == 0:
        out = np.full(x.shape[0], out)
    return out


def eval_outer(expr: Expr, p) -> float:
    return _evaluate(expr, {Prob: np.asarray(p, dtype=float)})


# --- structure --------------------------------------------------------------


@dataclass(frozen=True)
class AffineForm:
    """``const + sum_j x_coef[j] * x_j + sum_k y_coef[k] * y_k``."""

    const: float
    x_coef: Dict[int, float]
    y_coef: Dict[int, float]

    def scaled(self, c: float) -> "AffineForm":
        return AffineForm(
            self.const * c,
            {k: v * c for k, v in self.x_coef.items()},
            {k: v * c for k, v in self.y_coef.items()},
        )

    def plus(self, other: "AffineForm") -> "AffineForm":
        xs = dict(self.x_coef)
        for k, v in other.x_coef.items():
            xs[k] = xs.get(k, 0.0) + v
        ys = dict(self.y_coef)
        for k, v in other.y_coef.items():
            ys[k] = ys.get(k, 0.0) + v
        return AffineForm(self.const + other.const, xs, ys)

    @property
    def is_constant(self) -> bool:
        return not self.x_coef and not self.y_coef


def affine_form(expr: Expr) -> Optional[AffineForm]:
    """Return ``expr`` as an affine function of inputs and outputs, or ``None``."""
    if isinstance(expr, Const):
        return AffineForm(float(expr.value), {}, {})
    if isinstance(expr, Input):
        return AffineForm(0.0, {expr.index: 1.0}, {})
    if isinstance(expr, Output):
        return AffineForm(0.0, {}, {expr.index: 1.0})
    if isinstance(expr, Neg):
        a = affine_form(expr.arg)
        return None if a is None else a.scaled(-1.0)
    if isinstance(expr, (Add, Sub)):
        a, b = affine_form(expr.left), affine_form(expr.right)
        if a is None or b is None:
            return None
        return a.plus(b if isinstance(expr, Add) else b.scaled(-1.0))
    if isinstance(expr, Mul):
        a, b = affine_form(expr.left), affine_form(expr.right)
        if a is None or b is None:
            return None
        if a.is_constant:
            return b.scaled(a.const)
        if b.is_constant:
            return a.scaled(b.const)
        return None
    if isinstance(expr, Div):
        a, b = affine_form(expr.left), affine_form(expr.right)
        if a is None or b is None or not b.is_constant or b.const == 0:
            return None
        return a.scaled(1.0 / b.const)
    return None


def max_index(expr: Expr, leaf: type) -> int:
    """Largest 0-based index of ``leaf`` nodes in ``expr``, or -1."""
    return max((n.index for n in walk(expr) if type(n) is leaf), default=-1)


ALLOWED_NODES = (Const, Input, Output, Prob, Neg, Relu, Sigmoid, Tanh, Add, Sub, Mul, Div, Min, Max)
