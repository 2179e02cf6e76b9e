"""Extended-real interval arithmetic.

An :class:`Interval` holds a lower and an upper endpoint. Endpoints may be
Python floats or numpy arrays of equal shape, in which case the interval is a
batch of independent scalar intervals and every rule below applies
elementwise. Results are sound up to ordinary floating point error; there is
no outward rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

__all__ = [
    "Interval",
    "Box",
    "IntervalError",
    "ia_affine",
    "ia_mul",
    "ia_recip",
    "ia_div",
    "ia_elementwise",
    "ELEMENTWISE_KINDS",
    "ia_network",
    "ia_propagate",
]


class IntervalError(ValueError):
    """Raised for malformed intervals or mismatched dimensions."""


def _as_endpoint(v):
    if isinstance(v, np.ndarray):
        return v.astype(float, copy=False)
    return float(v)


@dataclass(frozen=True, eq=False)
class Interval:
    """A closed interval ``[lo, hi]`` over the extended reals."""

    lo: ArrayLike
    hi: ArrayLike

    def __post_init__(self):
        lo, hi = _as_endpoint(self.lo), _as_endpoint(self.hi)
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise IntervalError("interval endpoints must not be NaN")
        if np.any(lo > hi):
            raise IntervalError(f"empty interval: lo={lo!r} > hi={hi!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: ArrayLike) -> "Interval":
        return cls(x, x)

    @property
    def width(self) -> ArrayLike:
        return self.hi - self.lo

    def contains(self, x: ArrayLike) -> ArrayLike:
        return (self.lo <= x) & (x <= self.hi)

    def issubset(self, other: "Interval", tol: float = 0.0) -> ArrayLike:
        return (other.lo - tol <= self.lo) & (self.hi <= other.hi + tol)

    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        return bool(np.all(self.lo == other.lo) and np.all(self.hi == other.hi))

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __add__(self, other):
        other = _coerce(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        return ia_mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ia_div(self, _coerce(other))

    def __rtruediv__(self, other):
        return ia_div(_coerce(other), self)


def _coerce(v) -> Interval:
    return v if isinstance(v, Interval) else Interval.point(v)


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned hyperrectangle ``{x | lo <= x <= hi}`` with finite corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise IntervalError(f"box corners differ in shape: {lo.shape} vs {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise IntervalError("box corners must be finite")
        if np.any(lo > hi):
            raise IntervalError("box lower corner exceeds upper corner")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x) -> "Box":
        return cls(x, x)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def intervals(self) -> Interval:
        return Interval(self.lo.copy(), self.hi.copy())

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.lo <= x) and np.all(x <= self.hi))

    def issubset(self, other: "Box") -> bool:
        return bool(np.all(other.lo <= self.lo) and np.all(self.hi <= other.hi))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return bool(np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def ia_affine(weights, bias, x: Interval) -> Interval:
    """Bounds on ``weights @ x + bias`` for ``x`` in a box.

    ``x.lo``/``x.hi`` have shape ``(n,)`` or ``(batch, n)``.
    """
    weights = np.asarray(weights, dtype=float)
    bias = np.asarray(bias, dtype=float)
    lo, hi = np.asarray(x.lo, dtype=float), np.asarray(x.hi, dtype=float)
    if weights.ndim != 2 or weights.shape[1] != lo.shape[-1]:
        raise IntervalError(
            f"affine map expects {weights.shape[-1] if weights.ndim == 2 else '?'} inputs, "
            f"got {lo.shape[-1]}"
        )
    if bias.shape != (weights.shape[0],):
        raise IntervalError(f"bias has shape {bias.shape}, expected ({weights.shape[0]},)")
    pos = np.maximum(weights, 0.0)
    neg = np.minimum(weights, 0.0)
    new_lo = lo @ pos.T + hi @ neg.T + bias
    new_hi = hi @ pos.T + lo @ neg.T + bias
    return Interval(new_lo, new_hi)


def _products(a_lo, a_hi, b_lo, b_hi):
    with np.errstate(invalid="ignore"):
        prods = np.stack(np.broadcast_arrays(a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi))
    # inf * 0 yields NaN; the measure-theoretic convention sets it to 0
    return np.where(np.isnan(prods), 0.0, prods)


def ia_mul(a: Interval, b: Interval) -> Interval:
    prods = _products(a.lo, a.hi, b.lo, b.hi)
    lo, hi = prods.min(axis=0), prods.max(axis=0)
    if lo.ndim == 0:
        return Interval(float(lo), float(hi))
    return Interval(lo, hi)


def ia_recip(a: Interval) -> Interval:
    """Bounds on ``1/z`` for ``z`` in ``a``.

    The lower bound is ``1/hi`` unless ``0`` lies in ``(lo, hi]`` and the upper
    bound is ``1/lo`` unless ``0`` lies in ``[lo, hi)``; otherwise the bound is
    infinite. The degenerate interval ``[0, 0]`` maps to the whole line.
    """
    lo, hi = np.asarray(a.lo, dtype=float), np.asarray(a.hi, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        inv_hi = 1.0 / hi
        inv_lo = 1.0 / lo
    zero_point = (lo == 0) & (hi == 0)
    new_lo = np.where((lo < 0) & (0 <= hi) | zero_point, -np.inf, inv_hi)
    new_hi = np.where((lo <= 0) & (0 < hi) | zero_point, np.inf, inv_lo)
    if new_lo.ndim == 0:
        return Interval(float(new_lo), float(new_hi))
    return Interval(new_lo, new_hi)


def ia_div(a: Interval, b: Interval) -> Interval:
    """``a / b`` as ``a * (1/b)``.

    When both intervals contain zero the quotient may be ``0/0``, so the
    enclosure is the whole line. Otherwise a denominator pinned to ``[0, 0]``
    follows the pointwise convention: the numerator's sign picks the infinity.
    """
    result = ia_mul(a, ia_recip(b))
    a_lo, a_hi = np.asarray(a.lo, dtype=float), np.asarray(a.hi, dtype=float)
    b_lo, b_hi = np.asarray(b.lo, dtype=float), np.asarray(b.hi, dtype=float)
    undefined = (a_lo <= 0) & (a_hi >= 0) & (b_lo <= 0) & (b_hi >= 0)
    b_zero = (b_lo == 0) & (b_hi == 0)
    if not np.any(undefined | b_zero):
        return result
    lo = np.where(b_zero, np.where(a_lo > 0, np.inf, -np.inf), result.lo)
    hi = np.where(b_zero, np.where(a_hi < 0, -np.inf, np.inf), result.hi)
    lo = np.where(undefined, -np.inf, lo)
    hi = np.where(undefined, np.inf, hi)
    if lo.ndim == 0:
        return Interval(float(lo), float(hi))
    return Interval(lo, hi)


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_MONOTONE = {
    "relu": lambda z: np.maximum(z, 0.0),
    "sigmoid": _sigmoid,
    "tanh": np.tanh,
}

ELEMENTWISE_KINDS = ("relu", "sigmoid", "tanh", "neg", "min2", "max2", "add", "sub")


def _wrap(lo, hi) -> Interval:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if lo.ndim == 0:
        return Interval(float(lo), float(hi))
    return Interval(lo, hi)


def ia_elementwise(kind: str, *args: Interval) -> Interval:
    """Bounds for the monotone primitives by endpoint evaluation."""
    arity = 2 if kind in ("min2", "max2", "add", "sub") else 1
    if kind not in ELEMENTWISE_KINDS:
        raise IntervalError(f"unknown elementwise kind {kind!r}")
    if len(args) != arity:
        raise IntervalError(f"{kind} takes {arity} argument(s), got {len(args)}")
    if kind in _MONOTONE:
        fn = _MONOTONE[kind]
        (a,) = args
        return _wrap(fn(np.asarray(a.lo)), fn(np.asarray(a.hi)))
    if kind == "neg":
        return -args[0]
    a, b = args
    if kind == "min2":
        return _wrap(np.minimum(a.lo, b.lo), np.minimum(a.hi, b.hi))
    if kind == "max2":
        return _wrap(np.maximum(a.lo, b.lo), np.maximum(a.hi, b.hi))
    if kind == "add":
        return _wrap(np.asarray(a.lo) + b.lo, np.asarray(a.hi) + b.hi)
    return ia_elementwise("add", a, -b)


def hull(intervals: Iterable[Interval]) -> Interval:
    intervals = list(intervals)
    return _wrap(
        np.min([np.asarray(i.lo) for i in intervals], axis=0),
        np.max([np.asarray(i.hi) for i in intervals], axis=0),
    )


def stack(intervals: Sequence[Interval], axis: int = -1) -> Interval:
    return Interval(
        np.stack([np.asarray(i.lo, dtype=float) for i in intervals], axis=axis),
        np.stack([np.asarray(i.hi, dtype=float) for i in intervals], axis=axis),
    )


# --- propagation ------------------------------------------------------------


def _activation_bounds(kind: str, z: Interval) -> Interval:
    if kind == "none":
        return z
    return ia_elementwise(kind, z)


def ia_network(net, x: Interval, return_preactivations: bool = False):
    """Propagate input bounds layer by layer through ``net``.

    With ``return_preactivations`` the per-layer pre-activation bounds are
    returned alongside the output bounds.
    """
    z = x
    pre = []
    for layer in net.layers:
        z = ia_affine(layer.weights, layer.bias, z)
        pre.append(z)
        z = _activation_bounds(layer.activation, z)
    if return_preactivations:
        return z, pre
    return z


def ia_propagate(expr, x: Interval = None, net=None, *, outputs: Interval = None,
                 probs: Interval = None, override=None) -> Interval:
    """Bounds on an expression over a box, visiting nodes in topological order.

    ``x`` bounds the network inputs (shape ``(n,)`` or ``(B, n)``). Output
    leaves are bounded by propagating ``x`` through ``net`` (once, shared by
    every output leaf) unless ``outputs`` is given. ``probs`` bounds ``p``
    leaves. ``override`` maps node ids to precomputed enclosures.
    """
    from . import expr as E

    if isinstance(x, Box):
        x = x.intervals()
    cache = {}
    if override:
        cache.update(override)
    net_out = [outputs]

    def leaf(bounds: Interval, index: int, what: str) -> Interval:
        if bounds is None:
            raise IntervalError(f"no bounds available for {what}{index + 1}")
        lo, hi = np.asarray(bounds.lo), np.asarray(bounds.hi)
        if index >= lo.shape[-1]:
            raise IntervalError(f"{what}{index + 1} is out of range ({lo.shape[-1]} available)")
        return _wrap(lo[..., index], hi[..., index])

    def output_bounds() -> Interval:
        if net_out[0] is None:
            if net is None or x is None:
                raise IntervalError("expression references network outputs but no network was given")
            if np.asarray(x.lo).shape[-1] != net.input_dim:
                raise IntervalError(
                    f"network expects {net.input_dim} inputs, box has {np.asarray(x.lo).shape[-1]}"
                )
            net_out[0] = ia_network(net, x)
        return net_out[0]

    # iterative post-order keeps deep left-folded chains off the Python stack
    order = []
    seen = set(cache)
    stack = [(expr, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        for child in node.children:
            if id(child) not in seen:
                stack.append((child, False))

    for node in order:
        t = type(node)
        if t is E.Const:
            r = Interval.point(node.value)
        elif t is E.Input:
            r = leaf(x, node.index, "x")
        elif t is E.Output:
            r = leaf(output_bounds(), node.index, "y")
        elif t is E.Prob:
            r = leaf(probs, node.index, "p")
        elif t is E.Neg:
            r = -cache[id(node.arg)]
        elif t is E.Relu:
            r = ia_elementwise("relu", cache[id(node.arg)])
        elif t is E.Sigmoid:
            r = ia_elementwise("sigmoid", cache[id(node.arg)])
        elif t is E.Tanh:
            r = ia_elementwise("tanh", cache[id(node.arg)])
        else:
            a, b = cache[id(node.left)], cache[id(node.right)]
            if t is E.Add:
                r = ia_elementwise("add", a, b)
            elif t is E.Sub:
                r = ia_elementwise("sub", a, b)
            elif t is E.Mul:
                r = ia_mul(a, b)
            elif t is E.Div:
                r = ia_div(a, b)
            elif t is E.Min:
                r = ia_elementwise("min2", a, b)
            elif t is E.Max:
                r = ia_elementwise("max2", a, b)
            else:
                raise IntervalError(f"unsupported primitive {t.__name__}")
        cache[id(node)] = r

    result = cache[id(expr)]
    # constant expressions still need one value per box in a batch
    if x is not None and np.ndim(x.lo) == 2 and np.ndim(result.lo) == 0:
        n = np.shape(x.lo)[0]
        result = Interval(np.full(n, result.lo), np.full(n, result.hi))
    return result
