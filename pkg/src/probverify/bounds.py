"""Bounds on a satisfaction function over boxes of network inputs.

Two bounders share one signature: interval arithmetic over the whole
expression graph, and CROWN-style backward linear bounds through the network
body. Both accept one :class:`Box` or a batch given as an :class:`Interval`
with ``(B, n)`` endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from . import expr as E
from .interval import Box, Interval, IntervalError, ia_network, ia_propagate

__all__ = [
    "LinearBounds",
    "BoundsResult",
    "crown_supported",
    "crown_linear_bounds",
    "compute_bounds_ia",
    "compute_bounds_crown",
    "compute_bounds",
    "BOUNDERS",
]

BOUNDERS = ("ia", "crown")


@dataclass(frozen=True)
class LinearBounds:
    """``lowerA @ x + lowerB <= C @ N(x) <= upperA @ x + upperB`` on a box.

    Arrays carry a leading batch axis: ``A`` is ``(B, m, n)``, ``b`` is ``(B, m)``.
    """

    lowerA: np.ndarray
    lowerB: np.ndarray
    upperA: np.ndarray
    upperB: np.ndarray

    def concretize(self, lo: np.ndarray, hi: np.ndarray) -> Interval:
        """Interval of each linear bound over the box(es) ``[lo, hi]`` of shape ``(B, n)``."""
        return Interval(_min_linear(self.lowerA, self.lowerB, lo, hi), _max_linear(self.upperA, self.upperB, lo, hi))


@dataclass(frozen=True)
class BoundsResult:
    interval: Interval
    method: str
    fallback: bool = False


def _max_linear(A, b, lo, hi):
    return np.einsum("bmn,bn->bm", np.maximum(A, 0.0), hi) + np.einsum("bmn,bn->bm", np.minimum(A, 0.0), lo) + b


def _min_linear(A, b, lo, hi):
    return np.einsum("bmn,bn->bm", np.maximum(A, 0.0), lo) + np.einsum("bmn,bn->bm", np.minimum(A, 0.0), hi) + b


def _as_batch(box) -> Tuple[np.ndarray, np.ndarray, bool]:
    if isinstance(box, Box):
        return box.lo[None, :], box.hi[None, :], True
    lo = np.asarray(box.lo, dtype=float)
    hi = np.asarray(box.hi, dtype=float)
    if lo.ndim == 1:
        return lo[None, :], hi[None, :], True
    return lo, hi, False


def _unbatch(iv: Interval, single: bool) -> Interval:
    if single:
        return Interval(float(np.asarray(iv.lo).reshape(-1)[0]), float(np.asarray(iv.hi).reshape(-1)[0]))
    return iv


def crown_supported(net) -> bool:
    return all(layer.activation in ("relu", "none") for layer in net.layers)


def _relu_relaxation(l: np.ndarray, u: np.ndarray):
    """Slopes/intercepts of linear lower and upper bounds of relu on ``[l, u]``."""
    active = l >= 0
    unstable = (l < 0) & (u > 0)
    denom = np.where(unstable, u - l, 1.0)
    up_slope = np.where(active, 1.0, np.where(unstable, u / denom, 0.0))
    up_icpt = np.where(unstable, -u * l / denom, 0.0)
    low_slope = np.where(active, 1.0, np.where(unstable & (u > -l), 1.0, 0.0))
    return low_slope, up_slope, up_icpt


def crown_linear_bounds(net, lo: np.ndarray, hi: np.ndarray, C: np.ndarray) -> LinearBounds:
    """Backward linear bounds on ``C @ N(x)`` over boxes ``[lo, hi]`` of shape ``(B, n)``.

    ``C`` is ``(m, out_dim)`` (shared) or ``(B, m, out_dim)``. Pre-activation
    bounds of every layer come from interval arithmetic.
    """
    if not crown_supported(net):
        raise ValueError("CROWN supports only relu and identity activations")
    B = lo.shape[0]
    _, pre = ia_network(net, Interval(lo, hi), return_preactivations=True)
    C = np.asarray(C, dtype=float)
    if C.ndim == 2:
        C = np.broadcast_to(C, (B,) + C.shape)
    lam_up = C.copy()
    lam_low = C.copy()
    b_up = np.zeros(C.shape[:2])
    b_low = np.zeros(C.shape[:2])
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        if layer.activation == "relu":
            s_low, s_up, c_up = _relu_relaxation(np.asarray(pre[k].lo), np.asarray(pre[k].hi))
            s_low, s_up, c_up = s_low[:, None, :], s_up[:, None, :], c_up[:, None, :]
            pos, neg = np.maximum(lam_up, 0.0), np.minimum(lam_up, 0.0)
            b_up = b_up + np.sum(pos * c_up, axis=-1)
            lam_up = pos * s_up + neg * s_low
            pos, neg = np.maximum(lam_low, 0.0), np.minimum(lam_low, 0.0)
            b_low = b_low + np.sum(neg * c_up, axis=-1)
            lam_low = pos * s_low + neg * s_up
        b_up = b_up + lam_up @ layer.bias
        b_low = b_low + lam_low @ layer.bias
        lam_up = lam_up @ layer.weights
        lam_low = lam_low @ layer.weights
    return LinearBounds(lam_low, b_low, lam_up, b_up)


def compute_bounds_ia(net, expr: E.Expr, box) -> Interval:
    """Interval arithmetic over the fused expression/network graph."""
    lo, hi, single = _as_batch(box)
    iv = ia_propagate(expr, Interval(lo, hi), net)
    return _unbatch(iv, single)


def _affine_output_nodes(expr: E.Expr) -> List[Tuple[E.Expr, E.AffineForm]]:
    """Maximal subexpressions that are affine and depend on network outputs."""
    found, seen = [], set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        form = E.affine_form(node)
        if form is not None:
            if form.y_coef:
                found.append((node, form))
            continue
        stack.extend(node.children)
    return found


def _has_bare_outputs(expr: E.Expr, folded: Dict[int, object]) -> bool:
    stack, seen = [expr], set()
    while stack:
        node = stack.pop()
        if id(node) in seen or id(node) in folded:
            continue
        seen.add(id(node))
        if isinstance(node, E.Output):
            return True
        stack.extend(node.children)
    return False


def compute_bounds_crown(net, expr: E.Expr, box) -> Interval:
    """CROWN bounds; affine output functionals are folded into the backward pass.

    Every maximal affine subexpression that mentions outputs is bounded by a
    single backward pass whose objective is its output coefficients, with its
    input coefficients and constant added before concretisation. Anything
    outside those subexpressions is bounded by interval arithmetic, using
    CROWN output bounds for any remaining output leaves.
    """
    if not crown_supported(net):
        return compute_bounds_ia(net, expr, box)
    lo, hi, single = _as_batch(box)
    n = lo.shape[1]
    if n != net.input_dim:
        raise IntervalError(f"network expects {net.input_dim} inputs, box has {n}")
    nodes = _affine_output_nodes(expr)
    m_out = net.output_dim
    rows, xrows, consts = [], [], []
    for node, form in nodes:
        c = np.zeros(m_out)
        a = np.zeros(n)
        for k, v in form.y_coef.items():
            if k >= m_out:
                raise IntervalError(f"y{k + 1} is out of range ({m_out} available)")
            c[k] = v
        for j, v in form.x_coef.items():
            if j >= n:
                raise IntervalError(f"x{j + 1} is out of range ({n} available)")
            a[j] = v
        rows.append(c)
        xrows.append(a)
        consts.append(form.const)
    folded = {id(node): None for node, _ in nodes}
    bare = _has_bare_outputs(expr, folded)
    if bare:
        rows.extend(np.eye(m_out))
    if not rows:
        return compute_bounds_ia(net, expr, box)

    lb = crown_linear_bounds(net, lo, hi, np.array(rows))
    k = len(nodes)
    shift_A = np.zeros((len(rows), n))
    shift_b = np.zeros(len(rows))
    if k:
        shift_A[:k] = np.array(xrows)
        shift_b[:k] = np.array(consts)
    lb = LinearBounds(lb.lowerA + shift_A, lb.lowerB + shift_b, lb.upperA + shift_A, lb.upperB + shift_b)
    iv = lb.concretize(lo, hi)
    ilo, ihi = np.asarray(iv.lo), np.asarray(iv.hi)

    override = {id(node): Interval(ilo[:, i], ihi[:, i]) for i, (node, _) in enumerate(nodes)}
    outputs = Interval(ilo[:, k:], ihi[:, k:]) if bare else None
    if id(expr) in override:
        result = override[id(expr)]
    else:
        result = ia_propagate(expr, Interval(lo, hi), net, outputs=outputs, override=override)
    return _unbatch(result, single)


def compute_bounds(net, expr: E.Expr, box, method: str = "ia") -> BoundsResult:
    """Dispatch on ``method``; CROWN on unsupported activations falls back to IA."""
    if method == "ia":
        return BoundsResult(compute_bounds_ia(net, expr, box), "ia")
    if method == "crown":
        if not crown_supported(net):
            return BoundsResult(compute_bounds_ia(net, expr, box), "ia", fallback=True)
        return BoundsResult(compute_bounds_crown(net, expr, box), "crown")
    raise ValueError(f"unknown bounding method {method!r}; choose from {BOUNDERS}")
