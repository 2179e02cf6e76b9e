"""Probabilistic verification problems and builders for common properties.

A problem asks whether ``g(p_1, ..., p_v) >= 0`` where each
``p_i = P(f_i(x, N(x)) >= 0)`` for ``x`` drawn from a named distribution.
Problem files are JSON::

    {
      "networks": {"clf": {"path": "clf.json"}},
      "layout": {"variables": [{"name": "age", "kind": "continuous", "dims": [0]}]},
      "distributions": {"pop": {"type": "product", "factors": {"age": {...}}}},
      "terms": [{"network": "clf", "distribution": "pop", "expr": "y1 - y2"}],
      "outer": "p1 - 0.5",
      "epsilon": 0.0
    }

Network entries are either ``{"path": ...}`` (resolved relative to the
problem file; ``.nnet`` or native JSON) or an inline native network object.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from . import expr as E
from .distributions import (
    Distribution,
    Point,
    Uniform,
    VariableLayout,
    distribution_from_dict,
    distribution_to_dict,
    layout_from_dict,
    layout_to_dict,
)
from .network import Network, load_network, network_from_dict, network_to_dict

__all__ = [
    "Term",
    "Problem",
    "ProblemError",
    "load_problem",
    "problem_from_dict",
    "problem_to_dict",
    "save_problem",
    "build_demographic_parity",
    "build_qualified_parity",
    "build_violation_rate",
    "build_robustness",
    "phi2_region",
]


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class Term:
    network: str
    distribution: str
    expr: E.Expr


@dataclass(frozen=True, eq=False)
class Problem:
    networks: Mapping[str, Network]
    layout: VariableLayout
    distributions: Mapping[str, Distribution]
    terms: Tuple[Term, ...]
    outer: E.Expr
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "networks", dict(self.networks))
        object.__setattr__(self, "distributions", dict(self.distributions))
        self.validate()

    @property
    def v(self) -> int:
        return len(self.terms)

    def validate(self) -> None:
        if not self.terms:
            raise ProblemError("a problem needs at least one term")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ProblemError("epsilon must be a finite number >= 0")
        n = self.layout.n_dims
        for name, net in self.networks.items():
            if net.input_dim != n:
                raise ProblemError(f"network {name!r} takes {net.input_dim} inputs, layout has {n} dims")
        for name, dist in self.distributions.items():
            if dist.layout != self.layout:
                raise ProblemError(f"distribution {name!r} is defined over a different layout")
        for i, term in enumerate(self.terms, 1):
            if term.network not in self.networks:
                raise ProblemError(f"term {i} references unknown network {term.network!r}")
            if term.distribution not in self.distributions:
                raise ProblemError(f"term {i} references unknown distribution {term.distribution!r}")
            if E.max_index(term.expr, E.Prob) >= 0:
                raise ProblemError(f"term {i}: inner expressions cannot mention p")
            if E.max_index(term.expr, E.Input) >= n:
                raise ProblemError(f"term {i} references an input beyond x{n}")
            m = self.networks[term.network].output_dim
            if E.max_index(term.expr, E.Output) >= m:
                raise ProblemError(f"term {i} references an output beyond y{m}")
        if E.max_index(self.outer, E.Input) >= 0 or E.max_index(self.outer, E.Output) >= 0:
            raise ProblemError("the outer expression may only mention p")
        if E.max_index(self.outer, E.Prob) >= self.v:
            raise ProblemError(f"the outer expression references a term beyond p{self.v}")


# --- JSON -------------------------------------------------------------------


def problem_from_dict(d: Mapping, base_dir: str = ".") -> Problem:
    try:
        layout = layout_from_dict(d["layout"])
        networks = {}
        for name, spec in d["networks"].items():
            if isinstance(spec, Mapping) and "path" in spec:
                path = spec["path"]
                if not os.path.isabs(path):
                    path = os.path.join(base_dir, path)
                networks[name] = load_network(path, spec.get("format"))
            else:
                networks[name] = network_from_dict(spec)
        dists = {name: distribution_from_dict(spec, layout) for name, spec in d["distributions"].items()}
        terms = tuple(
            Term(t["network"], t["distribution"], E.parse_expr(t["expr"], "inner")) for t in d["terms"]
        )
        outer = E.parse_expr(d["outer"], "outer")
    except KeyError as e:
        raise ProblemError(f"problem is missing required field {e.args[0]!r}") from None
    return Problem(networks, layout, dists, terms, outer, float(d.get("epsilon", 0.0)))


def load_problem(path: str) -> Problem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ProblemError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    return problem_from_dict(d, os.path.dirname(os.path.abspath(path)))


def problem_to_dict(problem: Problem) -> dict:
    return {
        "networks": {k: network_to_dict(v) for k, v in problem.networks.items()},
        "layout": layout_to_dict(problem.layout),
        "distributions": {k: distribution_to_dict(v) for k, v in problem.distributions.items()},
        "terms": [
            {"network": t.network, "distribution": t.distribution, "expr": E.to_text(t.expr)}
            for t in problem.terms
        ],
        "outer": E.to_text(problem.outer),
        "epsilon": problem.epsilon,
    }


def save_problem(problem: Problem, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(problem), fh, indent=1)


# --- builders ---------------------------------------------------------------


def _single(net: Network, dist: Distribution, exprs: Sequence[E.Expr], outer: E.Expr, epsilon=0.0) -> Problem:
    terms = tuple(Term("net", "x", e) for e in exprs)
    return Problem({"net": net}, dist.layout, {"x": dist}, terms, outer, epsilon)


def _protected_dim(layout: VariableLayout, a: int) -> None:
    try:
        var = layout.variable_of(a)
    except KeyError:
        raise ProblemError(f"dimension {a} is not in the layout") from None
    if var.kind != "categorical":
        raise ProblemError(f"protected dimension {a} belongs to {var.kind} variable {var.name!r}, not a one-hot group")


def _parity_terms(a: int, extra: Optional[E.Expr]):
    yes = E.Output(0) - E.Output(1)
    xa = E.Input(a)
    fs = [E.min_of(yes, -xa), -xa, E.min_of(yes, xa - 1.0), xa - 1.0]
    if extra is not None:
        fs = [E.min_of(f, extra) for f in fs]
    return fs


def _ratio_outer(gamma: float) -> E.Expr:
    p = [E.Prob(i) for i in range(4)]
    return (p[0] * p[3]) / (p[1] * p[2]) - float(gamma)


def build_demographic_parity(net: Network, dist: Distribution, a: int, gamma: float) -> Problem:
    """``P(yes | x_a = 0) / P(yes | x_a = 1) >= gamma``, with "yes" meaning ``y1 >= y2``.

    ``a`` is a 0-based one-hot dimension; ``x_a = 1`` marks the advantaged group.
    """
    _protected_dim(dist.layout, a)
    if net.output_dim < 2:
        raise ProblemError("parity properties need a network with at least two outputs")
    return _single(net, dist, _parity_terms(a, None), _ratio_outer(gamma))


def build_qualified_parity(net: Network, dist: Distribution, a: int, q: int, q_hat: float, gamma: float) -> Problem:
    """Demographic parity restricted to the qualified population ``x_q >= q_hat``."""
    _protected_dim(dist.layout, a)
    if q in dist.layout.variable_of(a).dims:
        raise ProblemError("the qualification dimension cannot be part of the protected group")
    if not 0 <= q < dist.layout.n_dims:
        raise ProblemError(f"qualification dimension {q} is not in the layout")
    if net.output_dim < 2:
        raise ProblemError("parity properties need a network with at least two outputs")
    return _single(net, dist, _parity_terms(a, E.Input(q) - float(q_hat)), _ratio_outer(gamma))


def phi2_region() -> Tuple[np.ndarray, np.ndarray]:
    """Input region of the ACAS Xu clear-of-conflict property (unclipped)."""
    inf = np.inf
    return np.array([55947.961, -inf, -inf, 1145.0, -inf]), np.array([inf, inf, inf, inf, 60.0])


def _input_domain(net: Network, input_box) -> Tuple[np.ndarray, np.ndarray]:
    if input_box is not None:
        lo, hi = input_box
    elif net.input_lower is not None and net.input_upper is not None:
        lo, hi = net.input_lower, net.input_upper
    else:
        raise ProblemError("an input domain is needed: the network carries none and none was given")
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


def _box_distribution(lo: np.ndarray, hi: np.ndarray) -> Distribution:
    layout = VariableLayout.continuous(lo.size)
    factors = {}
    for i, v in enumerate(layout.variables):
        factors[v.name] = Point(float(lo[i])) if lo[i] == hi[i] else Uniform(float(lo[i]), float(hi[i]))
    return Distribution.product(layout, factors)


def build_violation_rate(net: Network, region, input_box=None) -> Problem:
    """``p1`` is the probability that output 1 is maximal, for ``x`` uniform on ``region`` within the input domain."""
    dlo, dhi = _input_domain(net, input_box)
    rlo, rhi = (np.asarray(v, dtype=float) for v in region)
    lo, hi = np.maximum(rlo, dlo), np.minimum(rhi, dhi)
    if np.any(lo > hi):
        raise ProblemError("the region does not intersect the input domain")
    ys = [E.Output(k) for k in range(net.output_dim)]
    f = -(E.max_of(*ys) - ys[0]) if len(ys) > 1 else -(ys[0] - ys[0])
    return _single(net, _box_distribution(lo, hi), [f], E.Prob(0))


def build_robustness(net: Network, x, r: float, dims: Sequence[int], target: int, input_box=None) -> Problem:
    """``p1`` is the probability that class ``target`` (0-based, minimal score wins) is assigned
    under uniform perturbation of ``dims`` by ``r`` times the domain width."""
    dlo, dhi = _input_domain(net, input_box)
    x = np.asarray(x, dtype=float)
    if x.shape != dlo.shape or np.any(x < dlo) or np.any(x > dhi):
        raise ProblemError("the reference input lies outside the input domain")
    if not 0 < r <= 1:
        raise ProblemError("the radius fraction must lie in (0, 1]")
    if not 0 <= target < net.output_dim:
        raise ProblemError(f"target class {target} is not an output of the network")
    dims = list(dims)
    if any(not 0 <= d < x.size for d in dims):
        raise ProblemError("perturbed dimensions must be input dimensions")
    lo, hi = x.copy(), x.copy()
    w = dhi[dims] - dlo[dims]
    lo[dims] = np.maximum(x[dims] - r * w, dlo[dims])
    hi[dims] = np.minimum(x[dims] + r * w, dhi[dims])
    ys = [E.Output(k) for k in range(net.output_dim)]
    f = E.min_of(*ys) - ys[target] if len(ys) > 1 else ys[0] - ys[0]
    return _single(net, _box_distribution(lo, hi), [f], E.Prob(0))
