"""Input distributions with exact hyperrectangle probabilities.

A :class:`Distribution` is a finite mixture of product distributions. Each
product assigns one univariate law to every variable of a
:class:`VariableLayout`; a categorical variable occupies a group of one-hot
dimensions and receives a :class:`Categorical` law. The probability of a box
is ``sum_k w_k * prod_v mass_kv(box)``, which is exact because every factor
only depends on the box's projection onto that variable's dimensions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr, ndtri

from .interval import Box

__all__ = [
    "Variable",
    "VariableLayout",
    "Uniform",
    "TruncNormal",
    "IntegerPMF",
    "Point",
    "Categorical",
    "Distribution",
    "BayesNet",
    "BayesNode",
    "DistributionError",
    "box_probability",
    "support_box",
    "sample",
    "compile_bayes_net",
    "law_from_dict",
    "law_to_dict",
    "distribution_from_dict",
    "distribution_to_dict",
    "layout_from_dict",
    "layout_to_dict",
]

KINDS = ("continuous", "integer", "categorical")
NORMAL_TAIL_MASS = 1e-12


class DistributionError(ValueError):
    pass


# --- layout -----------------------------------------------------------------


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    dims: Tuple[int, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DistributionError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.kind == "categorical" and len(self.dims) < 2:
            raise DistributionError(f"categorical variable {self.name!r} needs >= 2 one-hot dims")
        if self.kind != "categorical" and len(self.dims) != 1:
            raise DistributionError(f"variable {self.name!r} must occupy exactly one dimension")


@dataclass(frozen=True)
class VariableLayout:
    """Assignment of input dimensions to typed variables (dims are 0-based)."""

    variables: Tuple[Variable, ...]

    def __post_init__(self):
        variables = tuple(self.variables)
        object.__setattr__(self, "variables", variables)
        dims = sorted(d for v in variables for d in v.dims)
        if dims != list(range(len(dims))):
            raise DistributionError(f"variable dims must partition 0..n-1, got {dims}")
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise DistributionError("variable names must be unique")

    @classmethod
    def continuous(cls, n: int) -> "VariableLayout":
        return cls(tuple(Variable(f"x{i + 1}", "continuous", (i,)) for i in range(n)))

    @property
    def n_dims(self) -> int:
        return sum(len(v.dims) for v in self.variables)

    def __getitem__(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def variable_of(self, dim: int) -> Variable:
        for v in self.variables:
            if dim in v.dims:
                return v
        raise KeyError(dim)

    def dim_kinds(self) -> List[str]:
        kinds = [""] * self.n_dims
        for v in self.variables:
            for d in v.dims:
                kinds[d] = v.kind
        return kinds

    @property
    def is_discrete(self) -> bool:
        return all(v.kind != "continuous" for v in self.variables)


# --- univariate laws --------------------------------------------------------


def _phi_delta(a, b):
    """``Phi(b) - Phi(a)`` without cancellation in the upper tail."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    upper = a > 0
    return np.where(upper, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))


class Law:
    kind = ""

    def support(self) -> Tuple[float, float]:
        raise NotImplementedError

    def mass(self, lo, hi) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(Law):
    low: float
    high: float
    kind = "continuous"

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high) and self.low < self.high):
            raise DistributionError(f"uniform needs finite low < high, got [{self.low}, {self.high}]")

    def support(self):
        return float(self.low), float(self.high)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.low) / (self.high - self.low), 0.0, 1.0)

    def mass(self, lo, hi):
        a = np.maximum(lo, self.low)
        b = np.minimum(hi, self.high)
        return np.maximum(self.cdf(b) - self.cdf(a), 0.0)

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size)


@dataclass(frozen=True)
class TruncNormal(Law):
    """Normal law restricted (and renormalised) to ``[low, high]``.

    Infinite bounds give an untruncated tail; its support box is clipped at the
    ``1e-12`` quantile.
    """

    mean: float
    std: float
    low: float = -math.inf
    high: float = math.inf
    kind = "continuous"

    def __post_init__(self):
        if not (self.std > 0 and math.isfinite(self.mean)):
            raise DistributionError("normal law needs finite mean and std > 0")
        if not self.low < self.high:
            raise DistributionError("truncated normal needs low < high")
        z = float(_phi_delta((self.low - self.mean) / self.std, (self.high - self.mean) / self.std))
        if z <= 0:
            raise DistributionError("truncation interval carries no probability mass")
        object.__setattr__(self, "_z", z)

    @property
    def truncated(self) -> bool:
        return math.isfinite(self.low) and math.isfinite(self.high)

    def support(self):
        tail = -float(ndtri(NORMAL_TAIL_MASS)) * self.std
        lo = self.low if math.isfinite(self.low) else self.mean - tail
        hi = self.high if math.isfinite(self.high) else self.mean + tail
        return float(lo), float(hi)

    def _z_of(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def cdf(self, x):
        a = self._z_of(self.low)
        return np.clip(_phi_delta(a, self._z_of(np.maximum(x, self.low))) / self._z, 0.0, 1.0)

    def mass(self, lo, hi):
        a = np.maximum(lo, self.low)
        b = np.minimum(hi, self.high)
        m = _phi_delta(self._z_of(a), self._z_of(b)) / self._z
        return np.where(b >= a, np.clip(m, 0.0, 1.0), 0.0)

    def sample(self, rng, size):
        from scipy.stats import truncnorm

        a, b = (self.low - self.mean) / self.std, (self.high - self.mean) / self.std
        return truncnorm.rvs(a, b, loc=self.mean, scale=self.std, size=size, random_state=rng)


@dataclass(frozen=True, eq=False)
class IntegerPMF(Law):
    values: Tuple[float, ...]
    weights: Tuple[float, ...]
    kind = "integer"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.shape != w.shape or v.ndim != 1 or v.size == 0:
            raise DistributionError("integer pmf needs equally long non-empty values/weights")
        if np.any(v != np.round(v)):
            raise DistributionError("integer pmf support must be integers")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DistributionError(f"integer pmf weights must be >= 0 and sum to 1 (sum={w.sum()!r})")
        order = np.argsort(v, kind="stable")
        v, w = v[order], w[order]
        if np.any(np.diff(v) == 0):
            raise DistributionError("integer pmf support values must be distinct")
        keep = w > 0
        v, w = v[keep], w[keep]
        object.__setattr__(self, "values", tuple(v.tolist()))
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "_v", v)
        cum = np.cumsum(w)
        # the validated total is 1 to 1e-12; pin it so the full range has mass exactly 1
        object.__setattr__(self, "_cum", np.concatenate([[0.0], cum / cum[-1]]))

    @classmethod
    def uniform_range(cls, low: int, high: int) -> "IntegerPMF":
        n = int(high) - int(low) + 1
        return cls(tuple(range(int(low), int(high) + 1)), tuple([1.0 / n] * n))

    def __eq__(self, other):
        return isinstance(other, IntegerPMF) and self.values == other.values and self.weights == other.weights

    def __hash__(self):
        return hash((self.values, self.weights))

    def support(self):
        return float(self._v[0]), float(self._v[-1])

    def mass(self, lo, hi):
        i = np.searchsorted(self._v, lo, side="left")
        j = np.searchsorted(self._v, hi, side="right")
        return np.where(j > i, self._cum[j] - self._cum[i], 0.0)

    def sample(self, rng, size):
        return rng.choice(self._v, size=size, p=np.asarray(self.weights))


@dataclass(frozen=True)
class Point(Law):
    value: float
    kind = "any"

    def support(self):
        return float(self.value), float(self.value)

    def mass(self, lo, hi):
        return np.where((lo <= self.value) & (self.value <= hi), 1.0, 0.0)

    def sample(self, rng, size):
        return np.full(size, float(self.value))


@dataclass(frozen=True, eq=False)
class Categorical(Law):
    """Law of a one-hot encoded variable; ``weights[c]`` is P(category c)."""

    weights: Tuple[float, ...]
    kind = "categorical"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 2 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DistributionError("categorical weights must be >= 0, at least two, and sum to 1")
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "_w", w)

    @classmethod
    def one_hot(cls, k: int, c: int) -> "Categorical":
        w = [0.0] * k
        w[c] = 1.0
        return cls(tuple(w))

    def __eq__(self, other):
        return isinstance(other, Categorical) and self.weights == other.weights

    def __hash__(self):
        return hash(self.weights)

    @property
    def n_categories(self) -> int:
        return len(self.weights)

    def support(self):
        raise DistributionError("categorical support is per dimension; use support_box")

    def group_support(self) -> Tuple[np.ndarray, np.ndarray]:
        k = self.n_categories
        active = self._w > 0
        lo = np.zeros(k)
        hi = active.astype(float)
        if active.sum() == 1:
            lo = hi.copy()
        return lo, hi

    def mass(self, lo, hi):
        """``lo``/``hi`` have shape ``(..., k)``: the box restricted to the group."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        can_one = (lo <= 1) & (1 <= hi)
        can_zero = (lo <= 0) & (0 <= hi)
        n_zero_bad = np.sum(~can_zero, axis=-1, keepdims=True)
        # category c fits iff x_c = 1 is allowed and every other dim may be 0
        others_ok = np.where(can_zero, n_zero_bad == 0, n_zero_bad == 1)
        fits = can_one & others_ok
        return fits @ self._w

    def sample(self, rng, size):
        return rng.choice(self.n_categories, size=size, p=self._w)


# --- mixtures ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Distribution:
    """Finite mixture of product distributions over ``layout``."""

    layout: VariableLayout
    components: Tuple[Tuple[float, Mapping[str, Law]], ...]

    def __post_init__(self):
        comps = []
        for w, factors in self.components:
            w = float(w)
            if w < 0:
                raise DistributionError("mixture weights must be non-negative")
            if w == 0:
                continue
            factors = dict(factors)
            for v in self.layout.variables:
                if v.name not in factors:
                    raise DistributionError(f"mixture component does not cover variable {v.name!r}")
                _check_law(v, factors[v.name])
            extra = set(factors) - {v.name for v in self.layout.variables}
            if extra:
                raise DistributionError(f"unknown variables in component: {sorted(extra)}")
            comps.append((w, factors))
        if not comps:
            raise DistributionError("distribution has no components with positive weight")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-9:
            raise DistributionError(f"mixture weights sum to {total!r}, expected 1")
        object.__setattr__(self, "components", tuple(comps))
        object.__setattr__(self, "_weights", np.array([w for w, _ in comps]))
        # share mass computations between components that use the same law
        tables = {}
        for v in self.layout.variables:
            uniq: List[Law] = []
            index = {}
            idx = []
            for _, factors in comps:
                law = factors[v.name]
                key = _law_key(law)
                if key not in index:
                    index[key] = len(uniq)
                    uniq.append(law)
                idx.append(index[key])
            tables[v.name] = (uniq, np.array(idx))
        object.__setattr__(self, "_tables", tables)

    @classmethod
    def product(cls, layout: VariableLayout, factors: Mapping[str, Law]) -> "Distribution":
        return cls(layout, ((1.0, factors),))

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def box_probability(self, lo, hi) -> np.ndarray:
        return box_probability(self, lo, hi)


def _law_key(law: Law):
    try:
        return (type(law), hash(law), law)
    except TypeError:
        return (type(law), id(law))


def _check_law(var: Variable, law: Law):
    if var.kind == "categorical":
        if not isinstance(law, Categorical) or law.n_categories != len(var.dims):
            raise DistributionError(
                f"variable {var.name!r} needs a categorical law over {len(var.dims)} categories"
            )
    elif var.kind == "integer":
        if not isinstance(law, (IntegerPMF, Point)):
            raise DistributionError(f"integer variable {var.name!r} needs an integer pmf or point law")
        if isinstance(law, Point) and law.value != round(law.value):
            raise DistributionError(f"integer variable {var.name!r} fixed to non-integer {law.value}")
    elif not isinstance(law, (Uniform, TruncNormal, Point)):
        raise DistributionError(f"continuous variable {var.name!r} needs a continuous or point law")


def box_probability(dist: Distribution, lo, hi) -> np.ndarray:
    """Exact probability of the box ``[lo, hi]``; batched over a leading axis."""
    if isinstance(lo, Box):
        lo, hi = lo.lo, lo.hi
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    single = lo.ndim == 1
    lo2 = np.atleast_2d(lo)
    hi2 = np.atleast_2d(hi)
    if lo2.shape[-1] != dist.layout.n_dims:
        raise DistributionError(f"box has {lo2.shape[-1]} dims, layout has {dist.layout.n_dims}")
    prod = np.ones((lo2.shape[0], len(dist.components)))
    for v in dist.layout.variables:
        uniq, idx = dist._tables[v.name]
        if v.kind == "categorical":
            d = list(v.dims)
            glo, ghi = lo2[:, d], hi2[:, d]
            masses = np.stack([law.mass(glo, ghi) for law in uniq], axis=1)
        else:
            (d,) = v.dims
            masses = np.stack([law.mass(lo2[:, d], hi2[:, d]) for law in uniq], axis=1)
        prod *= masses[:, idx]
    p = np.clip(prod @ dist.weights, 0.0, 1.0)
    return float(p[0]) if single else p


def support_box(dist: Distribution) -> Box:
    """Smallest box (per the laws' supports) containing the mixture's support."""
    n = dist.layout.n_dims
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    for _, factors in dist.components:
        for v in dist.layout.variables:
            law = factors[v.name]
            if isinstance(law, Categorical):
                glo, ghi = law.group_support()
                d = list(v.dims)
                lo[d] = np.minimum(lo[d], glo)
                hi[d] = np.maximum(hi[d], ghi)
            else:
                a, b = law.support()
                (d,) = v.dims
                lo[d] = min(lo[d], a)
                hi[d] = max(hi[d], b)
    return Box(lo, hi)


def sample(dist: Distribution, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` inputs; one-hot groups get exactly one indicator set."""
    comp = rng.choice(len(dist.components), size=size, p=dist.weights)
    x = np.zeros((size, dist.layout.n_dims))
    for k, (_, factors) in enumerate(dist.components):
        rows = np.nonzero(comp == k)[0]
        if rows.size == 0:
            continue
        for v in dist.layout.variables:
            law = factors[v.name]
            draws = law.sample(rng, rows.size)
            if v.kind == "categorical":
                x[rows[:, None], np.asarray(v.dims)[None, :]] = 0.0
                x[rows, np.asarray(v.dims)[draws.astype(int)]] = 1.0
            else:
                x[rows, v.dims[0]] = draws
    return x


# --- Bayesian networks ------------------------------------------------------


@dataclass
class BayesNode:
    """A node of a discrete Bayesian network.

    Discrete nodes carry a CPT with one row per parent configuration (rows in
    ``itertools.product`` order of the parents' states). ``values`` maps a
    state to the value of ``variable``; categorical variables use the state as
    the category index. ``variable=None`` marks a latent node.

    Leaf nodes (``laws`` given) carry one univariate law per parent
    configuration and must not be parents themselves.
    """

    name: str
    parents: Tuple[str, ...] = ()
    variable: Optional[str] = None
    cpt: Optional[np.ndarray] = None
    values: Optional[Tuple[float, ...]] = None
    laws: Optional[Tuple[Law, ...]] = None

    def __post_init__(self):
        self.parents = tuple(self.parents)
        if (self.cpt is None) == (self.laws is None):
            raise DistributionError(f"node {self.name!r} needs exactly one of cpt / laws")
        if self.cpt is not None:
            self.cpt = np.atleast_2d(np.asarray(self.cpt, dtype=float))
            if np.any(self.cpt < 0) or np.any(np.abs(self.cpt.sum(axis=1) - 1.0) > 1e-9):
                raise DistributionError(f"CPT rows of {self.name!r} must be >= 0 and sum to 1")
            if self.values is not None and len(self.values) != self.cpt.shape[1]:
                raise DistributionError(f"node {self.name!r}: values do not match CPT width")
        else:
            self.laws = tuple(self.laws)

    @property
    def is_leaf_law(self) -> bool:
        return self.laws is not None

    @property
    def n_states(self) -> int:
        return self.cpt.shape[1]


@dataclass
class BayesNet:
    nodes: List[BayesNode]
    layout: VariableLayout
    _order: List[BayesNode] = field(init=False, repr=False)

    def __post_init__(self):
        by_name = {n.name: n for n in self.nodes}
        if len(by_name) != len(self.nodes):
            raise DistributionError("Bayesian network node names must be unique")
        for n in self.nodes:
            for p in n.parents:
                if p not in by_name:
                    raise DistributionError(f"node {n.name!r} has unknown parent {p!r}")
                if by_name[p].is_leaf_law:
                    raise DistributionError(f"leaf node {p!r} cannot be a parent")
        self._order = _toposort(self.nodes)
        for n in self.nodes:
            rows = int(np.prod([by_name[p].n_states for p in n.parents])) if n.parents else 1
            have = n.cpt.shape[0] if n.cpt is not None else len(n.laws)
            if have != rows:
                raise DistributionError(f"node {n.name!r} needs {rows} parent configurations, has {have}")
        covered = {n.variable for n in self.nodes if n.variable is not None}
        missing = {v.name for v in self.layout.variables} - covered
        if missing:
            raise DistributionError(f"layout variables without a node: {sorted(missing)}")

    @property
    def discrete_nodes(self) -> List[BayesNode]:
        return [n for n in self._order if not n.is_leaf_law]

    def _row(self, node: BayesNode, states: Dict[str, int]) -> int:
        by_name = {n.name: n for n in self.nodes}
        r = 0
        for p in node.parents:
            r = r * by_name[p].n_states + states[p]
        return r

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Ancestral sampling, independent of :func:`compile_bayes_net`."""
        by_name = {n.name: n for n in self.nodes}
        states: Dict[str, np.ndarray] = {}
        x = np.zeros((size, self.layout.n_dims))
        for node in self._order:
            row = np.zeros(size, dtype=int)
            for p in node.parents:
                row = row * by_name[p].n_states + states[p]
            if node.is_leaf_law:
                vals = np.empty(size)
                for r in np.unique(row):
                    sel = row == r
                    vals[sel] = node.laws[r].sample(rng, int(sel.sum()))
                _write_var(x, self.layout, node.variable, vals)
                continue
            u = rng.random(size)
            cum = np.cumsum(node.cpt[row], axis=1)
            s = np.minimum((u[:, None] >= cum).sum(axis=1), node.n_states - 1)
            states[node.name] = s
            if node.variable is not None:
                vals = np.asarray(node.values, dtype=float)[s] if node.values is not None else s
                _write_var(x, self.layout, node.variable, vals)
        return x


def _write_var(x, layout, name, vals):
    var = layout[name]
    if var.kind == "categorical":
        cats = np.asarray(vals).astype(int)
        x[:, list(var.dims)] = 0.0
        x[np.arange(x.shape[0]), np.asarray(var.dims)[cats]] = 1.0
    else:
        x[:, var.dims[0]] = vals


def _toposort(nodes: Sequence[BayesNode]) -> List[BayesNode]:
    by_name = {n.name: n for n in nodes}
    order, state = [], {}

    def visit(n):
        if state.get(n.name) == 1:
            raise DistributionError("Bayesian network contains a cycle")
        if state.get(n.name) == 2:
            return
        state[n.name] = 1
        for p in n.parents:
            visit(by_name[p])
        state[n.name] = 2
        order.append(n)

    for n in nodes:
        visit(n)
    return order


def compile_bayes_net(bn: BayesNet, cap: int = 1_000_000) -> Distribution:
    """Expand the network into a mixture with one component per discrete configuration."""
    discrete = bn.discrete_nodes
    total = int(np.prod([n.n_states for n in discrete], dtype=object)) if discrete else 1
    if total > cap:
        raise DistributionError(
            f"Bayesian network has {total} discrete configurations (cap {cap}); "
            "exact compilation by enumeration is infeasible"
        )
    components = []
    for combo in itertools.product(*(range(n.n_states) for n in discrete)):
        states = {n.name: s for n, s in zip(discrete, combo)}
        w = 1.0
        for n in discrete:
            w *= n.cpt[bn._row(n, states), states[n.name]]
            if w == 0:
                break
        if w == 0:
            continue
        factors: Dict[str, Law] = {}
        for n in bn._order:
            if n.variable is None:
                continue
            var = bn.layout[n.variable]
            if n.is_leaf_law:
                factors[n.variable] = n.laws[bn._row(n, states)]
            elif var.kind == "categorical":
                cat = int(n.values[states[n.name]]) if n.values is not None else states[n.name]
                factors[n.variable] = Categorical.one_hot(len(var.dims), cat)
            else:
                val = n.values[states[n.name]] if n.values is not None else states[n.name]
                factors[n.variable] = Point(float(val))
        components.append((w, factors))
    return Distribution(bn.layout, tuple(components))


# --- JSON -------------------------------------------------------------------


def law_from_dict(d: Mapping) -> Law:
    t = d.get("type")
    try:
        if t == "uniform":
            return Uniform(float(d["low"]), float(d["high"]))
        if t in ("normal", "trunc_normal"):
            return TruncNormal(
                float(d["mean"]),
                float(d["std"]),
                float(d.get("low", -math.inf)),
                float(d.get("high", math.inf)),
            )
        if t == "integer":
            if "values" in d:
                return IntegerPMF(tuple(d["values"]), tuple(d["weights"]))
            return IntegerPMF.uniform_range(int(d["low"]), int(d["high"]))
        if t == "point":
            return Point(float(d["value"]))
        if t == "categorical":
            return Categorical(tuple(d["weights"]))
    except KeyError as e:
        raise DistributionError(f"{t} law is missing {e.args[0]!r}") from None
    raise DistributionError(f"unknown law type {t!r}")


def law_to_dict(law: Law) -> dict:
    if isinstance(law, Uniform):
        return {"type": "uniform", "low": law.low, "high": law.high}
    if isinstance(law, TruncNormal):
        d = {"type": "trunc_normal" if law.truncated else "normal", "mean": law.mean, "std": law.std}
        if math.isfinite(law.low):
            d["low"] = law.low
        if math.isfinite(law.high):
            d["high"] = law.high
        return d
    if isinstance(law, IntegerPMF):
        return {"type": "integer", "values": list(law.values), "weights": list(law.weights)}
    if isinstance(law, Point):
        return {"type": "point", "value": law.value}
    if isinstance(law, Categorical):
        return {"type": "categorical", "weights": list(law.weights)}
    raise DistributionError(f"cannot serialise {law!r}")


def layout_from_dict(d: Mapping) -> VariableLayout:
    return VariableLayout(
        tuple(Variable(v["name"], v.get("kind", "continuous"), tuple(v["dims"])) for v in d["variables"])
    )


def layout_to_dict(layout: VariableLayout) -> dict:
    return {"variables": [{"name": v.name, "kind": v.kind, "dims": list(v.dims)} for v in layout.variables]}


def _factors(d: Mapping) -> Dict[str, Law]:
    return {name: law_from_dict(spec) for name, spec in d.items()}


def distribution_from_dict(d: Mapping, layout: VariableLayout, cap: int = 1_000_000) -> Distribution:
    t = d.get("type", "product")
    if t == "product":
        return Distribution.product(layout, _factors(d["factors"]))
    if t == "mixture":
        return Distribution(
            layout, tuple((float(c["weight"]), _factors(c["factors"])) for c in d["components"])
        )
    if t == "bayes_net":
        nodes = []
        for nd in d["nodes"]:
            nodes.append(
                BayesNode(
                    name=nd["name"],
                    parents=tuple(nd.get("parents", ())),
                    variable=nd.get("variable"),
                    cpt=nd.get("cpt"),
                    values=tuple(nd["values"]) if "values" in nd else None,
                    laws=tuple(law_from_dict(x) for x in nd["laws"]) if "laws" in nd else None,
                )
            )
        return compile_bayes_net(BayesNet(nodes, layout), cap=int(d.get("cap", cap)))
    raise DistributionError(f"unknown distribution type {t!r}")


def distribution_to_dict(dist: Distribution) -> dict:
    if len(dist.components) == 1:
        (_, factors), = dist.components
        return {"type": "product", "factors": {k: law_to_dict(v) for k, v in factors.items()}}
    return {
        "type": "mixture",
        "components": [
            {"weight": w, "factors": {k: law_to_dict(v) for k, v in f.items()}}
            for w, f in dist.components
        ],
    }
