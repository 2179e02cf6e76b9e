"""Anytime probability bounds by branch and bound over input boxes.

The engine keeps a priority queue of unresolved boxes. Each iteration it
takes the highest-scoring batch, bounds the satisfaction function on it,
credits boxes whose bounds are entirely ``>= 0`` to the lower bound and boxes
whose bounds are entirely ``< 0`` against the upper bound, and bisects the
rest. Children are bounded by interval arithmetic as they are created, so a
child that is already decided is credited in the same iteration.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from . import expr as E
from .bounds import compute_bounds, compute_bounds_ia
from .distributions import Distribution, Point, box_probability, support_box
from .interval import Box, Interval

__all__ = [
    "Branch",
    "BoundsState",
    "Budget",
    "EngineConfig",
    "Engine",
    "SoundnessError",
    "SELECT_HEURISTICS",
    "SPLIT_HEURISTICS",
    "select",
    "prune",
    "update",
    "score",
    "split_candidates",
    "run",
]

SELECT_HEURISTICS = ("prob", "prob-log-bounds")
SPLIT_HEURISTICS = ("longest-edge", "babsb")
UPDATE_TOL = 1e-9


class SoundnessError(RuntimeError):
    """The lower bound overtook the upper bound: a bounder or mass is wrong."""


@dataclass(frozen=True, eq=False)
class Branch:
    box: Box
    mass: float
    cached_bounds: Interval
    serial: int


@dataclass(frozen=True)
class BoundsState:
    l: float
    u: float
    t: int
    branches: int = 0
    elapsed: float = 0.0
    stop_reason: Optional[str] = None
    parked_mass: float = 0.0

    @property
    def width(self) -> float:
        return self.u - self.l


@dataclass(frozen=True)
class Budget:
    max_iterations: Optional[int] = None
    time_limit: Optional[float] = None
    target_width: Optional[float] = None

    @property
    def bounded(self) -> bool:
        return any(v is not None for v in (self.max_iterations, self.time_limit, self.target_width))


@dataclass(frozen=True)
class EngineConfig:
    N: int = 128
    bounder: str = "ia"
    select: str = "prob"
    split: str = "longest-edge"
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("batch size N must be >= 1")
        if self.bounder not in ("ia", "crown"):
            raise ValueError(f"unknown bounder {self.bounder!r}")
        if self.select not in SELECT_HEURISTICS:
            raise ValueError(f"unknown selection heuristic {self.select!r}")
        if self.split not in SPLIT_HEURISTICS:
            raise ValueError(f"unknown split heuristic {self.split!r}")


# --- elementary steps -------------------------------------------------------


def score(branch: Branch, heuristic: str) -> float:
    if heuristic == "prob":
        return branch.mass
    width = float(branch.cached_bounds.hi - branch.cached_bounds.lo)
    if not math.isfinite(width):
        return 0.0
    return branch.mass / math.log(math.e + width)


def select(heap: list, N: int) -> List[Branch]:
    """Pop the ``N`` best entries of a heap of ``(-score, serial, branch)``."""
    return [heapq.heappop(heap)[2] for _ in range(min(N, len(heap)))]


def prune(batch: List[Branch], lower, upper) -> Tuple[List[Branch], float, float]:
    """Split ``batch`` into undecided branches, satisfied mass and violated mass."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    masses = np.array([b.mass for b in batch])
    sat = lower >= 0
    viol = upper < 0
    rest = [b for b, s, v in zip(batch, sat, viol) if not (s or v)]
    return rest, math.fsum(masses[sat]), math.fsum(masses[viol])


def update(l: float, u: float, sat_mass: float, viol_mass: float) -> Tuple[float, float]:
    if sat_mass < 0 or viol_mass < 0:
        raise ValueError("pruned masses must be non-negative")
    l_new = min(l + sat_mass, 1.0)
    u_new = max(u - viol_mass, 0.0)
    if l_new > u_new + UPDATE_TOL:
        raise SoundnessError(f"lower bound {l_new!r} exceeds upper bound {u_new!r}")
    if l_new > u_new:
        # rounding in the mass sums; both bounds meet in the middle
        l_new = u_new = 0.5 * (l_new + u_new)
    return l_new, u_new


def _splittable(lo: np.ndarray, hi: np.ndarray, kinds: List[str]) -> np.ndarray:
    return hi > lo


def split_candidates(box: Box, d: int, kinds: List[str], groups: List[Tuple[int, ...]], atoms) -> Tuple[Box, Box]:
    """The two children of ``box`` along dimension ``d`` per the dimension's kind."""
    lo1, hi1 = box.lo.copy(), box.hi.copy()
    lo2, hi2 = box.lo.copy(), box.hi.copy()
    kind = kinds[d]
    if kind == "continuous":
        mid = lo1[d] + 0.5 * (hi1[d] - lo1[d])
        if not lo1[d] < mid < hi1[d]:
            # adjacent floats: the two endpoints are the only points left
            hi1[d], lo2[d] = lo1[d], hi2[d]
        else:
            hi1[d] = mid
            # an atom on the cut would otherwise be counted by both children
            lo2[d] = np.nextafter(mid, np.inf) if mid in atoms.get(d, ()) else mid
    elif kind == "integer":
        left = math.floor(lo1[d] + 0.5 * (hi1[d] - lo1[d]))
        hi1[d] = left
        lo2[d] = left + 1
    else:
        for g in groups[d]:
            lo1[g] = hi1[g] = 0.0
        lo1[d] = hi1[d] = 1.0
        lo2[d] = hi2[d] = 0.0
    return Box(lo1, hi1), Box(lo2, hi2)


# --- engine -----------------------------------------------------------------


class Engine:
    """Bounds ``P(f(x, N(x)) >= 0)`` for ``x ~ dist``; single-threaded and deterministic."""

    def __init__(self, net, dist: Distribution, expr: E.Expr, config: EngineConfig = EngineConfig(),
                 budget: Budget = Budget(), deadline: Optional[float] = None):
        if net.input_dim != dist.layout.n_dims:
            raise ValueError(
                f"network expects {net.input_dim} inputs but the layout has {dist.layout.n_dims} dims"
            )
        self.net = net
        self.dist = dist
        self.expr = expr
        self.config = config
        self.budget = budget
        self.kinds = dist.layout.dim_kinds()
        self.groups: List[Tuple[int, ...]] = [()] * dist.layout.n_dims
        for v in dist.layout.variables:
            for d in v.dims:
                self.groups[d] = v.dims
        self.atoms = {}
        for _, factors in dist.components:
            for v in dist.layout.variables:
                if v.kind == "continuous" and isinstance(factors[v.name], Point):
                    self.atoms.setdefault(v.dims[0], set()).add(float(factors[v.name].value))
        self._rng = np.random.default_rng(config.seed)
        self._heap: list = []
        self._serial = 0
        self.parked: List[Branch] = []
        self.l, self.u, self.t = 0.0, 1.0, 0
        self.stop_reason: Optional[str] = None
        self._start = time.perf_counter()
        self._deadline = deadline
        if budget.time_limit is not None:
            own = self._start + budget.time_limit
            self._deadline = own if deadline is None else min(deadline, own)

        root = support_box(dist)
        mass = float(box_probability(dist, root.lo, root.hi))
        if mass > 0:
            self._push(root, mass, compute_bounds_ia(net, expr, root))
        if not self._heap:
            self.stop_reason = "exhausted"
        elif budget.max_iterations is not None and budget.max_iterations <= 0:
            self.stop_reason = "max_iterations"

    # queue bookkeeping

    def _push(self, box: Box, mass: float, bounds: Interval) -> None:
        b = Branch(box, mass, bounds, self._serial)
        self._serial += 1
        heapq.heappush(self._heap, (-score(b, self.config.select), b.serial, b))

    @property
    def branches(self) -> List[Branch]:
        return [entry[2] for entry in self._heap]

    @property
    def remaining_mass(self) -> float:
        return math.fsum([e[2].mass for e in self._heap] + [b.mass for b in self.parked])

    @property
    def parked_mass(self) -> float:
        return math.fsum(b.mass for b in self.parked)

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self._start

    @property
    def state(self) -> BoundsState:
        return BoundsState(
            self.l, self.u, self.t, len(self._heap) + len(self.parked), self.elapsed,
            self.stop_reason, self.parked_mass,
        )

    @property
    def done(self) -> bool:
        return self.stop_reason is not None

    # one iteration

    def _bound_batch(self, batch: List[Branch]) -> Tuple[np.ndarray, np.ndarray]:
        cached_lo = np.array([float(b.cached_bounds.lo) for b in batch])
        cached_hi = np.array([float(b.cached_bounds.hi) for b in batch])
        if self.config.bounder == "ia":
            return cached_lo, cached_hi
        lo = np.stack([b.box.lo for b in batch])
        hi = np.stack([b.box.hi for b in batch])
        res = compute_bounds(self.net, self.expr, Interval(lo, hi), self.config.bounder)
        # both enclosures are sound, so their intersection is too
        return np.maximum(cached_lo, res.interval.lo), np.minimum(cached_hi, res.interval.hi)

    def _children(self, batch: List[Branch]) -> List[Tuple[Box, Interval]]:
        pairs: List[Tuple[Box, Box]] = []
        if self.config.split == "longest-edge":
            for b in batch:
                ok = _splittable(b.box.lo, b.box.hi, self.kinds)
                widths = np.where(ok, b.box.hi - b.box.lo, -1.0)
                pairs.append(split_candidates(b.box, int(np.argmax(widths)), self.kinds, self.groups, self.atoms))
            boxes = [c for p in pairs for c in p]
            iv = self._ia(boxes)
            return [(c, Interval(float(iv.lo[i]), float(iv.hi[i]))) for i, c in enumerate(boxes)]

        # BaBSB: bound both children of every candidate dimension in one batch
        cands: List[Tuple[int, Box, Box]] = []
        for k, b in enumerate(batch):
            for d in np.nonzero(_splittable(b.box.lo, b.box.hi, self.kinds))[0]:
                c1, c2 = split_candidates(b.box, int(d), self.kinds, self.groups, self.atoms)
                cands.append((k, c1, c2))
        iv = self._ia([c for _, c1, c2 in cands for c in (c1, c2)])
        lo = np.asarray(iv.lo).reshape(-1, 2)
        hi = np.asarray(iv.hi).reshape(-1, 2)
        sc = np.round(np.maximum(lo.max(axis=1), -hi.min(axis=1)), 4)
        owner = np.array([k for k, _, _ in cands])
        out = []
        for k in range(len(batch)):
            idx = np.nonzero(owner == k)[0]
            best = idx[sc[idx] == sc[idx].max()]
            j = int(best[0]) if best.size == 1 else int(self._rng.choice(best))
            _, c1, c2 = cands[j]
            out.append((c1, Interval(float(lo[j, 0]), float(hi[j, 0]))))
            out.append((c2, Interval(float(lo[j, 1]), float(hi[j, 1]))))
        return out

    def _ia(self, boxes: List[Box]) -> Interval:
        if not boxes:
            return Interval(np.zeros(0), np.zeros(0))
        lo = np.stack([b.lo for b in boxes])
        hi = np.stack([b.hi for b in boxes])
        return compute_bounds_ia(self.net, self.expr, Interval(lo, hi))

    def step(self) -> BoundsState:
        """Run one iteration and return the new state (with a stop reason if finished)."""
        if self.done:
            return self.state
        batch = select(self._heap, self.config.N)
        sat = viol = 0.0
        if batch:
            lower, upper = self._bound_batch(batch)
            rest, sat, viol = prune(batch, lower, upper)
            splittable = []
            for b in rest:
                if _splittable(b.box.lo, b.box.hi, self.kinds).any():
                    splittable.append(b)
                else:
                    self.parked.append(b)
            children = self._children(splittable) if splittable else []
            if children:
                lo = np.stack([c.lo for c, _ in children])
                hi = np.stack([c.hi for c, _ in children])
                masses = np.atleast_1d(box_probability(self.dist, lo, hi))
                sat_c, viol_c = [], []
                for (c, iv), m in zip(children, masses):
                    if m <= 0:
                        continue
                    if iv.lo >= 0:
                        sat_c.append(m)
                    elif iv.hi < 0:
                        viol_c.append(m)
                    else:
                        self._push(c, float(m), iv)
                sat = math.fsum([sat] + sat_c)
                viol = math.fsum([viol] + viol_c)
        self.l, self.u = update(self.l, self.u, sat, viol)
        self.t += 1
        self.stop_reason = self._check_stop()
        return self.state

    def _check_stop(self) -> Optional[str]:
        b = self.budget
        if not self._heap:
            return "exhausted"
        if b.target_width is not None and self.u - self.l <= b.target_width:
            return "target_width"
        if b.max_iterations is not None and self.t >= b.max_iterations:
            return "max_iterations"
        if self._deadline is not None and time.perf_counter() >= self._deadline:
            return "time_limit"
        return None

    def stop(self, reason: str) -> None:
        """Mark the stream finished from outside (e.g. the verdict is decided)."""
        if self.stop_reason is None:
            self.stop_reason = reason

    def __iter__(self) -> Iterator[BoundsState]:
        while not self.done:
            yield self.step()


def run(net, dist: Distribution, expr: E.Expr, config: EngineConfig = EngineConfig(),
        budget: Budget = Budget()) -> Iterator[BoundsState]:
    """Stream of bound states, one per iteration, ending at the first stop condition."""
    return iter(Engine(net, dist, expr, config, budget))
