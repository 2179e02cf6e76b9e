"""Decide ``g(p_1, ..., p_v) >= 0`` from anytime bounds on every ``p_i``.

One engine per term refines ``[l_i, u_i]``; after every completed iteration
the outer function is bounded over the box of current term intervals. The
verdict is Satisfied once the lower end reaches ``epsilon`` and Violated once
the upper end drops below zero.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import expr as E
from .bounds import crown_supported
from .engine import BoundsState, Budget, Engine, EngineConfig
from .interval import Interval, ia_propagate
from .problem import Problem

__all__ = [
    "Verdict",
    "outer_bounds",
    "decide",
    "verify",
    "bound_term",
    "verdict_to_dict",
    "SATISFIED",
    "VIOLATED",
    "UNKNOWN",
]

SATISFIED, VIOLATED, UNKNOWN = "Satisfied", "Violated", "Unknown"

StateSink = Callable[[int, BoundsState], None]


@dataclass(frozen=True)
class Verdict:
    status: str
    g_bounds: Interval
    per_term: Tuple[BoundsState, ...]
    stop_reason: str
    epsilon: float = 0.0
    elapsed: float = 0.0
    warnings: Tuple[str, ...] = field(default=())

    @property
    def decided(self) -> bool:
        return self.status != UNKNOWN


def outer_bounds(g: E.Expr, intervals: Sequence[Tuple[float, float]]) -> Interval:
    """Interval enclosure of ``g`` over the product of the term intervals."""
    lo = np.array([float(a) for a, _ in intervals])
    hi = np.array([float(b) for _, b in intervals])
    return ia_propagate(g, probs=Interval(lo, hi))


def decide(g: E.Expr, intervals: Sequence[Tuple[float, float]], epsilon: float = 0.0) -> Tuple[Optional[str], Interval, Optional[str]]:
    """``(status or None, g interval, stop reason or None)`` for the current term intervals."""
    gi = outer_bounds(g, intervals)
    if gi.lo >= epsilon:
        return SATISFIED, gi, "proved"
    if gi.hi < 0:
        return VIOLATED, gi, "disproved"
    if all(a == b for a, b in intervals):
        try:
            E.eval_outer(g, [a for a, _ in intervals])
        except E.UndefinedValueError:
            return UNKNOWN, gi, "degenerate"
    return None, gi, None


def _engines(problem: Problem, config: EngineConfig, budget: Budget, deadline: Optional[float]) -> List[Engine]:
    return [
        Engine(
            problem.networks[t.network],
            problem.distributions[t.distribution],
            t.expr,
            config,
            Budget(budget.max_iterations, None, budget.target_width),
            deadline,
        )
        for t in problem.terms
    ]


def _warnings(problem: Problem, config: EngineConfig) -> Tuple[str, ...]:
    if config.bounder != "crown":
        return ()
    return tuple(
        f"network {name!r} has non-ReLU activations; CROWN falls back to interval arithmetic"
        for name, net in sorted(problem.networks.items())
        if not crown_supported(net)
    )


def verify(
    problem: Problem,
    config: EngineConfig = EngineConfig(),
    budget: Budget = Budget(max_iterations=10_000),
    epsilon: Optional[float] = None,
    concurrent: bool = False,
    on_state: Optional[StateSink] = None,
) -> Verdict:
    """Run one engine per term until ``g`` is decided or every engine stops.

    Iteration budgets apply per term; the wall-clock budget is shared.
    ``concurrent`` runs the engines in threads; the verdict does not depend on
    the schedule because all term bounds are monotone.
    """
    eps = problem.epsilon if epsilon is None else float(epsilon)
    start = time.perf_counter()
    deadline = None if budget.time_limit is None else start + budget.time_limit
    engines = _engines(problem, config, budget, deadline)
    warn = _warnings(problem, config)
    latest = [e.state for e in engines]

    def finish(status, gi, reason):
        for e in engines:
            e.stop(reason)
        states = tuple(replace(s, stop_reason=s.stop_reason or reason) for s in latest)
        return Verdict(status, gi, states, reason, eps, time.perf_counter() - start, warn)

    status, gi, reason = decide(problem.outer, [(s.l, s.u) for s in latest], eps)
    if status is not None:
        return finish(status, gi, reason)

    if not concurrent:
        while True:
            active = [i for i, e in enumerate(engines) if not e.done]
            if not active:
                break
            for i in active:
                latest[i] = engines[i].step()
                if on_state is not None:
                    on_state(i, latest[i])
                status, gi, reason = decide(problem.outer, [(s.l, s.u) for s in latest], eps)
                if status is not None:
                    return finish(status, gi, reason)
        return finish(UNKNOWN, gi, "budget")

    lock = threading.Lock()
    decided = threading.Event()
    result: list = []
    errors: list = []

    def worker(i: int):
        try:
            eng = engines[i]
            while not eng.done and not decided.is_set():
                st = eng.step()
                with lock:
                    if decided.is_set():
                        return
                    latest[i] = st
                    if on_state is not None:
                        on_state(i, st)
                    s, g_iv, r = decide(problem.outer, [(x.l, x.u) for x in latest], eps)
                    if s is not None:
                        result.append((s, g_iv, r))
                        decided.set()
        except BaseException as exc:  # surfaced in the caller's thread
            errors.append(exc)
            decided.set()

    threads = [threading.Thread(target=worker, args=(i,), daemon=True) for i in range(len(engines))]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        raise errors[0]
    if result:
        return finish(*result[0])
    _, gi, _ = decide(problem.outer, [(s.l, s.u) for s in latest], eps)
    return finish(UNKNOWN, gi, "budget")


def bound_term(
    problem: Problem,
    index: int,
    config: EngineConfig = EngineConfig(),
    budget: Budget = Budget(max_iterations=1000),
    on_state: Optional[StateSink] = None,
) -> Tuple[BoundsState, List[BoundsState]]:
    """Anytime bounds on a single ``p_index`` (0-based); returns the final state and the trace."""
    if not 0 <= index < problem.v:
        raise IndexError(f"term {index + 1} does not exist (problem has {problem.v})")
    t = problem.terms[index]
    eng = Engine(problem.networks[t.network], problem.distributions[t.distribution], t.expr, config, budget)
    trace = []
    for st in eng:
        trace.append(st)
        if on_state is not None:
            on_state(index, st)
    return eng.state, trace


# --- reports ----------------------------------------------------------------


def _num(x: float):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def verdict_to_dict(verdict: Verdict, problem: Problem, config: EngineConfig, budget: Budget,
                    timings: bool = True) -> dict:
    terms = []
    for i, (term, st) in enumerate(zip(problem.terms, verdict.per_term)):
        entry = {
            "index": i + 1,
            "expr": E.to_text(term.expr),
            "l": _num(st.l),
            "u": _num(st.u),
            "iterations": st.t,
            "branches": st.branches,
            "stop_reason": st.stop_reason,
            "parked_mass": _num(st.parked_mass),
        }
        if timings:
            entry["elapsed"] = st.elapsed
        terms.append(entry)
    d = {
        "status": verdict.status,
        "stop_reason": verdict.stop_reason,
        "g_bounds": [_num(verdict.g_bounds.lo), _num(verdict.g_bounds.hi)],
        "epsilon": verdict.epsilon,
        "outer": E.to_text(problem.outer),
        "terms": terms,
        "warnings": list(verdict.warnings),
        "config": {
            "N": config.N,
            "bounds": config.bounder,
            "select": config.select,
            "split": config.split,
            "seed": config.seed,
            "max_iterations": budget.max_iterations,
            "time_limit": budget.time_limit,
            "target_width": budget.target_width,
        },
    }
    if timings:
        d["timings"] = {"total": verdict.elapsed}
    return d
