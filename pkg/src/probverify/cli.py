"""Command-line front end: ``verify``, ``bound`` and ``enumerate``.

Exit codes of ``verify`` and ``enumerate``: 0 Satisfied, 1 Violated,
2 Unknown, 3 error. ``bound`` exits 0 on a clean stop.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import expr as E
from .distributions import Categorical, Distribution, DistributionError, IntegerPMF, Point, box_probability
from .engine import Budget, EngineConfig, SoundnessError
from .interval import IntervalError
from .network import NetworkFormatError, forward
from .problem import Problem, ProblemError, load_problem
from .verifier import SATISFIED, UNKNOWN, VIOLATED, bound_term, verdict_to_dict, verify

__all__ = ["main", "build_parser", "enumerate_problem", "EnumerationError", "EXIT_CODES"]

log = logging.getLogger("probverify")

EXIT_CODES = {SATISFIED: 0, VIOLATED: 1, UNKNOWN: 2}
EXIT_ERROR = 3
ENUMERATION_CAP = 10_000_000
_CHUNK = 65536


class EnumerationError(ValueError):
    pass


# --- enumeration baseline ---------------------------------------------------


def _variable_values(dist: Distribution, var) -> List[tuple]:
    """Every value a variable can take (as a tuple over its dims) in any component."""
    values = set()
    for _, factors in dist.components:
        law = factors[var.name]
        if isinstance(law, Categorical):
            k = len(var.dims)
            for c, w in enumerate(law.weights):
                if w > 0:
                    values.add(tuple(1.0 if j == c else 0.0 for j in range(k)))
        elif isinstance(law, IntegerPMF):
            values.update((v,) for v in law.values)
        elif isinstance(law, Point):
            values.add((float(law.value),))
        else:
            raise EnumerationError(
                f"variable {var.name!r} has a continuous law; enumeration needs a discrete layout"
            )
    return sorted(values)


def enumerate_points(dist: Distribution, cap: int = ENUMERATION_CAP) -> np.ndarray:
    layout = dist.layout
    per_var = [_variable_values(dist, v) for v in layout.variables]
    total = math.prod(len(v) for v in per_var)
    if total > cap:
        raise EnumerationError(f"{total} points exceed the enumeration cap of {cap}")
    X = np.empty((total, layout.n_dims))
    # row-major over variables, matching itertools.product order
    idx = np.unravel_index(np.arange(total), [len(v) for v in per_var])
    for var, values, ix in zip(layout.variables, per_var, idx):
        X[:, list(var.dims)] = np.asarray(values, dtype=float)[ix]
    return X


def enumerate_problem(problem: Problem, cap: int = ENUMERATION_CAP, epsilon: Optional[float] = None) -> dict:
    """Exact ``p_i`` by summing point probabilities where ``f_i >= 0``; then ``g`` and a verdict."""
    eps = problem.epsilon if epsilon is None else float(epsilon)
    cache = {}
    ps, n_points = [], 0
    for term in problem.terms:
        dist = problem.distributions[term.distribution]
        if term.distribution not in cache:
            X = enumerate_points(dist, cap)
            w = np.concatenate(
                [np.atleast_1d(box_probability(dist, X[i:i + _CHUNK], X[i:i + _CHUNK])) for i in range(0, len(X), _CHUNK)]
            )
            cache[term.distribution] = (X, w)
        X, w = cache[term.distribution]
        n_points = max(n_points, len(X))
        net = problem.networks[term.network]
        sat = np.concatenate(
            [np.atleast_1d(E.eval_inner(term.expr, X[i:i + _CHUNK], forward(net, X[i:i + _CHUNK]))) >= 0
             for i in range(0, len(X), _CHUNK)]
        )
        ps.append(math.fsum(w[sat]))
    try:
        g = float(E.eval_outer(problem.outer, ps))
    except E.UndefinedValueError:
        return {"status": UNKNOWN, "stop_reason": "degenerate", "g": None, "p": ps, "points": n_points, "epsilon": eps}
    if g >= eps:
        status, reason = SATISFIED, "proved"
    elif g < 0:
        status, reason = VIOLATED, "disproved"
    else:
        status, reason = UNKNOWN, "margin"
    return {"status": status, "stop_reason": reason, "g": _num(g), "p": ps, "points": n_points, "epsilon": eps}


def _num(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


# --- argument handling ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="probverify", description="Sound anytime probabilistic verification of ReLU networks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("problem", help="problem JSON file")
        sp.add_argument("--select", choices=("prob", "prob-log-bounds"), default="prob")
        sp.add_argument("--split", choices=("longest-edge", "babsb"), default="longest-edge")
        sp.add_argument("--bounds", choices=("ia", "crown"), default="ia")
        sp.add_argument("--N", type=int, default=128, help="branches bounded per iteration")
        sp.add_argument("--max-iterations", type=int, default=None, help="iteration budget per term")
        sp.add_argument("--time-limit", type=float, default=None, help="wall-clock budget in seconds")
        sp.add_argument("--target-width", type=float, default=None, help="stop once u - l is this small")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="write output here instead of stdout")
        sp.add_argument("--no-timings", action="store_true", help="omit wall-clock values (for golden files)")

    v = sub.add_parser("verify", help="decide g >= epsilon")
    common(v)
    v.add_argument("--epsilon", type=float, default=None)
    v.add_argument("--trace", default=None, help="CSV of every term iteration")
    v.add_argument("--concurrent", action="store_true", help="run term engines in threads")

    b = sub.add_parser("bound", help="anytime bounds on a single p_i, as CSV")
    common(b)
    b.add_argument("--term", type=int, default=1, help="1-based term index")

    e = sub.add_parser("enumerate", help="exact evaluation on an all-discrete layout")
    e.add_argument("problem")
    e.add_argument("--epsilon", type=float, default=None)
    e.add_argument("--cap", type=int, default=ENUMERATION_CAP)
    e.add_argument("--out", default=None)
    return p


def _config(args) -> EngineConfig:
    return EngineConfig(N=args.N, bounder=args.bounds, select=args.select, split=args.split, seed=args.seed)


def _budget(args, default_iterations: int) -> Budget:
    b = Budget(args.max_iterations, args.time_limit, args.target_width)
    if not b.bounded:
        b = Budget(max_iterations=default_iterations)
    return b


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_verify(args) -> int:
    problem = load_problem(args.problem)
    config, budget = _config(args), _budget(args, 10_000)
    rows = []

    def sink(i, st):
        rows.append((i + 1, st.t, _fmt(st.l), _fmt(st.u), st.branches, "" if args.no_timings else f"{st.elapsed:.6f}"))

    verdict = verify(problem, config, budget, args.epsilon, args.concurrent, sink if args.trace else None)
    report = verdict_to_dict(verdict, problem, config, budget, timings=not args.no_timings)
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["term", "t", "l", "u", "branches", "elapsed"])
            w.writerows(rows)
    for msg in verdict.warnings:
        log.warning(msg)
    return EXIT_CODES[verdict.status]


def cmd_bound(args) -> int:
    problem = load_problem(args.problem)
    if not 1 <= args.term <= problem.v:
        raise ProblemError(f"--term must lie in 1..{problem.v}")
    _, trace = bound_term(problem, args.term - 1, _config(args), _budget(args, 1000))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "l", "u", "branches", "elapsed"])
    for st in trace:
        w.writerow([st.t, _fmt(st.l), _fmt(st.u), st.branches, "" if args.no_timings else f"{st.elapsed:.6f}"])
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_enumerate(args) -> int:
    problem = load_problem(args.problem)
    report = enumerate_problem(problem, args.cap, args.epsilon)
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_CODES[report["status"]]


_COMMANDS = {"verify": cmd_verify, "bound": cmd_bound, "enumerate": cmd_enumerate}
_USER_ERRORS = (
    OSError,
    ProblemError,
    NetworkFormatError,
    DistributionError,
    E.ExprError,
    EnumerationError,
    IntervalError,
    ValueError,
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("PROBVERIFY_LOG_LEVEL", "WARNING").upper(), format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SoundnessError as e:
        log.error("internal error: %s", e)
        return EXIT_ERROR
    except _USER_ERRORS as e:
        log.error("%s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
