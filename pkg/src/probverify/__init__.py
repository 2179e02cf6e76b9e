"""Sound anytime bounds on probabilistic properties of ReLU networks.

The main entry points are :func:`verify` (decide ``g(p_1..p_v) >= epsilon``)
and :func:`bound_term` (anytime bounds on one probability), both operating on
a :class:`Problem`.
"""

from .bounds import compute_bounds, compute_bounds_crown, compute_bounds_ia
from .distributions import (
    BayesNet,
    BayesNode,
    Categorical,
    Distribution,
    IntegerPMF,
    Point,
    TruncNormal,
    Uniform,
    Variable,
    VariableLayout,
    box_probability,
    compile_bayes_net,
    sample,
    support_box,
)
from .engine import BoundsState, Budget, Engine, EngineConfig, run
from .expr import eval_inner, eval_outer, parse_expr, to_text
from .interval import Box, Interval, ia_propagate
from .network import Layer, Network, forward, load_network, save_network
from .problem import (
    Problem,
    Term,
    build_demographic_parity,
    build_qualified_parity,
    build_robustness,
    build_violation_rate,
    load_problem,
    save_problem,
)
from .verifier import Verdict, bound_term, outer_bounds, verify

__version__ = "0.1.0"

__all__ = [
    "compute_bounds",
    "compute_bounds_crown",
    "compute_bounds_ia",
    "BayesNet",
    "BayesNode",
    "Categorical",
    "Distribution",
    "IntegerPMF",
    "Point",
    "TruncNormal",
    "Uniform",
    "Variable",
    "VariableLayout",
    "box_probability",
    "compile_bayes_net",
    "sample",
    "support_box",
    "BoundsState",
    "Budget",
    "Engine",
    "EngineConfig",
    "run",
    "eval_inner",
    "eval_outer",
    "parse_expr",
    "to_text",
    "Box",
    "Interval",
    "ia_propagate",
    "Layer",
    "Network",
    "forward",
    "load_network",
    "save_network",
    "Problem",
    "Term",
    "build_demographic_parity",
    "build_qualified_parity",
    "build_robustness",
    "build_violation_rate",
    "load_problem",
    "save_problem",
    "Verdict",
    "bound_term",
    "outer_bounds",
    "verify",
]
