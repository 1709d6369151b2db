"""Signal temporal logic monitoring, MILP encodings and controller synthesis.

Modules: :mod:`.formula` / :mod:`.parser` (syntax), :mod:`.trace` (runs and
systems), :mod:`.semantics` (monitor), :mod:`.milp` (model, simplex,
branch-and-bound, LP files), :mod:`.encoder` (Boolean / robust / SNN
encodings), :mod:`.synthesis` (open loop and MPC) and :mod:`.cli`.
"""
from .encoder import EncodingParams, Mode, Semantics, count_variables, encode, encode_snn_lp
from .formula import INF, And, Eventually, Globally, Interval, Not, Or, Predicate, Until
from .parser import parse
from .semantics import finitely_satisfies, robustness, satisfies
from .synthesis import (
    L1InputNorm,
    LInfInputNorm,
    LinearStateInput,
    MaxRobustness,
    mpc,
    open_loop,
    open_loop_star,
)
from .trace import AffineSystem, Run, TrivialSystem

__version__ = "0.1.0"

__all__ = [
    "INF", "And", "Eventually", "Globally", "Interval", "Not", "Or", "Predicate", "Until",
    "parse", "Run", "AffineSystem", "TrivialSystem", "satisfies", "robustness", "finitely_satisfies",
    "EncodingParams", "Mode", "Semantics", "encode", "encode_snn_lp", "count_variables",
    "L1InputNorm", "LInfInputNorm", "LinearStateInput", "MaxRobustness", "open_loop", "open_loop_star", "mpc",
]
