"""Parser and interpreter for networks of discrete-stochastic automata."""

from .ast import AutomatonNetwork
from .compile import EngineError, eval_expr
from .parser import ModelError, parse_expr, parse_model, parse_predicate
from .printer import format_expr, format_model
from .runtime import (
    NetState,
    Trace,
    compile_predicate,
    compile_value,
    initial_state,
    run_many,
    simulate,
    step,
    successors,
)

__all__ = [
    "AutomatonNetwork",
    "EngineError",
    "ModelError",
    "NetState",
    "Trace",
    "compile_predicate",
    "compile_value",
    "eval_expr",
    "format_expr",
    "format_model",
    "initial_state",
    "parse_expr",
    "parse_model",
    "parse_predicate",
    "run_many",
    "simulate",
    "step",
    "successors",
]
