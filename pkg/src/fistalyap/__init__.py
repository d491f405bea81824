"""Accelerated gradient / FISTA in the critical regime, with Lyapunov diagnostics."""

from .checks import CheckReport
from .problems import CompositeProblem, catalog, soft_threshold
from .solver import SolverConfig, SolverTrace, run
from .tseq import StepRule, parse_rule

__version__ = "0.1.0"

__all__ = [
    "CheckReport",
    "CompositeProblem",
    "SolverConfig",
    "SolverTrace",
    "StepRule",
    "catalog",
    "parse_rule",
    "run",
    "soft_threshold",
]
