"""
Pseudo-Boolean satisfiability: normal-form linear constraints over 0/1
variables, counter and watched propagation, cutting-plane learning,
strengthening by probing and the classic hard benchmark families.
"""
from pbsat.model import (
    CONTRADICTION,
    TAUTOLOGY,
    Instance,
    LinearConstraint,
    RawConstraint,
    cardinality,
    clause,
    normalize,
)
from pbsat.search import SolveResult, SolveStatus, SolverConfig, solve, solve_portfolio

__all__ = [
    "CONTRADICTION",
    "TAUTOLOGY",
    "Instance",
    "LinearConstraint",
    "RawConstraint",
    "cardinality",
    "clause",
    "normalize",
    "SolveResult",
    "SolveStatus",
    "SolverConfig",
    "solve",
    "solve_portfolio",
]
