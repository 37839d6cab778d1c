"""One-sample stochastic Frank-Wolfe with unbiased momentum correction."""
from . import constraints, diagnostics, estimators, kernels, oracles, solvers
from .constraints import L1Ball, L2Ball, Box, BudgetedBox, UnitSimplex, make_constraint
from .errors import CapabilityError, ConfigError, DomainError, InvalidInputError, OneSFWError
from .estimators import DeltaOption
from .oracles import make_problem
from .solvers import (
    Mode,
    RunResult,
    SolverConfig,
    run,
    run_momentum_fw,
    run_oblivious_one_sfw,
    run_one_sfw,
)

__version__ = "0.1.0"

__all__ = [
    "Box", "BudgetedBox", "CapabilityError", "ConfigError", "DeltaOption", "DomainError",
    "InvalidInputError", "L1Ball", "L2Ball", "Mode", "OneSFWError", "RunResult", "SolverConfig",
    "UnitSimplex", "constraints", "diagnostics", "estimators", "kernels", "make_constraint",
    "make_problem", "oracles", "run", "run_momentum_fw", "run_oblivious_one_sfw", "run_one_sfw",
    "solvers",
]
