from .bundled import DEFAULT_MAX_BINARIES, solve_bundled
from .external import default_solver_cmd, solve_external
from .lpformat import parse_lp_text, parse_solution_text, write_lp_text, write_solution_text
from .model import (
    Constraint,
    MilpError,
    MilpModel,
    Sense,
    SolutionParseError,
    SolveResult,
    SolveStatus,
    SolverFailure,
    TooManyBinaries,
    Variable,
    VarKind,
    VarRole,
)
from .simplex import solve_lp

__all__ = [
    "DEFAULT_MAX_BINARIES",
    "Constraint",
    "MilpError",
    "MilpModel",
    "Sense",
    "SolutionParseError",
    "SolveResult",
    "SolveStatus",
    "SolverFailure",
    "TooManyBinaries",
    "Variable",
    "VarKind",
    "VarRole",
    "default_solver_cmd",
    "parse_lp_text",
    "parse_solution_text",
    "solve_bundled",
    "solve_external",
    "solve_lp",
    "write_lp_text",
    "write_solution_text",
]
