"""Mixed-binary linear programming: model container, solvers and LP export."""
from .bnb import NodeRecord, SolverConfig, solve, solve_relaxation
from .lpformat import export_lp, read_lp
from .model import Constraint, MilpModel, ModelError, Sense, Solution, Status, Variable, VarKind

__all__ = [
    "Constraint", "MilpModel", "ModelError", "NodeRecord", "Sense", "Solution", "SolverConfig",
    "Status", "Variable", "VarKind", "export_lp", "read_lp", "solve", "solve_relaxation",
]
