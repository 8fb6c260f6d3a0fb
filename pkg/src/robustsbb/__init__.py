"""Robust spatial branch-and-bound for bilinear programs with uncertain constraints."""
from .bnb import RobustSolution, SolveConfig, Termination, solve_rsbb
from .cutting import infeasibility_test, robust_cutting_set
from .qcqp import ProblemBuilder, QcqpProblem, QuadExpr, UncertainConstraint, VariableBox
from .uncertainty import SampleStore, SetKind, UncertaintySet, worst_case

__all__ = [
    "ProblemBuilder", "QcqpProblem", "QuadExpr", "RobustSolution", "SampleStore", "SetKind",
    "SolveConfig", "Termination", "UncertainConstraint", "UncertaintySet", "VariableBox",
    "infeasibility_test", "robust_cutting_set", "solve_rsbb", "worst_case",
]
__version__ = "0.1.0"
