from .bound import bound_lp, decision_bound, enumerate_decisions, model_free_bound
from .engine import explain, metrics, sparsity
from .inner import InnerResult, inner_solve
from .model import (
    DesiredSpace,
    Explanation,
    LowerBoundResult,
    NodeObjective,
    SolverConfig,
    target_demand,
)
from .warmstart import WarmStart, warm_start

__all__ = [
    "DesiredSpace", "Explanation", "InnerResult", "LowerBoundResult", "NodeObjective",
    "SolverConfig", "WarmStart", "bound_lp", "decision_bound", "enumerate_decisions",
    "explain", "inner_solve", "metrics", "model_free_bound", "sparsity", "target_demand",
    "warm_start",
]
