"""Global and local optimizers working in scaled search coordinates."""

from .base import Budget, EmptyBudget, RunResult
from .global_search import GLOBAL_ALGORITHMS, run_global

__all__ = ["Budget", "EmptyBudget", "RunResult", "GLOBAL_ALGORITHMS", "run_global"]
