"""Budgets, run results and the evaluation bookkeeping shared by all searches."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


class EmptyBudget(ValueError):
    pass


@dataclass(frozen=True)
class Budget:
    max_evals: int | None = None
    max_seconds: float | None = None
    target_fitness: float | None = None

    def __post_init__(self):
        if self.max_evals is None and self.max_seconds is None and self.target_fitness is None:
            raise EmptyBudget("empty budget: no stopping rule given")
        if self.max_evals is not None and self.max_evals <= 0:
            raise EmptyBudget("empty budget: max_evals must be positive")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise EmptyBudget("empty budget: max_seconds must be positive")

    @property
    def deterministic(self) -> bool:
        return self.max_seconds is None


@dataclass
class RunResult:
    best_x: np.ndarray
    best_f: float
    evals: int
    trace: list[tuple[int, float]]
    terminated_by: str
    algorithm: str = ""

    def trace_rows(self):
        return [{"eval_count": n, "best_fitness": f} for n, f in self.trace]


class ObjectiveFailure(RuntimeError):
    pass


@dataclass
class Tracker:
    """Counts evaluations, archives the best point and enforces the budget.

    ``evaluate`` takes a batch and returns fitnesses; rows beyond the remaining
    evaluation budget are not evaluated and come back as +inf.
    """

    objective: object
    budget: Budget
    evals: int = 0
    best_x: np.ndarray | None = None
    best_f: float = np.inf
    trace: list = field(default_factory=list)
    started: float = field(default_factory=time.perf_counter)

    def remaining(self) -> int | None:
        if self.budget.max_evals is None:
            return None
        return self.budget.max_evals - self.evals

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        n = X.shape[0]
        rem = self.remaining()
        take = n if rem is None else max(0, min(n, rem))
        f = np.full(n, np.inf)
        if take:
            try:
                vals = np.asarray(self.objective(X[:take]), dtype=float)
            except ArithmeticError as exc:
                raise ObjectiveFailure(f"objective failed after {self.evals} evaluations: {exc}") from exc
            vals = np.where(np.isnan(vals), np.inf, vals)
            f[:take] = vals
            self.evals += take
            k = int(np.argmin(vals))
            if vals[k] < self.best_f:
                self.best_f = float(vals[k])
                self.best_x = X[k].copy()
            self.trace.append((self.evals, self.best_f))
        return f

    def stop_reason(self) -> str | None:
        b = self.budget
        if b.target_fitness is not None and self.best_f <= b.target_fitness:
            return "target"
        if b.max_evals is not None and self.evals >= b.max_evals:
            return "evals"
        if b.max_seconds is not None and time.perf_counter() - self.started >= b.max_seconds:
            return "time"
        return None

    def result(self, reason: str, algorithm: str = "") -> RunResult:
        return RunResult(self.best_x, self.best_f, self.evals, list(self.trace), reason, algorithm)
