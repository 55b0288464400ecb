"""Two-stage controller: a population search hands its best point to a local refiner."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..params import ParameterSpace
from .base import Budget, RunResult
from .global_search import run_global
from .local import LOCAL_ALGORITHMS, LocalResult, run_local

HYBRID_NAMES = {"GA": "HGA", "QGA": "HQGA", "PSO": "HPSO", "FWA": "HFWA"}
CLAMP_FLAG_TOL = 1e-6


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage} stage failed: {exc}")
        self.stage = stage


@dataclass(frozen=True)
class HybridConfig:
    global_alg: str = "PSO"
    local_alg: str = "bfgs"
    switch: Budget = field(default_factory=lambda: Budget(max_evals=5000))
    local_tol: float = 1e-6
    local_max_iter: int = 200
    local_max_evals: int | None = None
    global_params: Mapping | None = None

    def __post_init__(self):
        if self.local_alg not in LOCAL_ALGORITHMS:
            raise ValueError(f"unknown local algorithm {self.local_alg!r}")

    @property
    def name(self) -> str:
        return HYBRID_NAMES.get(self.global_alg.upper(), f"H{self.global_alg.upper()}")


@dataclass
class HybridResult:
    global_part: RunResult
    local_part: LocalResult
    total_evals: int
    f_final: float
    x_final: np.ndarray
    clamped: bool = False

    def trace_rows(self):
        """Combined (stage, eval-or-iteration, f) rows."""
        rows = [{"stage": "global", "step": n, "f": f} for n, f in self.global_part.trace]
        rows += [{"stage": "local", "step": i, "f": f} for i, f in self.local_part.trace]
        return rows


def refine(
    objective,
    space: ParameterSpace,
    x0: np.ndarray,
    f0: float,
    local_alg: str = "bfgs",
    tol: float = 1e-6,
    max_iter: int = 200,
    max_evals: int | None = None,
) -> tuple[LocalResult, np.ndarray, float, bool, int]:
    """Run a local refiner from ``x0`` and sanitize its output.

    Returns (local result, final x, final f, clamped flag, extra evals).  The
    refined point is clamped into the box; if that moves it, f is
    re-evaluated.  A refinement that ends worse than ``f0`` is discarded.
    """
    scalar = lambda x: float(objective(np.asarray(x, dtype=float)[None, :])[0])
    residual_fn = getattr(objective, "residuals", None)
    local = run_local(
        local_alg,
        scalar,
        x0,
        tol=tol,
        max_iter=max_iter,
        residual_fn=residual_fn,
        # one evaluation is held back for a possible post-clamp re-evaluation
        max_evals=None if max_evals is None else max(max_evals - 1, 1),
        residual_offset=getattr(objective, "residual_offset", 0.0),
    )
    extra = 0
    x = space.constrain(local.x_final, "clamp")
    f = local.f_final
    clamped = bool(np.max(np.abs(x - local.x_final)) > CLAMP_FLAG_TOL)
    if not np.array_equal(x, local.x_final):
        try:
            f = scalar(x)
        except ArithmeticError:
            f = np.inf
        extra = 1
    if not f <= f0:
        x, f = np.array(x0, dtype=float), f0
    return local, x, float(f), clamped, extra


def run_hybrid(cfg: HybridConfig, objective, space: ParameterSpace, seed) -> HybridResult:
    try:
        glob = run_global(cfg.global_alg, objective, space, cfg.switch, seed, cfg.global_params)
    except Exception as exc:
        raise StageError("global", exc) from exc
    try:
        local, x, f, clamped, extra = refine(
            objective, space, glob.best_x, glob.best_f, cfg.local_alg, cfg.local_tol, cfg.local_max_iter, cfg.local_max_evals
        )
    except Exception as exc:
        raise StageError("local", exc) from exc
    return HybridResult(glob, local, glob.evals + local.evals + extra, f, x, clamped)
