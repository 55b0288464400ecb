"""Analytic test landscapes and a streaming grid-enumeration oracle."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .params import ParameterSpace, linear_space


def eval_Y(x1, x2):
    """Y = x1 sin(4 pi x1) + x2 sin(20 pi x2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return x1 * np.sin(4.0 * np.pi * x1) + x2 * np.sin(20.0 * np.pi * x2)


def eval_Z(x1, x2):
    """Radially symmetric ring landscape with global minimum -1 at the origin."""
    r2 = np.asarray(x1, dtype=float) ** 2 + np.asarray(x2, dtype=float) ** 2
    return (np.sin(np.sqrt(r2)) ** 2 - 0.5) / (1.0 + 0.001 * r2**3) ** 2 - 0.5


def _z_residuals(x):
    # Z + 1 = |x|^2 * s with s -> 1 at the origin, so r = x * sqrt(s) gives
    # |r|^2 - 1 = Z and a full-rank Jacobian at the minimum.  s is written
    # without the cancellation in (Z + 1) / |x|^2.
    x = np.asarray(x, dtype=float)
    r2 = float(x @ x)
    d = 1.0 + 0.001 * r2**3
    sinc = np.sinc(np.sqrt(r2) / np.pi)
    s = (sinc**2 + 0.0005 * r2**2 * (1.0 + d)) / d**2
    return x * np.sqrt(s)


Y_FLOOR = -(12.1 + 5.8) - 1.0  # strictly below Y on and around its box


def _y_residuals(x):
    return np.array([np.sqrt(float(eval_Y(x[0], x[1])) - Y_FLOOR)])


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    evaluator: Callable
    bounds: tuple[tuple[float, float], ...]
    known_min: tuple[tuple[float, float], float] | None = None
    residual_fn: Callable | None = None
    # constant c with f = |residuals|^2 + c
    residual_offset: float = 0.0

    def space(self) -> ParameterSpace:
        return linear_space(self.bounds)

    def __call__(self, X) -> np.ndarray:
        """Batch objective: rows of X are points."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.evaluator(X[:, 0], X[:, 1])

    def fitness(self, x) -> float:
        return float(self.evaluator(x[0], x[1]))

    def residuals(self, x) -> np.ndarray:
        if self.residual_fn is None:
            raise NotImplementedError(f"{self.name} has no residual form")
        return self.residual_fn(x)


# The published (11.875, 5.775) / -17.65 is a rounding of the refined optimum.
Y_TRUE_MIN = -17.650288554558315
Y_TRUE_ARGMIN = (11.87553, 5.77504)

BENCH_Y = BenchmarkProblem(
    "Y",
    eval_Y,
    ((-3.0, 12.1), (4.1, 5.8)),
    known_min=((11.875, 5.775), -17.65),
    residual_fn=_y_residuals,
    residual_offset=Y_FLOOR,
)

BENCH_Z = BenchmarkProblem(
    "Z",
    eval_Z,
    ((-4.0, 4.0), (-4.0, 4.0)),
    known_min=((0.0, 0.0), -1.0),
    residual_fn=_z_residuals,
    residual_offset=-1.0,
)

BENCHMARKS = {"Y": BENCH_Y, "Z": BENCH_Z}


@dataclass(frozen=True)
class GridResult:
    location: tuple[float, float]
    value: float
    index: tuple[int, int]
    cell: tuple[float, float]


def grid_enumerate(
    problem: BenchmarkProblem,
    n_per_axis: int,
    bounds: Sequence[tuple[float, float]] | None = None,
    stripe_rows: int = 256,
    workers: int = 1,
) -> GridResult:
    """Exhaustive minimum over the inclusive uniform grid.

    Rows follow the first axis.  The grid is evaluated in row stripes and
    never materialized in full; ties go to the smallest row-major index no
    matter how stripes are scheduled.
    """
    if n_per_axis < 2:
        raise ValueError("need at least 2 points per axis")
    if len(problem.bounds) != 2:
        raise ValueError("grid enumeration supports 2-D problems only")
    (a0, b0), (a1, b1) = bounds or problem.bounds
    xs = np.linspace(a0, b0, n_per_axis)
    ys = np.linspace(a1, b1, n_per_axis)

    def stripe(start: int) -> tuple[float, int]:
        rows = xs[start : start + stripe_rows]
        vals = problem.evaluator(rows[:, None], ys[None, :])
        k = int(np.argmin(vals))  # first occurrence within the stripe
        return float(vals.flat[k]), start * n_per_axis + k

    starts = range(0, n_per_axis, stripe_rows)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(stripe, starts))
    else:
        parts = [stripe(s) for s in starts]
    best_val, best_idx = min(parts)  # ties resolved by linear index
    i, j = divmod(best_idx, n_per_axis)
    return GridResult(
        location=(float(xs[i]), float(ys[j])),
        value=best_val,
        index=(i, j),
        cell=((b0 - a0) / (n_per_axis - 1), (b1 - a1) / (n_per_axis - 1)),
    )


def certify(problem: BenchmarkProblem, point, half_width_cells: float = 1.0, n: int = 201) -> GridResult:
    """Fine local grid around ``point``, used to certify a reported minimum."""
    base = np.array([hi - lo for lo, hi in problem.bounds]) / 10_000
    x = np.asarray(point, dtype=float)
    bounds = [(x[k] - half_width_cells * base[k], x[k] + half_width_cells * base[k]) for k in range(2)]
    return grid_enumerate(problem, n, bounds=bounds)


def refined_minimum(problem: BenchmarkProblem, n_coarse: int = 2000) -> tuple[np.ndarray, float]:
    """Grid minimum polished by a nested zoom; reference value for tolerance checks."""
    res = grid_enumerate(problem, n_coarse)
    center = np.array(res.location)
    width = np.array(res.cell)
    for _ in range(8):
        bounds = [(center[k] - width[k], center[k] + width[k]) for k in range(2)]
        r = grid_enumerate(problem, 41, bounds=bounds)
        center = np.array(r.location)
        width = width / 10.0
    return center, float(problem.evaluator(center[0], center[1]))
