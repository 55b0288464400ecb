"""Logarithmic phase sensitivities and SVD identifiability diagnostics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .objective import FitProblem

DEFAULT_REL_STEP = 0.01
DEGENERATE_TOL = 0.0


@dataclass(frozen=True, eq=False)
class SensitivityCurve:
    """S(f) = d(phase in degrees) / d(ln p), one entry per frequency."""

    parameter: str
    freqs: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        if np.shape(self.freqs) != np.shape(self.S):
            raise ValueError("freqs and S must have the same length")

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.S))) if self.S.size else 0.0


@dataclass(frozen=True, eq=False)
class IdentifiabilityReport:
    parameters: tuple[str, ...]
    singular_values: np.ndarray
    directions: np.ndarray  # rows are right singular vectors
    jacobian: np.ndarray
    degenerate: bool

    @property
    def condition(self) -> float:
        s = self.singular_values
        if s.size == 0 or s[-1] == 0:
            return np.inf
        return float(s[0] / s[-1])

    def table(self) -> list[dict]:
        """One row per singular value with its dominant parameter."""
        rows = []
        for i, (sv, vec) in enumerate(zip(self.singular_values, self.directions)):
            j = int(np.argmax(np.abs(vec)))
            rows.append({"index": i, "sigma": float(sv), "dominant": self.parameters[j], "weight": float(vec[j])})
        return rows


def _nominal_value(problem: FitProblem, param: str) -> float:
    vals = dict(problem.space.fixed)
    vals.update(problem.nominal or {})
    if param not in vals:
        raise KeyError(f"no nominal value for parameter {param!r}")
    return float(vals[param])


def sensitivity(
    problem: FitProblem,
    param: str,
    rel_step: float = DEFAULT_REL_STEP,
    at: Mapping[str, float] | None = None,
) -> SensitivityCurve:
    """Central difference of the phase in ln p, all other parameters held at nominal.

    ``at`` overrides the nominal point.  Curves of all datasets are
    concatenated in dataset order.
    """
    if rel_step <= 0:
        raise ValueError("rel_step must be positive")
    base = dict(at or {})
    p = float(base[param]) if param in base else _nominal_value(problem, param)
    if not p > 0:
        raise ValueError(f"{param} must be positive for a log-derivative")
    up = problem.phases_for({**base, param: p * np.exp(rel_step)})
    down = problem.phases_for({**base, param: p * np.exp(-rel_step)})
    S = np.concatenate([(a - b) / (2.0 * rel_step) for a, b in zip(up, down)])
    freqs = np.concatenate([ds.grid.freqs for ds in problem.datasets])
    return SensitivityCurve(param, freqs, S)


def svd_report(jacobian: np.ndarray, parameters: Sequence[str]) -> IdentifiabilityReport:
    J = np.asarray(jacobian, dtype=float)
    if J.ndim != 2 or J.shape[1] != len(parameters) or J.shape[1] == 0:
        raise ValueError("jacobian must be 2-D with one column per parameter")
    if not np.any(J):
        k = min(J.shape)
        return IdentifiabilityReport(tuple(parameters), np.zeros(k), np.eye(J.shape[1])[:k], J, True)
    _, s, vt = np.linalg.svd(J, full_matrices=False)
    return IdentifiabilityReport(tuple(parameters), s, vt, J, False)


def identifiability_svd(
    problem: FitProblem,
    params: Sequence[str],
    rel_step: float = DEFAULT_REL_STEP,
    at: Mapping[str, float] | None = None,
    workers: int = 1,
) -> IdentifiabilityReport:
    """Thin SVD of the unweighted log-sensitivity Jacobian over all datasets."""
    params = list(params)
    if not params:
        raise ValueError("need at least one parameter")
    col = lambda name: sensitivity(problem, name, rel_step, at).S
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            cols = list(pool.map(col, params))
    else:
        cols = [col(p) for p in params]
    return svd_report(np.column_stack(cols), params)
