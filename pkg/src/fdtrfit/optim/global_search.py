"""Uniform driver for the population-based searches."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..params import ParameterSpace
from . import fwa, ga, pso, qga
from .base import Budget, RunResult, Tracker

GLOBAL_ALGORITHMS = ("GA", "QGA", "PSO", "FWA")

CONFIGS = {"PSO": pso.PSOConfig, "GA": ga.GAConfig, "QGA": qga.QGAConfig, "FWA": fwa.FWAConfig}


def make_config(alg: str, params: Mapping | None = None):
    alg = alg.upper()
    if alg not in CONFIGS:
        raise ValueError(f"unknown global algorithm {alg!r}; choose from {GLOBAL_ALGORITHMS}")
    return CONFIGS[alg](**dict(params or {}))


def run_global(
    alg: str,
    objective,
    space: ParameterSpace,
    budget: Budget,
    seed: int | np.random.Generator,
    params: Mapping | object | None = None,
) -> RunResult:
    """Run one search until a stopping rule fires; returns the best point ever seen.

    ``objective`` maps a batch of scaled vectors (rows) to fitness values.
    """
    alg = alg.upper()
    cfg = params if isinstance(params, tuple(CONFIGS.values())) else make_config(alg, params)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tracker = Tracker(objective, budget)
    ev = tracker.evaluate

    if alg == "PSO":
        state = pso.init_swarm(space, cfg, ev, rng)
        step = lambda s: pso.pso_step(s, ev, rng, space)
    elif alg == "GA":
        state = ga.init_population(space, cfg, ev, rng)
        step = lambda s: ga.ga_generation(s, ev, rng, space)
    elif alg == "QGA":
        # measurement of the initial superposition is the first evaluated batch
        state = qga.qga_generation(qga.init_population(space, cfg), ev, rng, space)
        step = lambda s: qga.qga_generation(s, ev, rng, space)
    else:
        state = fwa.init_fireworks(space, cfg, ev, rng)
        step = lambda s: fwa.fwa_generation(s, ev, rng, space)

    while (reason := tracker.stop_reason()) is None:
        state = step(state)
    return tracker.result(reason, alg)
