"""Particle swarm with inertia weight."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..params import ParameterSpace


@dataclass(frozen=True)
class PSOConfig:
    n_particles: int = 30
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    init_velocity: float = 0.1  # fraction of the box width


@dataclass(frozen=True, eq=False)
class SwarmState:
    x: np.ndarray
    v: np.ndarray
    pbest: np.ndarray
    pbest_f: np.ndarray
    gbest: np.ndarray
    gbest_f: float
    inertia: float
    c1: float
    c2: float


def init_swarm(space: ParameterSpace, cfg: PSOConfig, objective, rng: np.random.Generator) -> SwarmState:
    x = space.sample_uniform(rng, cfg.n_particles)
    v = (2.0 * rng.random(x.shape) - 1.0) * cfg.init_velocity * space.span
    f = objective(x)
    k = int(np.argmin(f))
    return SwarmState(x, v, x.copy(), f.copy(), x[k].copy(), float(f[k]), cfg.inertia, cfg.c1, cfg.c2)


def pso_step(state: SwarmState, objective, rng: np.random.Generator, space: ParameterSpace | None = None) -> SwarmState:
    """One velocity/position update followed by a best-position refresh."""
    x, v = state.x, state.v
    r1 = rng.random(x.shape)
    r2 = rng.random(x.shape)
    v_new = state.inertia * v + state.c1 * r1 * (state.pbest - x) + state.c2 * r2 * (state.gbest - x)
    x_new = x + v_new
    if space is not None:
        # a reflected coordinate also has its velocity reversed (mirror wall)
        raw = x_new
        x_new = space.constrain(raw, "reflect")
        v_new = np.where(x_new != raw, -v_new, v_new)
    f = objective(x_new)
    improved = f < state.pbest_f
    pbest = np.where(improved[:, None], x_new, state.pbest)
    pbest_f = np.where(improved, f, state.pbest_f)
    k = int(np.argmin(pbest_f))
    if pbest_f[k] < state.gbest_f:
        gbest, gbest_f = pbest[k].copy(), float(pbest_f[k])
    else:
        gbest, gbest_f = state.gbest, state.gbest_f
    return replace(state, x=x_new, v=v_new, pbest=pbest, pbest_f=pbest_f, gbest=gbest, gbest_f=gbest_f)
