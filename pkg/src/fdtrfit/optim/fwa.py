"""Fireworks algorithm: fitness-adaptive explosion sparks, Gaussian sparks and
distance-based selection."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..params import ParameterSpace

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FWAConfig:
    n_fireworks: int = 5
    sparks: int = 50  # M
    amplitude: float = 0.4  # A_max as a fraction of the box width
    gaussian: int = 5
    s_min: int = 2
    s_max_frac: float = 0.8


@dataclass(frozen=True, eq=False)
class FireworkPopulation:
    x: np.ndarray
    fitness: np.ndarray
    sparks: int
    a_max: np.ndarray  # per-dimension amplitude cap
    gaussian: int
    s_min: int
    s_max: int


def init_fireworks(space: ParameterSpace, cfg: FWAConfig, objective, rng: np.random.Generator) -> FireworkPopulation:
    x = space.sample_uniform(rng, cfg.n_fireworks)
    s_max = max(cfg.s_min, int(round(cfg.s_max_frac * cfg.sparks)))
    return FireworkPopulation(x, objective(x), cfg.sparks, cfg.amplitude * space.span, cfg.gaussian, cfg.s_min, s_max)


def spark_counts(fitness: np.ndarray, m: int, s_min: int, s_max: int) -> np.ndarray:
    """Better fireworks get more sparks; the total never exceeds ``m``."""
    worst = np.max(fitness)
    share = (worst - fitness + EPS) / np.sum(worst - fitness + EPS)
    counts = np.clip(np.round(m * share), s_min, s_max).astype(int)
    while counts.sum() > m and np.any(counts > s_min):
        counts[int(np.argmax(counts))] -= 1
    return counts


def amplitudes(fitness: np.ndarray, a_max) -> np.ndarray:
    """Better fireworks explode with smaller amplitude; shape (n, dim)."""
    best = np.min(fitness)
    share = (fitness - best + EPS) / np.sum(fitness - best + EPS)
    return share[:, None] * np.asarray(a_max)[None, :]


def _random_axes(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    # each row gets a non-empty random subset of axes
    mask = rng.random((n, dim)) < 0.5
    empty = ~mask.any(axis=1)
    mask[empty, rng.integers(0, dim, int(empty.sum()))] = True
    return mask


def fwa_generation(pop: FireworkPopulation, objective, rng: np.random.Generator, space: ParameterSpace) -> FireworkPopulation:
    n, dim = pop.x.shape
    counts = spark_counts(pop.fitness, pop.sparks, pop.s_min, pop.s_max)
    amps = amplitudes(pop.fitness, pop.a_max)

    owner = np.repeat(np.arange(n), counts)
    axes = _random_axes(rng, owner.size, dim)
    shift = amps[owner] * (2.0 * rng.random((owner.size, dim)) - 1.0)
    explosion = pop.x[owner] + np.where(axes, shift, 0.0)

    best = pop.x[int(np.argmin(pop.fitness))]
    src = pop.x[rng.integers(0, n, pop.gaussian)]
    g_axes = _random_axes(rng, pop.gaussian, dim)
    e = rng.normal(1.0, 1.0, (pop.gaussian, dim))
    gauss = src + np.where(g_axes, (best - src) * e, 0.0)

    sparks = space.constrain(np.concatenate([explosion, gauss]), "reflect")
    f_sparks = objective(sparks)

    cand = np.concatenate([pop.x, sparks])
    f_cand = np.concatenate([pop.fitness, f_sparks])
    keep = [int(np.argmin(f_cand))]
    if n > 1:
        rest = np.setdiff1d(np.arange(cand.shape[0]), keep)
        dist = np.sqrt(((cand[rest, None, :] - cand[None, :, :]) ** 2).sum(-1)).sum(axis=1)
        prob = dist / dist.sum() if dist.sum() > 0 else None
        keep += list(rng.choice(rest, size=n - 1, replace=False, p=prob))
    keep = np.array(keep)
    return replace(pop, x=cand[keep], fitness=f_cand[keep])
