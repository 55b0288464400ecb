"""Binary-coded genetic algorithm: tournament selection, one-point crossover,
bit-flip mutation and a single elite."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..params import DEFAULT_BITS, ParameterSpace


@dataclass(frozen=True)
class GAConfig:
    population: int = 100
    crossover: float = 0.8
    mutation: float | None = None  # per bit; None -> 1 / (dim * bits)
    bits: int = DEFAULT_BITS
    elite: int = 1


@dataclass(frozen=True, eq=False)
class GaPopulation:
    bits: np.ndarray  # (N, dim * L) uint8
    fitness: np.ndarray
    p_c: float
    p_m: float
    n_bits: int
    elite: int = 1


def init_population(space: ParameterSpace, cfg: GAConfig, objective, rng: np.random.Generator) -> GaPopulation:
    bits = rng.integers(0, 2, size=(cfg.population, space.dim * cfg.bits), dtype=np.uint8)
    f = objective(space.decode_bits(bits, cfg.bits))
    p_m = cfg.mutation if cfg.mutation is not None else 1.0 / (space.dim * cfg.bits)
    return GaPopulation(bits, f, cfg.crossover, p_m, cfg.bits, cfg.elite)


def tournament(fitness: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``n`` winners of size-2 tournaments (ties favour the first draw)."""
    a = rng.integers(0, fitness.size, n)
    b = rng.integers(0, fitness.size, n)
    return np.where(fitness[b] < fitness[a], b, a)


def ga_generation(pop: GaPopulation, objective, rng: np.random.Generator, space: ParameterSpace) -> GaPopulation:
    n, length = pop.bits.shape
    n_elite = min(pop.elite, n)
    elite_idx = np.argsort(pop.fitness, kind="stable")[:n_elite]
    n_children = n - n_elite

    parents = pop.bits[tournament(pop.fitness, 2 * ((n_children + 1) // 2), rng)]
    mothers, fathers = parents[0::2], parents[1::2]
    do_cross = rng.random(mothers.shape[0]) < pop.p_c
    cut = rng.integers(1, length, mothers.shape[0])
    head = np.arange(length)[None, :] < cut[:, None]
    swap = do_cross[:, None] & ~head
    child_a = np.where(swap, fathers, mothers)
    child_b = np.where(swap, mothers, fathers)
    children = np.empty((2 * mothers.shape[0], length), dtype=np.uint8)
    children[0::2], children[1::2] = child_a, child_b
    children = children[:n_children]

    flips = rng.random(children.shape) < pop.p_m
    children = children ^ flips.astype(np.uint8)

    f_children = objective(space.decode_bits(children, pop.n_bits)) if n_children else np.empty(0)
    bits = np.concatenate([pop.bits[elite_idx], children])
    fitness = np.concatenate([pop.fitness[elite_idx], f_children])
    return replace(pop, bits=bits, fitness=fitness)
