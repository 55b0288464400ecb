"""Classically simulated quantum genetic algorithm (qubit chromosomes
updated by rotation gates with a fitness-adaptive angle)."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..params import DEFAULT_BITS, ParameterSpace

RATIO_CAP = 10.0
BEST_FLOOR = 1e-12


@dataclass(frozen=True)
class QGAConfig:
    population: int = 40
    theta: float = 0.01 * np.pi
    bits: int = DEFAULT_BITS


@dataclass(frozen=True, eq=False)
class QuantumPopulation:
    alpha: np.ndarray  # (N, dim * L)
    beta: np.ndarray
    theta: float
    n_bits: int
    best_bits: np.ndarray | None = None
    best_f: float = np.inf


def rotate(alpha, beta, dtheta):
    """Apply the 2x2 rotation gate by ``dtheta`` (broadcasting)."""
    c, s = np.cos(dtheta), np.sin(dtheta)
    return c * alpha - s * beta, s * alpha + c * beta


def adaptive_angle(theta: float, f, f_best: float):
    """theta * |F / F_best|, capped at 10x with |F_best| floored at 1e-12."""
    denom = max(abs(f_best), BEST_FLOOR)
    return theta * np.minimum(np.abs(np.asarray(f, dtype=float)) / denom, RATIO_CAP)


def rotation_direction(alpha, beta, target_bits):
    """+1/-1 per qubit so that a small positive rotation moves P(target) up.

    d|beta|^2/dtheta = 2 alpha beta, hence the sign of alpha*beta steers
    toward |1>.  Qubits sitting exactly on a pole get a fixed direction.
    """
    ab = alpha * beta
    toward_one = np.where(ab > 0, 1.0, np.where(ab < 0, -1.0, np.where(beta == 0, 1.0, 0.0)))
    toward_zero = np.where(ab > 0, -1.0, np.where(ab < 0, 1.0, np.where(alpha == 0, 1.0, 0.0)))
    return np.where(target_bits == 1, toward_one, toward_zero)


def init_population(space: ParameterSpace, cfg: QGAConfig) -> QuantumPopulation:
    shape = (cfg.population, space.dim * cfg.bits)
    amp = np.full(shape, 1.0 / np.sqrt(2.0))
    return QuantumPopulation(amp, amp.copy(), cfg.theta, cfg.bits)


def qga_generation(pop: QuantumPopulation, objective, rng: np.random.Generator, space: ParameterSpace) -> QuantumPopulation:
    bits = (rng.random(pop.beta.shape) < pop.beta**2).astype(np.uint8)
    f = objective(space.decode_bits(bits, pop.n_bits))

    best_bits, best_f = pop.best_bits, pop.best_f
    k = int(np.argmin(f))
    if f[k] < best_f:
        best_bits, best_f = bits[k].copy(), float(f[k])

    angle = adaptive_angle(pop.theta, f, best_f)
    worse = (f > best_f)[:, None]
    differs = bits != best_bits[None, :]
    direction = rotation_direction(pop.alpha, pop.beta, best_bits[None, :])
    dtheta = np.where(worse & differs, direction * angle[:, None], 0.0)
    alpha, beta = rotate(pop.alpha, pop.beta, dtheta)
    return replace(pop, alpha=alpha, beta=beta, best_bits=best_bits, best_f=best_f)
