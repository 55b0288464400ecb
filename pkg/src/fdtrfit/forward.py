"""Frequency-domain surface temperature response of a layered sample.

The surface impedance of the stack is folded bottom-up in Hankel space and
integrated against the Gaussian pump/probe kernel.  Only ratios of the
response matter for phase fitting, so constant prefactors are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sample import SampleStack


@dataclass(frozen=True)
class SpotConfig:
    r_pump: float
    r_probe: float

    def __post_init__(self):
        if self.r_pump <= 0 or self.r_probe <= 0:
            raise ValueError("spot radii must be positive")

    @classmethod
    def single(cls, r0: float) -> "SpotConfig":
        return cls(r0, r0)


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    freqs: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.freqs, dtype=float))
        if f.ndim != 1 or f.size == 0:
            raise ValueError("frequency grid must be a non-empty 1-D array")
        if np.any(f <= 0) or np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be positive and strictly increasing")
        f.setflags(write=False)
        object.__setattr__(self, "freqs", f)

    @classmethod
    def log_spaced(cls, f_min: float = 1e4, f_max: float = 1e7, n: int = 25) -> "FrequencyGrid":
        return cls(np.logspace(np.log10(f_min), np.log10(f_max), n))

    def __len__(self):
        return self.freqs.size

    def __eq__(self, other):
        return isinstance(other, FrequencyGrid) and np.array_equal(self.freqs, other.freqs)

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * np.pi * self.freqs


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre panels over [0, lambda_max_factor / min(r)].

    Panel edges are geometrically graded toward lambda = 0, where the
    low-frequency branch point of the integrand sits.
    """

    node_count: int = 200
    lambda_max_factor: float = 10.0
    panels: int = 4

    def __post_init__(self):
        if self.node_count < 16:
            raise ValueError("node_count must be >= 16")
        if self.lambda_max_factor < 6:
            raise ValueError("lambda_max_factor must be >= 6")
        if self.panels < 1 or self.node_count % self.panels:
            raise ValueError("node_count must be a positive multiple of panels")

    def lambda_max(self, spot: SpotConfig) -> float:
        return self.lambda_max_factor / min(spot.r_pump, spot.r_probe)

    def nodes(self, spot: SpotConfig) -> tuple[np.ndarray, np.ndarray]:
        """Hankel variable nodes and kernel-weighted quadrature weights."""
        lam, w = _panel_rule(self.node_count, self.panels)
        lmax = self.lambda_max(spot)
        lam = lam * lmax
        kernel = np.exp(-(lam**2) * (spot.r_pump**2 + spot.r_probe**2) / 8.0) * lam
        return lam, w * lmax * kernel


@lru_cache(maxsize=32)
def _panel_rule(n: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n // panels)
    if panels == 1:
        edges = np.array([0.0, 1.0])
    else:
        edges = np.concatenate([[0.0], np.logspace(-3, 0, panels)])
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    lam, wt = np.concatenate(nodes), np.concatenate(weights)
    lam.setflags(write=False)
    wt.setflags(write=False)
    return lam, wt


def layer_terms(kz, kr, C, h, lam2, omega):
    """Return (kz*q, tanh(q*h)) for one layer.

    Property arguments broadcast against ``lam2`` and ``omega``; the principal
    square root keeps Re q > 0.
    """
    q = np.sqrt((kr * lam2 + 1j * omega * C) / kz)
    return kz * q, np.tanh(q * h)


def fold_arrays(props: dict, lam2, omega, adiabatic: bool = False, fixed_terms: dict | None = None):
    """Fold surface impedance bottom-up for column arrays of layer properties.

    ``props`` holds kz, kr, C, h (shape (..., L)) and G (shape (..., L-1)).
    ``lam2`` and ``omega`` must already be shaped to broadcast against the
    leading property axes.  ``fixed_terms`` maps a layer index to precomputed
    ``layer_terms`` output for layers that do not change between calls.
    """
    kz, kr, C, h, G = (np.asarray(props[k], dtype=float) for k in ("kz", "kr", "C", "h", "G"))
    n_layers = kz.shape[-1]
    fixed_terms = fixed_terms or {}

    def terms(j):
        if j in fixed_terms:
            return fixed_terms[j]
        return layer_terms(*(_col(a, j, lam2) for a in (kz, kr, C, h)), lam2, omega)

    last = n_layers - 1
    kq, t = terms(last)
    Z = 1.0 / (kq * t) if adiabatic else 1.0 / kq
    for j in range(last - 1, -1, -1):
        Z = Z + 1.0 / _col(G, j, lam2)
        kq, t = terms(j)
        Z = (Z + t / kq) / (Z * kq * t + 1.0)
    return Z


def _col(a, j, like):
    # property column j, padded with trailing axes so it broadcasts over (freq, node)
    c = a[..., j]
    extra = np.ndim(like) - np.ndim(c)
    return c.reshape(np.shape(c) + (1,) * max(extra, 0)) if np.ndim(c) else c


def fold_impedance(stack: SampleStack, lam, omega):
    """Hankel-space surface impedance Z(lambda, omega) of ``stack``."""
    lam = np.asarray(lam, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if np.any(lam < 0) or np.any(omega <= 0):
        raise ValueError("need lambda >= 0 and omega > 0")
    lam2, om = np.broadcast_arrays(lam**2, omega)
    props = stack.arrays()
    Z = fold_arrays(props, lam2, om, adiabatic=stack.bottom_boundary == "adiabatic")
    return Z[()] if np.ndim(Z) == 0 else Z


def response_curve(stack: SampleStack, spot: SpotConfig, freqs, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Complex response H(f) for each frequency (arbitrary common scale)."""
    quad = quad or QuadratureSpec()
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if np.any(freqs <= 0):
        raise ValueError("frequencies must be positive")
    lam, weights = quad.nodes(spot)
    omega = 2.0 * np.pi * freqs[:, None]
    Z = fold_arrays(stack.arrays(), lam[None, :] ** 2, omega, adiabatic=stack.bottom_boundary == "adiabatic")
    H = Z @ weights
    if not np.all(np.isfinite(H)):
        raise FloatingPointError("non-finite surface response")
    return H


def surface_response(stack: SampleStack, spot: SpotConfig, f: float, quad: QuadratureSpec | None = None) -> complex:
    return complex(response_curve(stack, spot, [f], quad)[0])


def phase_signal(stack: SampleStack, spot: SpotConfig, grid: FrequencyGrid, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Phase of the response in degrees, one value per grid frequency."""
    return np.degrees(np.angle(response_curve(stack, spot, grid.freqs, quad)))


def amplitude_signal(stack: SampleStack, spot: SpotConfig, grid: FrequencyGrid, quad: QuadratureSpec | None = None) -> np.ndarray:
    return np.abs(response_curve(stack, spot, grid.freqs, quad))
