"""Search-space definitions shared by the optimizers and the thermal model.

Optimizers work on a "scaled" vector: linear parameters are used as-is and
log10 parameters are stored as their base-10 logarithm.  Only ``role="fit"``
entries appear in that vector; fixed entries carry a value and are applied by
the model binding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_BITS = 20


@dataclass(frozen=True)
class ParamDef:
    name: str
    lower: float
    upper: float
    scale: str = "log10"
    role: str = "fit"
    fixed_value: float | None = None

    def __post_init__(self):
        if self.scale not in ("linear", "log10"):
            raise ValueError(f"{self.name}: unknown scale {self.scale!r}")
        if self.role not in ("fit", "fixed"):
            raise ValueError(f"{self.name}: unknown role {self.role!r}")
        if self.role == "fit":
            if not self.lower < self.upper:
                raise ValueError(f"{self.name}: lower bound must be below upper bound")
            if self.scale == "log10" and self.lower <= 0:
                raise ValueError(f"{self.name}: log10 scale needs a positive lower bound")
        elif self.fixed_value is None:
            raise ValueError(f"{self.name}: fixed parameter needs fixed_value")

    @property
    def scaled_bounds(self) -> tuple[float, float]:
        if self.scale == "log10":
            return float(np.log10(self.lower)), float(np.log10(self.upper))
        return float(self.lower), float(self.upper)


@dataclass(frozen=True)
class ParameterSpace:
    defs: tuple[ParamDef, ...]
    _fit: tuple[ParamDef, ...] = field(init=False, repr=False, compare=False)

    def __init__(self, defs: Iterable[ParamDef]):
        defs = tuple(defs)
        names = [d.name for d in defs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")
        object.__setattr__(self, "defs", defs)
        object.__setattr__(self, "_fit", tuple(d for d in defs if d.role == "fit"))

    @property
    def dim(self) -> int:
        return len(self._fit)

    @property
    def fit_defs(self) -> tuple[ParamDef, ...]:
        return self._fit

    @property
    def names(self) -> list[str]:
        return [d.name for d in self._fit]

    @property
    def fixed(self) -> dict[str, float]:
        return {d.name: float(d.fixed_value) for d in self.defs if d.role == "fixed"}

    def __getitem__(self, name: str) -> ParamDef:
        for d in self.defs:
            if d.name == name:
                return d
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(d.name == name for d in self.defs)

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.scaled_bounds[0] for d in self._fit])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.scaled_bounds[1] for d in self._fit])

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: got {v.shape[-1]}, space has {self.dim}")
        return v

    def to_physical(self, v) -> np.ndarray:
        """Map scaled vector(s) (last axis = dim) to physical units."""
        v = self._check(v)
        logs = np.array([d.scale == "log10" for d in self._fit])
        return np.where(logs, 10.0 ** v, v)

    def to_scaled(self, physical) -> np.ndarray:
        p = self._check(physical)
        logs = np.array([d.scale == "log10" for d in self._fit])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(logs, np.log10(np.where(logs, p, 1.0)), p)

    def as_dict(self, physical: Sequence[float]) -> dict[str, float]:
        return {name: float(x) for name, x in zip(self.names, physical)}

    def decode_bits(self, bits, n_bits: int = DEFAULT_BITS) -> np.ndarray:
        """Decode big-endian bit groups into scaled vectors.

        ``bits`` has shape (..., dim * n_bits) or (..., dim, n_bits).
        """
        bits = np.asarray(bits)
        if bits.ndim >= 2 and bits.shape[-2:] == (self.dim, n_bits):
            pass
        elif bits.shape[-1] == self.dim * n_bits:
            bits = bits.reshape(bits.shape[:-1] + (self.dim, n_bits))
        else:
            raise ValueError(f"expected {self.dim} groups of {n_bits} bits, got shape {bits.shape}")
        weights = 2 ** np.arange(n_bits - 1, -1, -1, dtype=np.int64)
        ints = (bits.astype(np.int64) * weights).sum(axis=-1)
        frac = ints / float(2**n_bits - 1)
        return self.lower + frac * self.span

    def constrain(self, v, mode: str = "reflect") -> np.ndarray:
        """Bring scaled vector(s) inside the box by reflection or clamping."""
        v = self._check(v)
        lo, hi = self.lower, self.upper
        if mode == "clamp":
            return np.clip(v, lo, hi)
        if mode != "reflect":
            raise ValueError(f"unknown constraint mode {mode!r}")
        width = hi - lo
        # fold onto a period of 2*width, then mirror the upper half
        t = np.mod(v - lo, 2.0 * width)
        t = np.where(t > width, 2.0 * width - t, t)
        out = np.clip(lo + t, lo, hi)  # guard against rounding past a bound
        inside = (v >= lo) & (v <= hi)
        return np.where(inside, v, out)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lower + rng.random((n, self.dim)) * self.span


def linear_space(bounds: Sequence[tuple[float, float]], names: Sequence[str] | None = None) -> ParameterSpace:
    """Linear-scale box, as used by the analytic benchmarks."""
    names = names or [f"x{i + 1}" for i in range(len(bounds))]
    return ParameterSpace(ParamDef(n, lo, hi, scale="linear") for n, (lo, hi) in zip(names, bounds))
