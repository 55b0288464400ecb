"""Least-squares phase objective over one or more spot-size datasets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .forward import FrequencyGrid, QuadratureSpec, SpotConfig, fold_arrays, layer_terms, response_curve
from .params import ParameterSpace
from .sample import GAN_SI_SPOTS_UM, GAN_SI_TRUTH, Layer, ParameterBinding, SampleStack, build_gan_si_stack, resolve

NOISELESS_TARGET = 1e-6  # deg^2


class ForwardModelError(ArithmeticError):
    """Raised when the thermal model returns a non-finite response."""


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    spot: SpotConfig
    grid: FrequencyGrid
    phase_deg: np.ndarray
    noise_sigma_deg: float = 0.0

    def __post_init__(self):
        phase = np.asarray(self.phase_deg, dtype=float).copy()
        if phase.shape != (len(self.grid),):
            raise ValueError(f"{phase.size} phases for {len(self.grid)} frequencies")
        if not np.all(np.isfinite(phase)):
            raise ValueError("phases must be finite")
        phase.setflags(write=False)
        object.__setattr__(self, "phase_deg", phase)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frequency_hz", "phase_deg"])
            for f, p in zip(self.grid.freqs, self.phase_deg):
                w.writerow([repr(float(f)), repr(float(p))])
        return path

    @classmethod
    def from_csv(cls, path, spot: SpotConfig, noise_sigma_deg: float = 0.0) -> "MeasurementSet":
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"frequency_hz", "phase_deg"}:
            raise ValueError(f"{path}: expected header 'frequency_hz,phase_deg'")
        freqs = [float(r["frequency_hz"]) for r in rows]
        phases = [float(r["phase_deg"]) for r in rows]
        return cls(spot, FrequencyGrid(freqs), phases, noise_sigma_deg)


def template_datasets(spots: Sequence[SpotConfig], grid: FrequencyGrid) -> list[MeasurementSet]:
    """Placeholder datasets (zero phase) fixing the spots and frequencies."""
    return [MeasurementSet(s, grid, np.zeros(len(grid))) for s in spots]


class _Kernel:
    """Batched forward evaluation for one dataset layout.

    Built once per problem: fixed values are written into the base property
    columns and layers untouched by fit parameters have their Hankel terms
    cached.
    """

    def __init__(self, stack: SampleStack, binding: ParameterBinding, space: ParameterSpace, datasets, quad):
        fixed = {k: v for k, v in space.fixed.items() if k in binding}
        base = resolve(stack, binding, fixed)
        self.base = base.arrays()
        self.adiabatic = stack.bottom_boundary == "adiabatic"
        layer_idx = {l.name: i for i, l in enumerate(stack.layers)}
        iface_idx = {g.name: i for i, g in enumerate(stack.interfaces)}
        self.targets: list[list[tuple[str, int]]] = []
        varying: set[int] = set()
        for name in space.names:
            if name not in binding:
                self.targets.append([])
                continue
            el, fld = binding[name]
            if isinstance(stack.element(el), Layer):
                j = layer_idx[el]
                varying.add(j)
                cols = ("kz", "kr") if fld == "k" else (fld,)
                self.targets.append([(c, j) for c in cols])
            else:
                self.targets.append([("G", iface_idx[el])])
        self.layouts = []
        for ds in datasets:
            lam, weights = quad.nodes(ds.spot)
            lam2 = (lam**2)[None, None, :]
            omega = ds.grid.omega[None, :, None]
            fixed_terms = {
                j: layer_terms(*(self.base[k][j] for k in ("kz", "kr", "C", "h")), lam2, omega)
                for j in range(len(self.base["kz"]))
                if j not in varying
            }
            self.layouts.append((lam2, omega, weights, fixed_terms))

    def props(self, physical: np.ndarray) -> dict[str, np.ndarray]:
        n = physical.shape[0]
        props = {k: np.repeat(v[None, :], n, axis=0) for k, v in self.base.items()}
        for i, targets in enumerate(self.targets):
            for col, j in targets:
                props[col][:, j] = physical[:, i]
        return props

    def phases(self, physical: np.ndarray) -> list[np.ndarray]:
        props = self.props(physical)
        out = []
        for lam2, omega, weights, fixed_terms in self.layouts:
            Z = fold_arrays(props, lam2, omega, self.adiabatic, fixed_terms)
            out.append(np.degrees(np.angle(Z @ weights)))
        return out


@dataclass(frozen=True, eq=False)
class FitProblem:
    stack: SampleStack
    binding: ParameterBinding
    space: ParameterSpace
    datasets: tuple[MeasurementSet, ...]
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    nominal: Mapping[str, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        if not self.datasets:
            raise ValueError("a fit problem needs at least one dataset")
        self.binding.validate(self.stack)
        for name in self.binding:
            if name not in self.space:
                raise ValueError(f"binding names unknown parameter {name!r}")
        object.__setattr__(self, "_kernel", _Kernel(self.stack, self.binding, self.space, self.datasets, self.quad))
        object.__setattr__(self, "_measured", [ds.phase_deg for ds in self.datasets])

    @property
    def n_points(self) -> int:
        return sum(len(ds.grid) for ds in self.datasets)

    def with_datasets(self, datasets) -> "FitProblem":
        return FitProblem(self.stack, self.binding, self.space, tuple(datasets), self.quad, self.nominal)

    def simulate(self, v) -> list[np.ndarray]:
        """Simulated phases per dataset for scaled vector(s) ``v``."""
        V = np.atleast_2d(np.asarray(v, dtype=float))
        # far-out-of-box trial points overflow; they are reported below instead
        with np.errstate(all="ignore"):
            physical = self.space.to_physical(V)
            sims = self._kernel.phases(physical)
        bad = ~np.all(np.isfinite(np.concatenate(sims, axis=1)), axis=1)
        if np.any(bad):
            ctx = self.space.as_dict(physical[np.argmax(bad)])
            raise ForwardModelError(f"non-finite phase for parameters {ctx}")
        if np.ndim(v) == 1:
            return [s[0] for s in sims]
        return sims

    def residuals(self, v) -> np.ndarray:
        """Measured minus simulated phase, concatenated over datasets."""
        sims = self.simulate(v)
        res = [m - s for m, s in zip(self._measured, sims)]
        return np.concatenate(res, axis=-1)

    def fitness_batch(self, V) -> np.ndarray:
        V = np.atleast_2d(np.asarray(V, dtype=float))
        sims = self.simulate(V)
        per_ds = [np.sum((m - s) ** 2, axis=-1) for m, s in zip(self._measured, sims)]
        if len(per_ds) == 1:
            return per_ds[0]
        # fsum keeps the total independent of dataset order
        return np.array([math.fsum(row) for row in zip(*per_ds)])

    def fitness(self, v) -> float:
        return float(self.fitness_batch(np.asarray(v, dtype=float)[None, :])[0])

    __call__ = fitness_batch

    def phases_for(self, values: Mapping[str, float]) -> list[np.ndarray]:
        """Phases per dataset with fit and fixed parameters overridden by name."""
        vals = dict(self.space.fixed)
        vals.update({k: v for k, v in (self.nominal or {}).items()})
        vals.update(values)
        bound = {k: v for k, v in vals.items() if k in self.binding}
        stack = resolve(self.stack, self.binding, bound)
        return [np.degrees(np.angle(response_curve(stack, ds.spot, ds.grid.freqs, self.quad))) for ds in self.datasets]


def synthesize(problem: FitProblem, truth, noise_sigma_deg: float = 0.0, seed: int = 0) -> list[MeasurementSet]:
    """Forward-model phases at ``truth`` plus seeded Gaussian noise.

    ``truth`` is a mapping of fit-parameter names or a physical vector in
    space order.  The problem's datasets only supply spots and frequencies.
    """
    if isinstance(truth, Mapping):
        truth = [truth[n] for n in problem.space.names]
    truth = np.asarray(truth, dtype=float)
    v = problem.space.to_scaled(truth)
    lo, hi = problem.space.lower, problem.space.upper
    if np.any(v < lo - 1e-12) or np.any(v > hi + 1e-12):
        raise ValueError("truth lies outside the parameter bounds")
    clean = problem.simulate(v)
    rng = np.random.default_rng(seed)
    out = []
    for ds, phase in zip(problem.datasets, clean):
        noise = rng.normal(0.0, noise_sigma_deg, size=phase.shape) if noise_sigma_deg > 0 else 0.0
        out.append(MeasurementSet(ds.spot, ds.grid, phase + noise, noise_sigma_deg))
    return out


def target_fitness(problem: FitProblem, truth, noise_sigma_deg: float) -> float:
    """Success threshold: 1e-6 deg^2 for clean data, else 1.1 F(truth)."""
    if noise_sigma_deg <= 0:
        return NOISELESS_TARGET
    if isinstance(truth, Mapping):
        truth = [truth[n] for n in problem.space.names]
    return 1.1 * problem.fitness(problem.space.to_scaled(np.asarray(truth, dtype=float)))


def gan_si_problem(
    noise_sigma_deg: float = 0.0,
    seed: int = 0,
    truth: Mapping[str, float] | None = None,
    spots_um: Sequence[float] = GAN_SI_SPOTS_UM,
    grid: FrequencyGrid | None = None,
    quad: QuadratureSpec | None = None,
) -> FitProblem:
    """Two-spot GaN/Si problem with synthetic data generated at ``truth``."""
    truth = dict(truth or GAN_SI_TRUTH)
    stack, space, binding = build_gan_si_stack()
    grid = grid or FrequencyGrid.log_spaced(1e4, 1e7, 25)
    spots = [SpotConfig.single(r * 1e-6) for r in spots_um]
    template = FitProblem(stack, binding, space, template_datasets(spots, grid), quad or QuadratureSpec(), truth)
    return template.with_datasets(synthesize(template, truth, noise_sigma_deg, seed))
