"""YAML campaign configuration.

Physical quantities in config files use laboratory units and are converted to
SI on load:

========  ===============  ==========
field     config unit      SI factor
========  ===============  ==========
k, kz, kr W/(m K)          1
C         MJ/(m^3 K)       1e6
h         nm               1e-9
G         MW/(m^2 K)       1e6
spot      um               1e-6
========  ===============  ==========

A parameter's unit is the unit of the stack field it is bound to.  See
``configs/gan_si.yaml`` for a complete example.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .forward import FrequencyGrid, QuadratureSpec, SpotConfig
from .objective import FitProblem, MeasurementSet, synthesize, target_fitness, template_datasets
from .optim.base import Budget, EmptyBudget
from .optim.global_search import GLOBAL_ALGORITHMS, make_config
from .optim.hybrid import HYBRID_NAMES
from .optim.local import LOCAL_ALGORITHMS
from .params import ParamDef, ParameterSpace
from .sample import GAN_SI_SPOTS_UM, GAN_SI_TRUTH, Interface, Layer, ParameterBinding, SampleStack, build_gan_si_stack

UNITS = {"k": 1.0, "kz": 1.0, "kr": 1.0, "C": 1e6, "h": 1e-9, "G": 1e6}
UM = 1e-6
DEFAULT_BAND = 0.02
DEFAULT_NOISE_DEG = 0.5
CAMPAIGN_QUADRATURE = QuadratureSpec(node_count=64, lambda_max_factor=10.0, panels=4)


class ConfigError(ValueError):
    """Invalid or unreadable configuration; raised before any trial runs."""


@dataclass(frozen=True)
class AlgorithmSpec:
    """One column of the algorithm matrix.

    kind ``global`` runs a population search alone, ``hybrid`` adds a local
    refiner after the global stage and ``local`` runs a refiner from a
    uniformly random start.
    """

    kind: str
    global_alg: str | None = None
    local_alg: str | None = None
    local_max_iter: int = 200
    local_max_evals: int | None = None
    global_params: Mapping | None = None
    budget: Budget | None = None

    def __post_init__(self):
        if self.kind not in ("global", "hybrid", "local"):
            raise ConfigError(f"unknown algorithm kind {self.kind!r}")
        if self.kind in ("global", "hybrid") and self.global_alg not in GLOBAL_ALGORITHMS:
            raise ConfigError(f"unknown global algorithm {self.global_alg!r}; choose from {GLOBAL_ALGORITHMS}")
        if self.kind in ("hybrid", "local") and self.local_alg not in LOCAL_ALGORITHMS:
            raise ConfigError(f"unknown local algorithm {self.local_alg!r}; choose from {LOCAL_ALGORITHMS}")
        if self.global_params:
            try:
                make_config(self.global_alg, self.global_params)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad parameters for {self.global_alg}: {exc}") from exc

    @property
    def id(self) -> str:
        if self.kind == "global":
            return self.global_alg
        if self.kind == "local":
            return self.local_alg
        name = HYBRID_NAMES[self.global_alg]
        return name if self.local_alg == "bfgs" else f"{name}+{self.local_alg}"


def parse_algorithm(entry: str | Mapping) -> AlgorithmSpec:
    """``PSO``, ``HPSO``, ``HPSO+nelder_mead``, ``bfgs`` or a mapping with a
    ``name`` key plus overrides (local_max_iter, local_max_evals, params,
    budget)."""
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, Mapping) or "name" not in entry:
        raise ConfigError(f"algorithm entry needs a name: {entry!r}")
    extra = set(entry) - {"name", "local_max_iter", "local_max_evals", "params", "budget"}
    if extra:
        raise ConfigError(f"unknown algorithm keys {sorted(extra)}")
    name = str(entry["name"])
    head, _, local = name.partition("+")
    upper = head.upper()
    kw: dict[str, Any] = {
        "local_max_iter": int(entry.get("local_max_iter", 200)),
        "local_max_evals": entry.get("local_max_evals"),
        "global_params": dict(entry["params"]) if entry.get("params") else None,
        "budget": parse_budget(entry["budget"]) if entry.get("budget") else None,
    }
    if upper in GLOBAL_ALGORITHMS and not local:
        return AlgorithmSpec("global", global_alg=upper, **kw)
    if upper.startswith("H") and upper[1:] in GLOBAL_ALGORITHMS:
        return AlgorithmSpec("hybrid", global_alg=upper[1:], local_alg=local or "bfgs", **kw)
    if head.lower() in LOCAL_ALGORITHMS and not local:
        return AlgorithmSpec("local", local_alg=head.lower(), **kw)
    raise ConfigError(f"unknown algorithm {name!r}")


def parse_budget(raw: Mapping | None) -> Budget:
    raw = dict(raw or {})
    extra = set(raw) - {"max_evals", "max_seconds", "target_fitness"}
    if extra:
        raise ConfigError(f"unknown budget keys {sorted(extra)}")
    try:
        return Budget(
            max_evals=None if raw.get("max_evals") is None else int(raw["max_evals"]),
            max_seconds=None if raw.get("max_seconds") is None else float(raw["max_seconds"]),
            target_fitness=None if raw.get("target_fitness") is None else float(raw["target_fitness"]),
        )
    except (EmptyBudget, TypeError, ValueError) as exc:
        raise ConfigError(f"bad budget {raw}: {exc}") from exc


@dataclass(frozen=True)
class SuccessRule:
    """A trial succeeds when f_final <= target and, if ``truth`` is set, every
    parameter lies within ``band_rel`` of its true value."""

    target_fitness: float
    band_rel: float | None = DEFAULT_BAND
    truth: Mapping[str, float] | None = None

    def bands(self) -> dict[str, tuple[float, float]]:
        if self.truth is None or self.band_rel is None:
            return {}
        return {k: (v * (1 - self.band_rel), v * (1 + self.band_rel)) for k, v in self.truth.items()}


@dataclass(frozen=True, eq=False)
class CampaignConfig:
    problem: FitProblem
    algorithms: tuple[AlgorithmSpec, ...]
    n_trials: int = 100
    master_seed: int = 0
    budget: Budget = field(default_factory=lambda: Budget(max_evals=30000))
    success: SuccessRule | None = None
    out: Path | None = None
    workers: int = 1
    truth: Mapping[str, float] | None = None
    noise_sigma_deg: float = 0.0
    rel_step: float = 0.01
    sense_params: tuple[str, ...] = ()
    hist_bins: int = 20

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        ids = [a.id for a in self.algorithms]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate algorithms {ids}")

    def budget_for(self, spec: AlgorithmSpec) -> Budget:
        return spec.budget or self.budget

    @property
    def deterministic(self) -> bool:
        return all(self.budget_for(a).deterministic for a in self.algorithms)


# ---------------------------------------------------------------- sample


def _si(fld: str, value) -> float:
    return float(value) * UNITS[fld]


def _parse_stack(raw: Mapping) -> tuple[SampleStack, ParameterSpace, ParameterBinding]:
    elements = []
    for item in raw.get("stack") or []:
        item = dict(item)
        if "layer" in item:
            name = str(item.pop("layer"))
            terminal = bool(item.pop("terminal", False))
            k = item.pop("k", None)
            kz, kr = item.pop("kz", k), item.pop("kr", k)
            if kz is None or kr is None or "C" not in item:
                raise ConfigError(f"layer {name}: needs k (or kz and kr) and C")
            elements.append(
                Layer(name, _si("kz", kz), _si("kr", kr), _si("C", item.pop("C")), _si("h", item.pop("h", 0.0)), terminal)
            )
        elif "interface" in item:
            name = str(item.pop("interface"))
            elements.append(Interface(name, _si("G", item.pop("G"))))
        else:
            raise ConfigError(f"stack entry needs 'layer' or 'interface': {item}")
        if item:
            raise ConfigError(f"unknown keys {sorted(item)} in stack entry")
    stack = SampleStack(tuple(elements), raw.get("bottom", "semi_infinite"))

    defs, targets = [], {}
    for p in raw.get("parameters") or []:
        p = dict(p)
        name = str(p["name"])
        el, fld = p["bind"]
        targets[name] = (str(el), str(fld))
        lo, hi = (_si(fld, b) for b in p["bounds"]) if "bounds" in p else (None, None)
        if "value" in p:
            val = _si(fld, p["value"])
            defs.append(ParamDef(name, lo if lo is not None else val, hi if hi is not None else val, p.get("scale", "log10"), "fixed", val))
        else:
            if lo is None:
                raise ConfigError(f"fit parameter {name} needs bounds")
            defs.append(ParamDef(name, lo, hi, p.get("scale", "log10")))
    binding = ParameterBinding(targets)
    binding.validate(stack)
    return stack, ParameterSpace(defs), binding


def _truth_si(truth: Mapping | None, binding: ParameterBinding) -> dict[str, float] | None:
    if truth is None:
        return None
    out = {}
    for name, value in truth.items():
        if name not in binding:
            raise ConfigError(f"truth names unknown parameter {name!r}")
        out[name] = _si(binding[name][1], value)
    return out


def display_value(binding: ParameterBinding, name: str, si_value: float) -> float:
    """Inverse of the config unit conversion for reports."""
    return si_value / UNITS[binding[name][1]]


def _build_problem(raw: Mapping, base_dir: Path, quad: QuadratureSpec):
    prob = dict(raw.get("problem") or {})
    if "sample" in raw:
        stack, space, binding = _parse_stack(raw["sample"])
        default_truth = None
    else:
        stack, space, binding = build_gan_si_stack()
        default_truth = dict(GAN_SI_TRUTH)
    sigma = float(prob.get("noise_sigma_deg", DEFAULT_NOISE_DEG))
    nominal = _truth_si(prob.get("truth"), binding) if "truth" in prob else default_truth

    if prob.get("measurements"):
        datasets = []
        for m in prob["measurements"]:
            path = Path(m["path"])
            path = path if path.is_absolute() else base_dir / path
            try:
                datasets.append(MeasurementSet.from_csv(path, SpotConfig.single(float(m["spot_um"]) * UM), sigma))
            except OSError as exc:
                raise ConfigError(f"cannot read measurement file {path}: {exc}") from exc
        return FitProblem(stack, binding, space, tuple(datasets), quad, nominal), None, sigma

    if nominal is None or set(space.names) - set(nominal):
        raise ConfigError("synthetic problems need a truth value for every fit parameter")
    freqs = dict(prob.get("frequencies") or {})
    grid = FrequencyGrid.log_spaced(
        float(freqs.get("min_hz", 1e4)), float(freqs.get("max_hz", 1e7)), int(freqs.get("points", 25))
    )
    spots = [SpotConfig.single(float(r) * UM) for r in prob.get("spots_um", GAN_SI_SPOTS_UM)]
    template = FitProblem(stack, binding, space, tuple(template_datasets(spots, grid)), quad, nominal)
    data = synthesize(template, nominal, sigma, int(prob.get("data_seed", 0)))
    return template.with_datasets(data), nominal, sigma


def _build_success(raw: Mapping | None, problem: FitProblem, truth, sigma) -> SuccessRule:
    raw = dict(raw or {})
    target = raw.get("target_fitness", "auto")
    if target == "auto":
        if truth is None:
            raise ConfigError("success.target_fitness must be given for measured data")
        target = target_fitness(problem, truth, sigma)
    band = raw.get("band_rel", DEFAULT_BAND)
    fit_truth = {k: truth[k] for k in problem.space.names} if truth is not None else None
    return SuccessRule(float(target), None if band is None else float(band), fit_truth)


_TOP_KEYS = {
    "master_seed", "n_trials", "workers", "out", "problem", "sample", "quadrature",
    "budget", "algorithms", "success", "sensitivity", "hist_bins",
}


def build_config(raw: Mapping, base_dir: Path | str = ".") -> CampaignConfig:
    """Validate a parsed YAML mapping and build every runtime object."""
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be a mapping")
    extra = set(raw) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    base_dir = Path(base_dir)
    try:
        q = dict(raw.get("quadrature") or {})
        quad = QuadratureSpec(
            node_count=int(q.get("nodes", CAMPAIGN_QUADRATURE.node_count)),
            lambda_max_factor=float(q.get("lambda_max_factor", CAMPAIGN_QUADRATURE.lambda_max_factor)),
            panels=int(q.get("panels", CAMPAIGN_QUADRATURE.panels)),
        )
        problem, truth, sigma = _build_problem(raw, base_dir, quad)
        algorithms = tuple(parse_algorithm(a) for a in raw.get("algorithms") or ["HPSO"])
        sense = dict(raw.get("sensitivity") or {})
        out = raw.get("out")
        return CampaignConfig(
            problem=problem,
            algorithms=algorithms,
            n_trials=int(raw.get("n_trials", 100)),
            master_seed=int(raw.get("master_seed", 0)),
            budget=parse_budget(raw.get("budget") or {"max_evals": 30000}),
            success=_build_success(raw.get("success"), problem, truth, sigma),
            out=None if out is None else Path(out),
            workers=int(raw.get("workers", 1)),
            truth=truth,
            noise_sigma_deg=sigma,
            rel_step=float(sense.get("rel_step", 0.01)),
            sense_params=tuple(sense.get("params") or problem.space.names),
            hist_bins=int(raw.get("hist_bins", 20)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: Path | str) -> CampaignConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return build_config(raw or {}, path.parent)


def default_config(**overrides) -> CampaignConfig:
    """Built-in two-spot GaN/Si campaign (HPSO, 100 trials, 0.5 deg noise)."""
    raw: dict[str, Any] = {"algorithms": ["HPSO"]}
    raw.update(overrides)
    return build_config(raw)
