"""Repeated seeded trials, success statistics and CSV/JSON reports."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import AlgorithmSpec, CampaignConfig, SuccessRule
from .optim.base import Budget
from .optim.global_search import run_global
from .optim.hybrid import HybridConfig, run_hybrid
from .optim.local import run_local

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
QUANTILES = (0.0, 0.25, 0.5, 0.75, 1.0)
LOG_FLOOR = 1e-30  # f = 0 is histogrammed at this value on the log axis


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, index: int) -> int:
    """Seed of trial ``index``: the index-th output of a splitmix64 stream
    started at ``master_seed``."""
    return splitmix64((master_seed + index * GOLDEN) & MASK64)


@dataclass
class TrialRecord:
    algorithm: str
    trial: int
    seed: int
    status: str
    f_final: float
    evals: int
    params: dict[str, float]
    switch_evals: int | None = None
    f_global: float | None = None
    trace: list[tuple[str, int, float]] = field(default_factory=list, repr=False)


@dataclass
class TrialReport:
    records: list[TrialRecord]
    param_names: tuple[str, ...]
    algorithms: tuple[str, ...]
    n_trials: int
    master_seed: int
    deterministic: bool
    success: SuccessRule | None = None
    hist_bins: int = 20

    def for_algorithm(self, alg: str) -> list[TrialRecord]:
        return [r for r in self.records if r.algorithm == alg]

    def f_values(self, alg: str) -> np.ndarray:
        return np.array([r.f_final for r in self.for_algorithm(alg)], dtype=float)


def is_success(record: TrialRecord, rule: SuccessRule) -> bool:
    if record.status == "failed" or not record.f_final <= rule.target_fitness:
        return False
    return all(lo <= record.params.get(k, np.nan) <= hi for k, (lo, hi) in rule.bands().items())


def success_rate(report: TrialReport, rule: SuccessRule | None = None, algorithm: str | None = None) -> float:
    """Fraction of trials (optionally of one algorithm) that satisfy ``rule``."""
    rule = rule or report.success
    if rule is None:
        raise ValueError("no success rule given")
    recs = report.records if algorithm is None else report.for_algorithm(algorithm)
    if not recs:
        return 0.0
    return sum(is_success(r, rule) for r in recs) / len(recs)


# ------------------------------------------------------------------ trials


def run_trial(problem, spec: AlgorithmSpec, budget: Budget, seed: int, index: int, keep_trace: bool = False) -> TrialRecord:
    """One isolated trial; any exception becomes a ``failed`` record."""
    space = problem.space
    try:
        if spec.kind == "global":
            res = run_global(spec.global_alg, problem, space, budget, seed, spec.global_params)
            x, f, evals, status = res.best_x, res.best_f, res.evals, res.terminated_by
            switch, f_glob = None, None
            trace = [("global", n, v) for n, v in res.trace]
        elif spec.kind == "hybrid":
            cfg = HybridConfig(
                spec.global_alg,
                spec.local_alg,
                budget,
                local_max_iter=spec.local_max_iter,
                local_max_evals=spec.local_max_evals,
                global_params=spec.global_params,
            )
            res = run_hybrid(cfg, problem, space, seed)
            x, f, evals = res.x_final, res.f_final, res.total_evals
            status = res.local_part.status
            switch, f_glob = res.global_part.evals, res.global_part.best_f
            trace = [(r["stage"], r["step"], r["f"]) for r in res.trace_rows()]
        else:
            rng = np.random.default_rng(seed)
            x0 = space.sample_uniform(rng, 1)[0]
            scalar = lambda v: problem.fitness(v)
            res = run_local(
                spec.local_alg,
                scalar,
                x0,
                max_iter=spec.local_max_iter,
                residual_fn=problem.residuals,
                max_evals=spec.local_max_evals or budget.max_evals,
            )
            x = space.constrain(res.x_final, "clamp")
            f = res.f_final if np.array_equal(x, res.x_final) else problem.fitness(x)
            evals, status, switch, f_glob = res.evals, res.status, None, None
            trace = [("local", i, v) for i, v in res.trace]
        params = space.as_dict(space.to_physical(x))
        return TrialRecord(spec.id, index, seed, status, float(f), int(evals), params, switch, f_glob, trace if keep_trace else [])
    except Exception:  # recorded as failed; the campaign continues
        nan = {n: math.nan for n in space.names}
        return TrialRecord(spec.id, index, seed, "failed", math.inf, 0, nan)


def _job(args):
    return run_trial(*args)


def run_campaign(cfg: CampaignConfig, out: Path | str | None = None, keep_trace: bool = False) -> TrialReport:
    """Run ``n_trials`` per algorithm; trial i of every algorithm shares seed i.

    Records are sorted by (algorithm order, trial index) so the report does not
    depend on the worker count.
    """
    seeds = [trial_seed(cfg.master_seed, i) for i in range(cfg.n_trials)]
    jobs = [
        (cfg.problem, spec, cfg.budget_for(spec), seeds[i], i, keep_trace)
        for spec in cfg.algorithms
        for i in range(cfg.n_trials)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        records = [_job(j) for j in jobs]
    order = {spec.id: k for k, spec in enumerate(cfg.algorithms)}
    records.sort(key=lambda r: (order[r.algorithm], r.trial))
    report = TrialReport(
        records,
        tuple(cfg.problem.space.names),
        tuple(order),
        cfg.n_trials,
        cfg.master_seed,
        cfg.deterministic,
        cfg.success,
        cfg.hist_bins,
    )
    target = out if out is not None else cfg.out
    if target is not None:
        export_report(report, target, traces=keep_trace)
    return report


# ------------------------------------------------------------------ export


def _num(x) -> float | None:
    """JSON-safe float: non-finite values become null."""
    return float(x) if x is not None and math.isfinite(x) else None


def _fmt(x) -> str:
    return "" if x is None else repr(float(x)) if isinstance(x, float) else str(x)


def histogram(values: Sequence[float], bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width bins over [min, max] of the finite values; bins are
    right-open except the last, which is closed."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return np.zeros(bins, dtype=int), np.linspace(0.0, 1.0, bins + 1)
    lo, hi = float(v.min()), float(v.max())
    try:
        return np.histogram(v, bins=bins, range=(lo, hi) if hi > lo else None)
    except ValueError:
        # range narrower than the bin count can resolve; widen it slightly
        pad = 1e-6 * max(abs(lo), abs(hi))
        return np.histogram(v, bins=bins, range=(lo - pad, hi + pad))


def quantiles(values: Sequence[float]) -> dict[str, float | None]:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {f"q{int(q * 100):02d}": None for q in QUANTILES}
    return {f"q{int(q * 100):02d}": _num(np.quantile(v, q)) for q in QUANTILES}


def summarize(report: TrialReport) -> dict:
    algs = {}
    for alg in report.algorithms:
        recs = report.for_algorithm(alg)
        entry = {
            "n_trials": len(recs),
            "n_failed": sum(r.status == "failed" for r in recs),
            "f_final": quantiles([r.f_final for r in recs]),
            "evals": quantiles([float(r.evals) for r in recs]),
        }
        if report.success is not None:
            entry["successes"] = sum(is_success(r, report.success) for r in recs)
            entry["success_rate"] = entry["successes"] / len(recs) if recs else 0.0
        algs[alg] = entry
    rule = report.success
    return {
        "master_seed": report.master_seed,
        "n_trials": report.n_trials,
        "deterministic": report.deterministic,
        "parameters": list(report.param_names),
        "success_rule": None
        if rule is None
        else {
            "target_fitness": _num(rule.target_fitness),
            "band_rel": rule.band_rel,
            "band_note": "artifact convention: relative band around the synthetic truth",
            "truth": None if rule.truth is None else {k: _num(v) for k, v in rule.truth.items()},
        },
        "algorithms": algs,
    }


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_report(report: TrialReport, directory: Path | str, traces: bool = False) -> list[Path]:
    """Write trials.csv, summary.json, hist_<param>.csv, hist_log10_f_final.csv
    and, with ``traces``, one trace_<algorithm>_<trial>.csv per trial."""
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {d}: {exc}") from exc
    written = []

    header = ["algorithm", "trial", "seed", "status", "f_final", "evals", "switch_evals", "f_global"]
    header += list(report.param_names)
    if report.success is not None:
        header.append("success")
    rows = []
    for r in report.records:
        row = [r.algorithm, r.trial, r.seed, r.status, _fmt(r.f_final), r.evals, _fmt(r.switch_evals), _fmt(r.f_global)]
        row += [_fmt(r.params[n]) for n in report.param_names]
        if report.success is not None:
            row.append(int(is_success(r, report.success)))
        rows.append(row)
    _write_csv(d / "trials.csv", header, rows)
    written.append(d / "trials.csv")

    path = d / "summary.json"
    try:
        path.write_text(json.dumps(summarize(report), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    written.append(path)

    columns = {n: lambda r, n=n: r.params[n] for n in report.param_names}
    columns["log10_f_final"] = lambda r: math.log10(max(r.f_final, LOG_FLOOR))
    for name, get in columns.items():
        hist_rows = []
        for alg in report.algorithms:
            counts, edges = histogram([get(r) for r in report.for_algorithm(alg)], report.hist_bins)
            hist_rows += [[alg, repr(float(lo)), repr(float(hi)), int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
        path = d / f"hist_{name}.csv"
        _write_csv(path, ["algorithm", "bin_left", "bin_right", "count"], hist_rows)
        written.append(path)

    if traces:
        for r in report.records:
            path = d / f"trace_{r.algorithm}_{r.trial:03d}.csv"
            _write_csv(path, ["stage", "step", "f"], [[s, n, repr(float(v))] for s, n, v in r.trace])
            written.append(path)
    return written


def read_trials(path: Path | str) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def f_plateaus(values: Sequence[float], link_decades: float = 1.0, min_members: int = 3) -> list[tuple[float, int]]:
    """Clusters of f values on a log axis.

    Sorted log10 values are linked while consecutive gaps stay within
    ``link_decades``; clusters with at least ``min_members`` trials count as
    plateaus.  Returns (median f, size) per plateau, lowest first.
    """
    v = np.sort(np.log10(np.maximum(np.asarray(values, dtype=float)[np.isfinite(values)], LOG_FLOOR)))
    if v.size == 0:
        return []
    groups, start = [], 0
    for i in range(1, v.size + 1):
        if i == v.size or v[i] - v[i - 1] > link_decades:
            groups.append(v[start:i])
            start = i
    return [(float(10 ** np.median(g)), int(g.size)) for g in groups if g.size >= min_members]


def separated_plateaus(values: Sequence[float], factor: float = 10.0, **kw) -> int:
    """Largest number of plateaus whose medians are pairwise > ``factor`` apart."""
    meds = [m for m, _ in f_plateaus(values, **kw)]
    count, last = 0, None
    for m in meds:
        if last is None or m > factor * max(last, LOG_FLOOR):
            count += 1
            last = m
    return count
