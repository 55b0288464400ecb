"""Command line entry point: ``fdtrfit {fit,campaign,bench,sense,synth}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .benchmarks import BENCH_Y, BENCH_Z, Y_TRUE_MIN, grid_enumerate
from .campaign import _write_csv, is_success, run_campaign, run_trial, success_rate, trial_seed
from .config import ConfigError, build_config, display_value
from .identifiability import identifiability_svd, sensitivity
from .optim.base import Budget
from .optim.global_search import GLOBAL_ALGORITHMS, run_global
from .optim.hybrid import HYBRID_NAMES, HybridConfig, run_hybrid
from .optim.local import LOCAL_ALGORITHMS, run_local

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
BENCH_BUDGET = 6000
BENCH_SWITCH_FRACTION = 5 / 6  # 5000 of 6000 evaluations go to the global stage
BENCH_Z_STARTS = ((1.0, 1.0), (-2.5, -2.5))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML campaign file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--trials", type=int, help="trials per algorithm")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--algo", help="algorithm, e.g. HPSO, PSO, bfgs, HGA+nelder_mead")
    p.add_argument("--budget-evals", type=int, help="evaluation budget (global stage for hybrids)")
    p.add_argument("--budget-seconds", type=float, help="wall-time budget; makes runs non-deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdtrfit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (
        ("fit", "single seeded run of one algorithm"),
        ("campaign", "repeated trials with reports"),
        ("bench", "benchmark suites on the two analytic test functions"),
        ("sense", "phase sensitivities and SVD identifiability"),
        ("synth", "write synthetic measurement files"),
    ):
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "campaign":
            p.add_argument("--workers", type=int, help="worker processes")
            p.add_argument("--traces", action="store_true", help="also write trace_<algorithm>_<trial>.csv")
        if name == "bench":
            p.add_argument("--grid", type=int, help="also enumerate a grid with this many points per axis")
    return parser


def _raw_config(args) -> tuple[dict, Path]:
    if args.config is None:
        return {}, Path(".")
    try:
        raw = yaml.safe_load(args.config.read_text()) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {args.config}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return raw, args.config.parent


def _apply_flags(raw: dict, args) -> dict:
    raw = dict(raw)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        raw["master_seed"] = args.seed
    if args.trials is not None:
        raw["n_trials"] = args.trials
    if args.out is not None:
        raw["out"] = str(args.out)
    if args.algo is not None:
        raw["algorithms"] = [args.algo]
    if args.budget_evals is not None or args.budget_seconds is not None:
        budget = dict(raw.get("budget") or {})
        if args.budget_evals is not None:
            budget["max_evals"] = args.budget_evals
        if args.budget_seconds is not None:
            budget["max_seconds"] = args.budget_seconds
            if args.budget_evals is None:
                budget.pop("max_evals", None)
        raw["budget"] = budget
    if getattr(args, "workers", None) is not None:
        raw["workers"] = args.workers
    return raw


def _config(args):
    raw, base = _raw_config(args)
    return build_config(_apply_flags(raw, args), base)


def _display(problem, params: dict) -> dict:
    return {k: display_value(problem.binding, k, v) for k, v in params.items()}


# ----------------------------------------------------------------- commands


def cmd_fit(args) -> int:
    cfg = _config(args)
    spec = cfg.algorithms[0]
    seed = trial_seed(cfg.master_seed, 0)
    rec = run_trial(cfg.problem, spec, cfg.budget_for(spec), seed, 0, keep_trace=True)
    if rec.status == "failed":
        print(f"fit failed for {spec.id} (seed {seed})", file=sys.stderr)
        return EXIT_RUNTIME
    out = {
        "algorithm": rec.algorithm,
        "seed": seed,
        "status": rec.status,
        "f_final": rec.f_final,
        "evals": rec.evals,
        "switch_evals": rec.switch_evals,
        "parameters": _display(cfg.problem, rec.params),
    }
    if cfg.success is not None:
        out["success"] = is_success(rec, cfg.success)
    text = json.dumps(out, indent=2, sort_keys=True)
    print(text)
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "fit.json").write_text(text + "\n")
        _write_csv(cfg.out / "trace.csv", ["stage", "step", "f"], [[s, n, repr(float(v))] for s, n, v in rec.trace])
    return EXIT_OK


def cmd_campaign(args) -> int:
    cfg = _config(args)
    report = run_campaign(cfg, keep_trace=args.traces)
    print(f"{'algorithm':<20}{'trials':>8}{'failed':>8}{'success':>10}{'median f':>14}")
    for alg in report.algorithms:
        f = report.f_values(alg)
        n_failed = sum(r.status == "failed" for r in report.for_algorithm(alg))
        rate = success_rate(report, algorithm=alg) if report.success else float("nan")
        print(f"{alg:<20}{f.size:>8}{n_failed:>8}{rate:>10.2f}{np.median(f):>14.4g}")
    if cfg.out is not None:
        print(f"reports written to {cfg.out}")
    return EXIT_OK


def _bench_algorithms(algo: str | None) -> list[str]:
    if algo is None:
        return list(GLOBAL_ALGORITHMS) + [HYBRID_NAMES[g] for g in GLOBAL_ALGORITHMS]
    name = algo.upper()
    if name in GLOBAL_ALGORITHMS or name in HYBRID_NAMES.values():
        return [name]
    raise ConfigError(f"bench supports {GLOBAL_ALGORITHMS} and their hybrids, got {algo!r}")


def cmd_bench(args) -> int:
    if args.config is not None:
        raise ConfigError("bench does not read a config file")
    if args.budget_seconds is not None:
        raise ConfigError("bench uses evaluation budgets only")
    master = args.seed if args.seed is not None else 0
    trials = args.trials if args.trials is not None else 100
    total = args.budget_evals if args.budget_evals is not None else BENCH_BUDGET
    if trials < 1 or total < 2:
        raise ConfigError("bench needs at least one trial and two evaluations")
    switch = max(1, int(round(total * BENCH_SWITCH_FRACTION)))
    space = BENCH_Y.space()
    rows = []
    print(f"Y benchmark, {trials} trials, {total} evaluations, refined minimum {Y_TRUE_MIN:.6f}")
    for alg in _bench_algorithms(args.algo):
        finals = []
        for i in range(trials):
            seed = trial_seed(master, i)
            if alg in GLOBAL_ALGORITHMS:
                r = run_global(alg, BENCH_Y, space, Budget(max_evals=total), seed)
                x, f, evals = r.best_x, r.best_f, r.evals
            else:
                g = next(k for k, v in HYBRID_NAMES.items() if v == alg)
                cfg = HybridConfig(g, "bfgs", Budget(max_evals=switch), local_max_evals=total - switch)
                r = run_hybrid(cfg, BENCH_Y, space, seed)
                x, f, evals = r.x_final, r.f_final, r.total_evals
            finals.append(f)
            rows.append([alg, i, seed, repr(float(f)), repr(float(x[0])), repr(float(x[1])), evals])
        print(f"  {alg:<6} median {np.median(finals):.6f}  best {np.min(finals):.6f}")

    z_rows = []
    print("Z benchmark, local refiners")
    for start in BENCH_Z_STARTS:
        for alg in LOCAL_ALGORITHMS:
            r = run_local(
                alg, BENCH_Z.fitness, np.array(start), residual_fn=BENCH_Z.residuals, residual_offset=BENCH_Z.residual_offset
            )
            z_rows.append([alg, start[0], start[1], repr(float(r.f_final)), r.iterations, r.evals, r.status])
            print(f"  {alg:<13} from {start}: f = {r.f_final:.7f} ({r.status}, {r.iterations} iterations)")

    grid = None
    if args.grid:
        grid = grid_enumerate(BENCH_Y, args.grid)
        print(f"grid {args.grid}x{args.grid}: min {grid.value:.6f} at ({grid.location[0]:.6f}, {grid.location[1]:.6f})")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        _write_csv(args.out / "bench_Y.csv", ["algorithm", "trial", "seed", "f_final", "x1", "x2", "evals"], rows)
        _write_csv(args.out / "bench_Z.csv", ["algorithm", "x1_start", "x2_start", "f_final", "iterations", "evals", "status"], z_rows)
        if grid is not None:
            _write_csv(
                args.out / "grid_Y.csv",
                ["n_per_axis", "x1", "x2", "value"],
                [[args.grid, repr(float(grid.location[0])), repr(float(grid.location[1])), repr(float(grid.value))]],
            )
    return EXIT_OK


def cmd_sense(args) -> int:
    cfg = _config(args)
    problem = cfg.problem
    names = list(cfg.sense_params)
    curves = [sensitivity(problem, n, cfg.rel_step) for n in names]
    report = identifiability_svd(problem, names, cfg.rel_step)
    print(f"{'parameter':<12}{'max |S| (deg)':>16}")
    for c in curves:
        print(f"{c.parameter:<12}{c.peak:>16.4f}")
    print(f"\nsingular values (condition number {report.condition:.4g})")
    for row in report.table():
        print(f"  sigma_{row['index']} = {row['sigma']:.6g}  dominant {row['dominant']} ({row['weight']:+.3f})")
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        spots, freqs = [], []
        for ds in problem.datasets:
            spots += [ds.spot.r_pump * 1e6] * len(ds.grid)
            freqs += list(ds.grid.freqs)
        rows = [
            [repr(float(s)), repr(float(f))] + [repr(float(c.S[i])) for c in curves] for i, (s, f) in enumerate(zip(spots, freqs))
        ]
        _write_csv(cfg.out / "sensitivity.csv", ["spot_um", "frequency_hz"] + [f"S_{n}" for n in names], rows)
        svd_rows = [
            [row["index"], repr(row["sigma"]), row["dominant"]] + [repr(float(v)) for v in vec]
            for row, vec in zip(report.table(), report.directions)
        ]
        _write_csv(cfg.out / "svd.csv", ["index", "sigma", "dominant"] + [f"v_{n}" for n in names], svd_rows)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _config(args)
    if cfg.truth is None:
        raise ConfigError("synth needs a synthetic problem (no measurement files)")
    out = cfg.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    for ds in cfg.problem.datasets:
        path = ds.to_csv(out / f"phase_{ds.spot.r_pump * 1e6:g}um.csv")
        print(f"wrote {path}")
    meta = {
        "noise_sigma_deg": cfg.noise_sigma_deg,
        "truth": _display(cfg.problem, cfg.truth),
        "spots_um": [ds.spot.r_pump * 1e6 for ds in cfg.problem.datasets],
    }
    (out / "truth.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "campaign": cmd_campaign, "bench": cmd_bench, "sense": cmd_sense, "synth": cmd_synth}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
