from pathlib import Path

import numpy as np
import pytest
import yaml

from fdtrfit.config import (
    CAMPAIGN_QUADRATURE,
    ConfigError,
    build_config,
    default_config,
    display_value,
    load_config,
    parse_algorithm,
    parse_budget,
)
from fdtrfit.optim.base import Budget
from fdtrfit.sample import GAN_SI_TRUTH

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_SAMPLE = {
    "stack": [
        {"layer": "Au", "k": 200, "C": 2.49, "h": 80},
        {"interface": "G", "G": 50},
        {"layer": "sub", "k": 35, "C": 3.08, "terminal": True},
    ],
    "parameters": [
        {"name": "G", "bind": ["G", "G"], "bounds": [5, 500]},
        {"name": "k_sub", "bind": ["sub", "k"], "bounds": [1, 100]},
    ],
}


def small_raw(**kw):
    raw = {
        "sample": SMALL_SAMPLE,
        "problem": {"truth": {"G": 50, "k_sub": 35}, "noise_sigma_deg": 0.0, "spots_um": [5.0],
                    "frequencies": {"min_hz": 1e4, "max_hz": 1e7, "points": 8}},
        "quadrature": {"nodes": 32},
        "budget": {"max_evals": 100},
        "algorithms": ["PSO"],
    }
    raw.update(kw)
    return raw


@pytest.mark.parametrize(
    "name,kind,glob,local",
    [
        ("PSO", "global", "PSO", None),
        ("hpso", "hybrid", "PSO", "bfgs"),
        ("HGA+nelder_mead", "hybrid", "GA", "nelder_mead"),
        ("trust_region", "local", None, "trust_region"),
    ],
)
def test_parse_algorithm(name, kind, glob, local):
    spec = parse_algorithm(name)
    assert (spec.kind, spec.global_alg, spec.local_alg) == (kind, glob, local)


def test_algorithm_ids():
    assert parse_algorithm("HPSO").id == "HPSO"
    assert parse_algorithm("HPSO+trust_region").id == "HPSO+trust_region"
    assert parse_algorithm("bfgs").id == "bfgs"


def test_algorithm_mapping_overrides():
    spec = parse_algorithm({"name": "HFWA", "local_max_evals": 50, "budget": {"max_evals": 10}})
    assert spec.local_max_evals == 50 and spec.budget == Budget(max_evals=10)


@pytest.mark.parametrize("bad", ["XYZ", "HXYZ", "PSO+bfgs", {"local_max_iter": 3}, {"name": "PSO", "colour": 1}])
def test_bad_algorithms(bad):
    with pytest.raises(ConfigError):
        parse_algorithm(bad)


def test_bad_global_params():
    with pytest.raises(ConfigError):
        parse_algorithm({"name": "PSO", "params": {"no_such_knob": 1}})


def test_budget_parsing():
    assert parse_budget({"max_evals": 5}) == Budget(max_evals=5)
    with pytest.raises(ConfigError):
        parse_budget({})
    with pytest.raises(ConfigError):
        parse_budget({"max_evals": 0})
    with pytest.raises(ConfigError):
        parse_budget({"evals": 5})


def test_default_config_is_gan_si():
    cfg = default_config(budget={"max_evals": 100})
    assert cfg.problem.space.names == list(GAN_SI_TRUTH)
    assert cfg.truth == GAN_SI_TRUTH
    assert cfg.noise_sigma_deg == 0.5
    assert cfg.problem.quad == CAMPAIGN_QUADRATURE
    assert [a.id for a in cfg.algorithms] == ["HPSO"]


def test_shipped_configs_load():
    for path in sorted(CONFIGS.glob("*.yaml")):
        cfg = load_config(path)
        assert cfg.algorithms and cfg.problem.datasets


def test_units_converted_to_si():
    cfg = build_config(small_raw())
    stack = cfg.problem.stack
    au = stack.element("Au")
    assert au.C == pytest.approx(2.49e6) and au.h == pytest.approx(80e-9)
    assert stack.element("G").G == pytest.approx(50e6)
    assert cfg.truth == {"G": pytest.approx(50e6), "k_sub": 35.0}
    assert cfg.problem.space["G"].lower == pytest.approx(5e6)
    assert display_value(cfg.problem.binding, "G", 5e7) == pytest.approx(50.0)
    assert cfg.problem.datasets[0].spot.r_pump == pytest.approx(5e-6)


def test_fixed_parameter_not_fitted():
    sample = dict(SMALL_SAMPLE)
    sample["parameters"] = SMALL_SAMPLE["parameters"] + [{"name": "h_Au", "bind": ["Au", "h"], "value": 80}]
    cfg = build_config(small_raw(sample=sample))
    assert cfg.problem.space.names == ["G", "k_sub"]
    assert cfg.problem.space.fixed["h_Au"] == pytest.approx(80e-9)


def test_auto_target_on_clean_data():
    cfg = build_config(small_raw())
    assert cfg.success.target_fitness == pytest.approx(1e-6)
    assert cfg.success.bands()["k_sub"] == pytest.approx((35 * 0.98, 35 * 1.02))


@pytest.mark.parametrize(
    "patch",
    [
        {"colour": "blue"},
        {"n_trials": 0},
        {"workers": 0},
        {"algorithms": ["PSO", "PSO"]},
        {"algorithms": ["nope"]},
        {"budget": {"max_evals": -1}},
        {"problem": {"truth": {"G": 50}}},  # k_sub missing
        {"problem": {"truth": {"G": 50, "k_sub": 35, "bogus": 1}}},
        {"sample": {"stack": [{"slab": "x"}]}},
        {"sample": {**SMALL_SAMPLE, "parameters": [{"name": "G", "bind": ["nowhere", "G"], "bounds": [1, 2]}]}},
        {"sample": {**SMALL_SAMPLE, "parameters": [{"name": "G", "bind": ["G", "G"]}]}},
        {"n_trials": "many"},
    ],
)
def test_invalid_configs_raise(patch):
    with pytest.raises(ConfigError):
        build_config(small_raw(**patch))


def test_measured_data_needs_target(tmp_path):
    cfg = build_config(small_raw())
    path = cfg.problem.datasets[0].to_csv(tmp_path / "d.csv")
    raw = small_raw(problem={"measurements": [{"path": "d.csv", "spot_um": 5.0}]})
    with pytest.raises(ConfigError):
        build_config(raw, tmp_path)
    raw["success"] = {"target_fitness": 0.1}
    loaded = build_config(raw, tmp_path)
    np.testing.assert_allclose(loaded.problem.datasets[0].phase_deg, cfg.problem.datasets[0].phase_deg)
    assert path.exists()


def test_missing_measurement_file(tmp_path):
    raw = small_raw(problem={"measurements": [{"path": "none.csv", "spot_um": 5.0}]}, success={"target_fitness": 1})
    with pytest.raises(ConfigError):
        build_config(raw, tmp_path)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("3\n")
    with pytest.raises(ConfigError):
        load_config(scalar)


def test_yaml_roundtrip(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(small_raw(master_seed=7, n_trials=3)))
    cfg = load_config(path)
    assert cfg.master_seed == 7 and cfg.n_trials == 3 and cfg.deterministic


def test_wall_time_budget_not_deterministic():
    cfg = build_config(small_raw(budget={"max_seconds": 1.0}))
    assert not cfg.deterministic
