import pytest

from mfhawkes.config import CHECKS, DEFAULTS, ConfigError, ExperimentConfig, load_config
from mfhawkes.model import ModelSpec, MultiClassSpec


def test_defaults():
    cfg = load_config()
    assert cfg.tests["enabled"] == list(CHECKS)
    assert cfg.master_seed == DEFAULTS["ensemble"]["master_seed"]
    spec = cfg.build_model()
    assert isinstance(spec, ModelSpec)
    assert spec.f(0.5) == pytest.approx(0.5)


def test_empty_tests_section_disables_all():
    assert ExperimentConfig.from_dict({"tests": {}}).tests["enabled"] == []


def test_tests_overrides_keep_enabled_list():
    cfg = ExperimentConfig.from_dict({"tests": {"alpha": 0.05}})
    assert cfg.tests["enabled"] == list(CHECKS)
    assert cfg.tests["alpha"] == 0.05
    assert cfg.tests["slope_band"] == DEFAULTS["tests"]["slope_band"]


def test_explicit_enabled_subset():
    cfg = ExperimentConfig.from_dict({"tests": {"enabled": ["lln_decay"]}})
    assert cfg.tests["enabled"] == ["lln_decay"]


@pytest.mark.parametrize("raw, msg", [
    ({"tests": {"alpha": 1.5}}, "alpha"),
    ({"tests": {"alpha": 0}}, "alpha"),
    ({"ensemble": {"N": [200, 50]}}, "ascending"),
    ({"ensemble": {"N": []}}, "non-empty"),
    ({"ensemble": {"master_seed": -1}}, "64-bit"),
    ({"tests": {"enabled": ["nope"]}}, "unknown checks"),
    ({"bogus": {}}, "unknown config sections"),
    ({"regimes": {"names": ["chaotic"]}}, "unknown regime"),
    ({"model": {"family": "sigmoid_erlang", "params": [1.0]}}, "model"),
    ({"model": {"family": "no_such_family"}}, "model"),
    ({"model": {"something": 1}}, "model"),
    ({"model": {"rate": {"family": "sigmoid", "params": [2.0]}}}, "model"),
    ({"grid": {"T": -1.0}}, "grid"),
])
def test_invalid_configs(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict(raw)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid: {T: [1, \n")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(bad)


def test_yaml_file_and_overrides(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("model: {family: constant_rate, params: [2.0]}\ngrid: {T: 3.0}\n")
    cfg = load_config(p, overrides={"grid": {"n_steps": 30}})
    assert cfg.grid == {"T": 3.0, "n_steps": 30}
    assert cfg.build_model().f(7.0) == 2.0


def test_expression_and_multiclass_models():
    cfg = ExperimentConfig.from_dict({"model": {
        "rate": {"expr": "1 / (1 + exp(-g * x))", "params": {"g": 2.0}, "sup": 1.0},
        "kernel": {"family": "erlang", "params": [2.0]},
    }})
    spec = cfg.build_model()
    assert spec.f(0.0) == pytest.approx(0.5)
    cfg = ExperimentConfig.from_dict({"model": {
        "classes": [{"rate": {"family": "sigmoid", "params": [2.0]}},
                    {"rate": {"family": "constant", "params": [1.0]}}],
        "kernels": [[{"family": "erlang", "params": [2.0]}, {"family": "zero"}],
                    [{"family": "zero"}, {"family": "erlang", "params": [1.0]}]],
        "p": [0.5, 0.5],
    }})
    assert isinstance(cfg.build_model(), MultiClassSpec)


def test_roundtrip_and_seed():
    cfg = load_config(overrides={"grid": {"T": 4.0}})
    again = ExperimentConfig.from_dict(cfg.to_dict(), fill_defaults=False)
    assert again.to_dict() == cfg.to_dict()
    s = cfg.with_seed(99)
    assert s.master_seed == 99 and cfg.master_seed != 99
    with pytest.raises(ConfigError, match="missing"):
        ExperimentConfig.from_dict({"grid": {"T": 1.0}}, fill_defaults=False)


def test_shipped_default_file_matches_builtin():
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"
    assert load_config(path).to_dict() == load_config().to_dict()
