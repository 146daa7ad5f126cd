"""Experiment configuration loaded from YAML."""

import copy
from dataclasses import dataclass, field

import yaml

from .model import (
    MultiClassSpec,
    ModelSpec,
    builtin_model,
    erlang_kernel,
    expression_kernel,
    expression_rate,
    linear_kernel,
    sigmoid_rate,
    zero_kernel,
    constant_rate,
    linear_rate,
)

__all__ = ["ConfigError", "ExperimentConfig", "DEFAULTS", "CHECKS", "load_config", "REGIMES"]

CHECKS = (
    "lln_decay",
    "poisson_coupling_decay",
    "clt_ks_Y",
    "clt_ks_Y_sup",
    "clt_ks_sigma",
    "remainder_decay",
    "compensator_bound",
    "second_moment_uniform",
    "martingale_mean",
    "cox_coupling_bound",
    "cox_coupling_decay",
    "resolvent_closed_forms",
    "resolvent_cross_method",
    "limit_cross_route",
    "multiclass_reduction",
)

REGIMES = {"stable": (2.0, 2.0), "critical": (4.0, 2.0), "bistable": (5.0, 4.0)}

DEFAULTS = {
    "model": {"family": "sigmoid_erlang", "params": [2.0, 2.0]},
    "grid": {"T": 10.0, "n_steps": 1000},
    "ensemble": {
        "N": [50, 200, 800],
        "replicates": 200,
        "N_clt": 500,
        "replicates_clt": 500,
        "limit_draws": 2000,
        "master_seed": 20240601,
    },
    "tests": {
        "enabled": list(CHECKS),
        "alpha": 0.01,
        "slope_band": [-0.75, -0.25],
        "max_failures": 1,
        "rerun": True,
        "cross_route_seeds": 100,
        "cross_route_tol": 1e-4,
        "closed_form_T": 1.0,
        "closed_form_steps": 2000,
        "closed_form_tol": 1e-6,
        "closed_form_c": 1.3,
        "cross_method_tol": 1e-8,
        "sigma_slack": 3.0,
        "coupling_slack": 4.0,
    },
    "regimes": {
        "names": ["stable", "critical", "bistable"],
        "N": 50,
        "replicates": 200,
        "stride": 10,
        "ratio_band": [0.5, 2.0],
    },
    "output": {"directory": "out", "formats": ["csv"]},
}

_SECTIONS = ("model", "grid", "ensemble", "tests", "output")


class ConfigError(ValueError):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


_RATES = {"sigmoid": sigmoid_rate, "constant": constant_rate, "linear": linear_rate}
_KERNELS = {"erlang": erlang_kernel, "zero": lambda: zero_kernel(), "linear": linear_kernel}


def _rate_from(d):
    if "expr" in d:
        return expression_rate(d["expr"], d.get("derivative"), tuple(d.get("domain", (-5, 5))),
                               d.get("params"), float(d.get("sup", float("inf"))))
    return _RATES[d["family"]](*d.get("params", []))


def _kernel_from(d):
    if "expr" in d:
        return expression_kernel(d["expr"], d.get("derivative"), d.get("params"))
    return _KERNELS[d["family"]](*d.get("params", []))


@dataclass
class ExperimentConfig:
    model: dict
    grid: dict
    ensemble: dict
    tests: dict
    output: dict
    regimes: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["regimes"]))

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, raw, fill_defaults=True):
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(raw) - set(_SECTIONS) - {"regimes"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        if fill_defaults:
            merged = _merge(DEFAULTS, raw)
            if "model" in raw:
                # a model section replaces the default model instead of merging into it
                merged["model"] = copy.deepcopy(raw["model"])
            given = raw.get("tests", {"enabled": list(CHECKS)})
            if not given:
                # an explicit but empty tests section disables every check
                merged["tests"]["enabled"] = []
            elif "enabled" in given:
                merged["tests"]["enabled"] = list(given["enabled"] or [])
        else:
            missing = [s for s in _SECTIONS if s not in raw]
            if missing:
                raise ConfigError(f"missing config sections: {missing}")
            merged = copy.deepcopy(raw)
            merged.setdefault("regimes", copy.deepcopy(DEFAULTS["regimes"]))
        return cls(**{k: merged[k] for k in (*_SECTIONS, "regimes")})

    def to_dict(self):
        return {k: copy.deepcopy(getattr(self, k)) for k in (*_SECTIONS, "regimes")}

    def with_seed(self, seed):
        d = self.to_dict()
        d["ensemble"]["master_seed"] = int(seed)
        return ExperimentConfig.from_dict(d, fill_defaults=False)

    @property
    def master_seed(self):
        return int(self.ensemble["master_seed"])

    def validate(self):
        for s in _SECTIONS:
            if not isinstance(getattr(self, s), dict):
                raise ConfigError(f"section {s!r} must be a mapping")
        a = self.tests.get("alpha", 0.01)
        if not 0 < float(a) < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        Ns = self.ensemble.get("N")
        if not Ns or any(int(n) < 1 for n in Ns):
            raise ConfigError("ensemble.N must be a non-empty list of positive sizes")
        if list(Ns) != sorted(set(int(n) for n in Ns)):
            raise ConfigError("ensemble.N must be strictly ascending")
        unknown = set(self.tests.get("enabled", [])) - set(CHECKS)
        if unknown:
            raise ConfigError(f"unknown checks: {sorted(unknown)}")
        seed = int(self.ensemble.get("master_seed", 0))
        if not 0 <= seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if float(self.grid.get("T", 0)) <= 0 or int(self.grid.get("n_steps", 0)) < 1:
            raise ConfigError("grid needs T > 0 and n_steps >= 1")
        for r in self.regimes.get("names", []):
            if r not in REGIMES:
                raise ConfigError(f"unknown regime {r!r}; choose from {sorted(REGIMES)}")
        try:
            self.build_model()
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model section: {exc}") from exc

    def build_model(self):
        m = self.model
        if "family" in m:
            return builtin_model(m["family"], tuple(m.get("params", ())))
        if "classes" in m:
            rates = [_rate_from(c["rate"]) for c in m["classes"]]
            kernels = [[_kernel_from(k) for k in row] for row in m["kernels"]]
            return MultiClassSpec(rates, kernels, tuple(m["p"]))
        if "rate" in m and "kernel" in m:
            return ModelSpec(_rate_from(m["rate"]), _kernel_from(m["kernel"]))
        raise ConfigError("model needs 'family', 'rate'/'kernel' or 'classes'")


def load_config(path=None, overrides=None):
    """Read a YAML file (or defaults when ``path`` is None)."""
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if overrides:
        raw = _merge(raw, overrides)
    return ExperimentConfig.from_dict(raw)
