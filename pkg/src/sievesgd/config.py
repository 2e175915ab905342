"""Experiment configuration: a flat INI document with one section per concern.

Sections and keys::

    [estimator]
    estimator = sieve_sgd | sieve_sgd_tensor | sieve_sgd_additive |
                kernel_sgd | projection | krr
    family = cosine_eigen | sine_half | trig_pairs
    alpha, omega, gamma0, s = floats
    truncation_rule = power_law | power_log_squared
    quantize = true | false
    loss = squared | logistic
    kernel = bernoulli4 | brownian_min | sobolev_tensor
    ridge = float            (krr only)
    J = int                  (projection only; omit for floor(n**(1/(2s+1))))
    dims = int
    tensor_scale = float

    [data]
    target = bernoulli4_poly | sine_series_50 | logistic_tent | tent_interaction
    x_dist = uniform01 | uniform2575 | dependent_chain
    noise = uniform_pm002 | uniform_pm02 | std_normal | bernoulli_label

    [run]
    preset = example1 | example2 | example3 | appendixB   (parse-time only)
    name, n_max, checkpoints (comma-separated), replications, seed,
    mse_method = auto | coefficient_space | monte_carlo, mse_samples,
    slope_n_min

    [output]
    out = directory for CSV/JSON/figures

Unknown sections or keys are rejected.  Presets fill in the published
benchmark settings; explicit keys override preset values.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields
from typing import Optional

from .basis import BasisFamily
from .baselines import Kernel
from .simulation import NoiseKind, TargetFunction, XDist


class ConfigError(ValueError):
    """Malformed or invalid configuration; message names the offending key."""


ESTIMATORS = (
    "sieve_sgd",
    "sieve_sgd_tensor",
    "sieve_sgd_additive",
    "kernel_sgd",
    "projection",
    "krr",
)
TRUNCATION_RULES = ("power_law", "power_log_squared")
LOSSES = ("squared", "logistic")
MSE_METHODS = ("auto", "coefficient_space", "monte_carlo")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated description of one experiment."""

    name: str = "run"
    estimator: str = "sieve_sgd"
    family: str = "cosine_eigen"
    alpha: float = 0.43
    omega: float = 1.0
    gamma0: float = 1.0
    s: float = 2.0
    truncation_rule: str = "power_law"
    quantize: bool = False
    loss: str = "squared"
    kernel: str = "bernoulli4"
    ridge: float = 1e-3
    J: Optional[int] = None
    dims: int = 1
    tensor_scale: float = 4.0
    target: str = "sine_series_50"
    x_dist: str = "uniform01"
    noise: str = "std_normal"
    n_max: int = 10_000
    checkpoints: Optional[tuple[int, ...]] = None
    replications: int = 1
    seed: int = 20240
    mse_method: str = "auto"
    mse_samples: int = 100_000
    slope_n_min: Optional[int] = None
    out: str = "results"

    def __post_init__(self):
        _require(self.estimator in ESTIMATORS, "estimator", f"must be one of {ESTIMATORS}")
        _require_enum(self.family, BasisFamily, "family")
        _require(self.alpha > 0, "alpha", "must be > 0")
        _require(self.omega > 0.5, "omega", "must be > 1/2")
        _require(self.gamma0 > 0, "gamma0", "must be > 0")
        _require(self.s >= 1, "s", "must be >= 1")
        _require(
            self.truncation_rule in TRUNCATION_RULES,
            "truncation_rule",
            f"must be one of {TRUNCATION_RULES}",
        )
        _require(self.loss in LOSSES, "loss", f"must be one of {LOSSES}")
        _require_enum(self.kernel, Kernel, "kernel")
        _require(self.ridge > 0, "ridge", "must be > 0")
        _require(self.J is None or self.J >= 1, "J", "must be >= 1 when given")
        _require(self.dims >= 1, "dims", "must be >= 1")
        _require(self.tensor_scale > 0, "tensor_scale", "must be > 0")
        _require_enum(self.target, TargetFunction, "target")
        _require_enum(self.x_dist, XDist, "x_dist")
        _require_enum(self.noise, NoiseKind, "noise")
        _require(self.n_max >= 1, "n_max", "must be >= 1")
        if self.checkpoints is not None:
            _require(
                len(self.checkpoints) >= 1
                and all(c >= 1 for c in self.checkpoints)
                and list(self.checkpoints) == sorted(set(self.checkpoints))
                and self.checkpoints[-1] <= self.n_max,
                "checkpoints",
                "must be strictly increasing positive integers <= n_max",
            )
        _require(self.replications >= 1, "replications", "must be >= 1")
        _require(
            self.mse_method in MSE_METHODS, "mse_method", f"must be one of {MSE_METHODS}"
        )
        _require(self.mse_samples >= 1, "mse_samples", "must be >= 1")
        _require(
            self.slope_n_min is None or self.slope_n_min >= 1,
            "slope_n_min",
            "must be >= 1 when given",
        )


def _require(ok: bool, key: str, rule: str) -> None:
    if not ok:
        raise ConfigError(f"{key}: {rule}")


def _require_enum(value: str, enum_cls, key: str) -> None:
    values = tuple(member.value for member in enum_cls)
    _require(value in values, key, f"must be one of {values}")


# Published benchmark settings.  example1: rough polynomial target with small
# uniform noise; example2: 50-term sine-series target with unit normal noise,
# the main truncation-exponent study; example3: streaming logistic regression
# against a tent-shaped log-odds; appendixB: two-dimensional tensor-product
# model on dependent features.
PRESETS: dict[str, dict] = {
    "example1": {
        "estimator": "sieve_sgd",
        "family": "trig_pairs",
        "alpha": 0.21,
        "omega": 0.51,
        "gamma0": 3.0,
        "s": 2.0,
        "loss": "squared",
        "kernel": "bernoulli4",
        "target": "bernoulli4_poly",
        "x_dist": "uniform01",
        "noise": "uniform_pm002",
        "name": "example1",
    },
    "example2": {
        "estimator": "sieve_sgd",
        "family": "sine_half",
        "alpha": 0.43,
        "omega": 3.0,
        "gamma0": 1.0,
        "s": 3.0,
        "loss": "squared",
        "kernel": "brownian_min",
        "target": "sine_series_50",
        "x_dist": "uniform01",
        "noise": "std_normal",
        "name": "example2",
    },
    "example3": {
        "estimator": "sieve_sgd",
        "family": "sine_half",
        "alpha": 0.33,
        "omega": 1.0,
        "gamma0": 6.0,
        "s": 1.0,
        "loss": "logistic",
        "target": "logistic_tent",
        "x_dist": "uniform01",
        "noise": "bernoulli_label",
        "name": "example3",
    },
    "appendixB": {
        "estimator": "sieve_sgd_tensor",
        "family": "cosine_eigen",
        "omega": 0.51,
        "gamma0": 0.5,
        "s": 2.0,
        "dims": 2,
        "tensor_scale": 4.0,
        "loss": "squared",
        "kernel": "sobolev_tensor",
        "target": "tent_interaction",
        "x_dist": "dependent_chain",
        "noise": "std_normal",
        "name": "appendixB",
    },
}

_SECTION_OF_KEY = {
    "estimator": "estimator",
    "family": "estimator",
    "alpha": "estimator",
    "omega": "estimator",
    "gamma0": "estimator",
    "s": "estimator",
    "truncation_rule": "estimator",
    "quantize": "estimator",
    "loss": "estimator",
    "kernel": "estimator",
    "ridge": "estimator",
    "J": "estimator",
    "dims": "estimator",
    "tensor_scale": "estimator",
    "target": "data",
    "x_dist": "data",
    "noise": "data",
    "name": "run",
    "n_max": "run",
    "checkpoints": "run",
    "replications": "run",
    "seed": "run",
    "mse_method": "run",
    "mse_samples": "run",
    "slope_n_min": "run",
    "out": "output",
}

_INT_KEYS = {"J", "dims", "n_max", "replications", "seed", "mse_samples", "slope_n_min"}
_FLOAT_KEYS = {"alpha", "omega", "gamma0", "s", "ridge", "tensor_scale"}
_BOOL_KEYS = {"quantize"}
_LIST_KEYS = {"checkpoints"}


def _coerce(key: str, text: str):
    text = text.strip()
    try:
        if key in _INT_KEYS:
            return int(text)
        if key in _FLOAT_KEYS:
            return float(text)
        if key in _BOOL_KEYS:
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if key in _LIST_KEYS:
            return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    return text


def parse_config(text: str, preset: Optional[str] = None) -> ExperimentConfig:
    """Parse and validate an INI document, optionally on top of a named preset.

    A ``preset`` key inside ``[run]`` is honored too; the function argument
    wins over the in-document key.  Explicit keys always override preset
    values.  Unknown sections or keys are rejected.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (e.g. "J")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    values: dict = {}
    preset_name = preset
    for section in parser.sections():
        if section not in ("estimator", "data", "run", "output"):
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key == "preset" and section == "run":
                if preset_name is None:
                    preset_name = raw.strip()
                continue
            if key not in _SECTION_OF_KEY:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            if _SECTION_OF_KEY[key] != section:
                raise ConfigError(
                    f"key {key!r} belongs in section [{_SECTION_OF_KEY[key]}], found in [{section}]"
                )
            values[key] = _coerce(key, raw)

    merged: dict = {}
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(
                f"preset: unknown preset {preset_name!r}; choose from {tuple(PRESETS)}"
            )
        merged.update(PRESETS[preset_name])
    merged.update(values)
    return ExperimentConfig(**merged)


def load_config(path, preset: Optional[str] = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read(), preset=preset)


def render_config(config: ExperimentConfig) -> str:
    """Serialize a config; ``parse_config(render_config(c)) == c``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in ("estimator", "data", "run", "output"):
        parser.add_section(section)
    for item in fields(config):
        value = getattr(config, item.name)
        if value is None:
            continue
        if item.name == "checkpoints":
            rendered = ", ".join(str(v) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = str(value)
        parser.set(_SECTION_OF_KEY[item.name], item.name, rendered)
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {}
    for item in fields(config):
        value = getattr(config, item.name)
        if isinstance(value, tuple):
            value = list(value)
        out[item.name] = value
    return out
