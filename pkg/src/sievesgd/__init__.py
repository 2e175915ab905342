"""Streaming nonparametric regression over a growing trigonometric basis.

The estimator keeps the coefficients of the first J_i basis functions after i
observations, takes damped stochastic-gradient steps, and returns the running
average of all iterates.  Baseline estimators (kernel SGD, batch projection,
kernel ridge regression), simulation-driven benchmark tooling, and a CLI live
in the submodules.
"""

__version__ = "0.1.0"

from .basis import (
    BasisFamily,
    MultiIndex,
    basis_matrix,
    basis_values,
    eval_basis,
    eval_tensor_basis,
    hyperbolic_cross_indices,
    orthonormality_defect,
)
from .baselines import (
    Kernel,
    KernelSGD,
    KRRModel,
    SingularFitError,
    kernel_eval,
    krr_fit,
    projection_fit,
)
from .estimator import (
    AdditiveSieveSGD,
    LossSpec,
    NumericOverflowError,
    SieveConfig,
    SieveSGD,
    TensorSieveSGD,
    default_fraction_bits,
    load_state,
    quantize_coefficients,
    save_state,
    truncation_level,
)
from .config import ConfigError, ExperimentConfig, PRESETS, parse_config, render_config
from .simulation import (
    DataStream,
    ExperimentError,
    MissingExpansionError,
    NoiseKind,
    RunRecord,
    TargetFunction,
    XDist,
    eval_target,
    fit_loglog_slope,
    logistic_regret,
    mse_coefficient_space,
    mse_monte_carlo,
    run_experiment,
)

__all__ = [
    "AdditiveSieveSGD",
    "BasisFamily",
    "ConfigError",
    "DataStream",
    "ExperimentConfig",
    "ExperimentError",
    "Kernel",
    "KernelSGD",
    "KRRModel",
    "LossSpec",
    "MissingExpansionError",
    "MultiIndex",
    "NoiseKind",
    "NumericOverflowError",
    "PRESETS",
    "RunRecord",
    "SieveConfig",
    "SieveSGD",
    "SingularFitError",
    "TargetFunction",
    "TensorSieveSGD",
    "XDist",
    "basis_matrix",
    "basis_values",
    "default_fraction_bits",
    "eval_basis",
    "eval_target",
    "eval_tensor_basis",
    "fit_loglog_slope",
    "hyperbolic_cross_indices",
    "kernel_eval",
    "krr_fit",
    "load_state",
    "logistic_regret",
    "mse_coefficient_space",
    "mse_monte_carlo",
    "orthonormality_defect",
    "parse_config",
    "projection_fit",
    "quantize_coefficients",
    "render_config",
    "run_experiment",
    "save_state",
    "truncation_level",
]
