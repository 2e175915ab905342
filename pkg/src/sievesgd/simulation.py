"""Experiment harness: data generators, error metrics, rate-slope fitting, and
the replication runner behind the CLI.

Randomness policy: every stream and every Monte Carlo evaluation is seeded
through ``numpy.random.SeedSequence`` keyed on integers, so a run is fully
determined by its config.  Replication r of a run with master seed S draws its
data from ``SeedSequence([S, r, 0])`` and its evaluation points at checkpoint n
from ``SeedSequence([S, r, 1, n])``; the generator is PCG64 throughout (see
``RNG_IDENTITY``).  Keeping evaluation seeds independent of estimator settings
gives common random numbers when comparing configurations.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, TYPE_CHECKING

import numpy as np

from .basis import BasisFamily, basis_matrix
from .baselines import Kernel, KernelSGD, krr_fit, projection_fit
from .estimator import (
    AdditiveSieveSGD,
    LossSpec,
    SieveConfig,
    SieveSGD,
    TensorSieveSGD,
    default_fraction_bits,
)

if TYPE_CHECKING:  # pragma: no cover
    from .config import ExperimentConfig

logger = logging.getLogger("sievesgd")

RNG_IDENTITY = "numpy.random.Generator(PCG64) seeded via SeedSequence(integer key list)"

_DATA_TAG = 0
_EVAL_TAG = 1


class ExperimentError(RuntimeError):
    """An estimator or generator failed; message carries replication/step context."""


class MissingExpansionError(ValueError):
    """The target has no known finite expansion in the requested family."""


# -- targets and data streams -------------------------------------------------


class TargetFunction(str, Enum):
    BERNOULLI4_POLY = "bernoulli4_poly"
    SINE_SERIES_50 = "sine_series_50"
    LOGISTIC_TENT = "logistic_tent"
    TENT_INTERACTION = "tent_interaction"


class XDist(str, Enum):
    UNIFORM01 = "uniform01"
    UNIFORM2575 = "uniform2575"
    DEPENDENT_CHAIN = "dependent_chain"


class NoiseKind(str, Enum):
    UNIFORM_PM002 = "uniform_pm002"
    UNIFORM_PM02 = "uniform_pm02"
    STD_NORMAL = "std_normal"
    BERNOULLI_LABEL = "bernoulli_label"


SINE_SERIES_TERMS = 50


def sine_series_coefficients() -> np.ndarray:
    """Coefficients of the 50-term target in the ``sine_half`` family.

    theta_j = 4 * (-1)**(j+1) * j**-4 for j <= 50, zero beyond.
    """
    js = np.arange(1, SINE_SERIES_TERMS + 1, dtype=float)
    return 4.0 * (-1.0) ** (js + 1) * js ** -4


def logistic_tent(x):
    """5 * (1 - 2|x - 1/2|): the tent-shaped log-odds surface."""
    x = np.asarray(x, dtype=float)
    return 5.0 * (1.0 - 2.0 * np.abs(x - 0.5))


def eval_target(target: TargetFunction, x):
    """Closed-form target evaluation; domain [0,1] per coordinate."""
    xs = np.asarray(x, dtype=float)
    if xs.size and (float(xs.min()) < 0.0 or float(xs.max()) > 1.0):
        raise ValueError(f"input outside the domain [0,1]: {x!r}")
    if target is TargetFunction.BERNOULLI4_POLY:
        out = xs ** 4 - 2.0 * xs ** 3 + xs ** 2 - 1.0 / 30.0
    elif target is TargetFunction.SINE_SERIES_50:
        js = np.arange(1, SINE_SERIES_TERMS + 1, dtype=float)
        signs = (-1.0) ** (js + 1)
        terms = signs * js ** -4 * np.sin((2 * js - 1) * (np.pi / 2) * xs[..., None])
        out = 4.0 * math.sqrt(2.0) * terms.sum(axis=-1)
    elif target is TargetFunction.LOGISTIC_TENT:
        out = logistic_tent(xs)
    elif target is TargetFunction.TENT_INTERACTION:
        if xs.ndim < 1 or xs.shape[-1] < 1:
            raise ValueError("tent_interaction expects vectors of coordinates")
        tent = 0.5 - np.abs(xs - 0.5)
        total = tent.sum(axis=-1)
        # sum over k <= l of t_k t_l, including the diagonal
        out = 0.5 * (total ** 2 + (tent ** 2).sum(axis=-1))
    else:
        raise ValueError(f"unknown target {target!r}")
    return float(out) if np.ndim(out) == 0 else out


def substream(*keys: int) -> np.random.Generator:
    """Deterministic PCG64 generator for an integer key path."""
    return np.random.default_rng(np.random.SeedSequence(list(keys)))


def draw_features(x_dist: XDist, n: int, dims: int, rng: np.random.Generator):
    """Feature draws: shape (n,) when dims == 1, else (n, dims)."""
    if x_dist is XDist.UNIFORM01:
        out = rng.uniform(0.0, 1.0, size=(n, dims))
    elif x_dist is XDist.UNIFORM2575:
        out = rng.uniform(0.25, 0.75, size=(n, dims))
    elif x_dist is XDist.DEPENDENT_CHAIN:
        u = rng.uniform(0.0, 1.0, size=(n, dims))
        out = np.empty_like(u)
        out[:, 0] = u[:, 0]
        for k in range(1, dims):
            out[:, k] = (u[:, k] - u[:, k - 1] + 1.0) / 2.0
    else:
        raise ValueError(f"unknown feature distribution {x_dist!r}")
    return out[:, 0] if dims == 1 else out


@dataclass(frozen=True)
class DataStream:
    """Reproducible observation source: same seed, same sequence."""

    target: TargetFunction
    x_dist: XDist
    noise: NoiseKind
    seed: int
    dims: int = 1

    def generate(self, n: int):
        """Draw (X, Y) for n observations; deterministic per (seed, n)."""
        rng = substream(self.seed)
        xs = draw_features(self.x_dist, n, self.dims, rng)
        signal = eval_target(self.target, xs)
        if self.noise is NoiseKind.UNIFORM_PM002:
            ys = signal + rng.uniform(-0.02, 0.02, size=n)
        elif self.noise is NoiseKind.UNIFORM_PM02:
            ys = signal + rng.uniform(-0.2, 0.2, size=n)
        elif self.noise is NoiseKind.STD_NORMAL:
            ys = signal + rng.standard_normal(n)
        elif self.noise is NoiseKind.BERNOULLI_LABEL:
            prob = 1.0 / (1.0 + np.exp(-signal))
            ys = np.where(rng.uniform(size=n) < prob, 1.0, -1.0)
        else:
            raise ValueError(f"unknown noise kind {self.noise!r}")
        return xs, ys


# -- error metrics -------------------------------------------------------------


def mse_monte_carlo(
    predict: Callable,
    target: TargetFunction,
    x_dist: XDist,
    m: int,
    seed: int,
    dims: int = 1,
) -> float:
    """Mean of (predict(x) - target(x))**2 over m fresh draws from x_dist.

    ``predict`` must accept an array of points.
    """
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    rng = substream(seed)
    xs = draw_features(x_dist, m, dims, rng)
    diff = np.asarray(predict(xs), dtype=float) - eval_target(target, xs)
    return float(np.mean(diff ** 2))


def mse_coefficient_space(
    avg_coefs: np.ndarray, target: TargetFunction, family: BasisFamily
) -> float:
    """Exact L2(Unif[0,1]) error from the target's known expansion.

    Only the 50-term sine target expanded in the ``sine_half`` family is
    available; anything else raises :class:`MissingExpansionError`.
    """
    if target is not TargetFunction.SINE_SERIES_50 or family is not BasisFamily.SINE_HALF:
        raise MissingExpansionError(
            f"no known finite expansion of {target.value} in family {family.value}"
        )
    theta = sine_series_coefficients()
    coefs = np.asarray(avg_coefs, dtype=float)
    width = max(coefs.size, theta.size)
    padded_c = np.zeros(width)
    padded_c[: coefs.size] = coefs
    padded_t = np.zeros(width)
    padded_t[: theta.size] = theta
    return float(np.sum((padded_c - padded_t) ** 2))


def logistic_regret(predict: Callable, m: int, seed: int) -> float:
    """Excess population logistic loss against the known optimum.

    Draws (x, y) from the tent-shaped label model (x uniform on [0,1],
    P(y=1|x) the sigmoid of the tent) and evaluates both losses on the same
    draws, so predicting the optimum gives exactly zero.
    """
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    rng = substream(seed)
    xs = rng.uniform(0.0, 1.0, size=m)
    optimum = logistic_tent(xs)
    prob = 1.0 / (1.0 + np.exp(-optimum))
    ys = np.where(rng.uniform(size=m) < prob, 1.0, -1.0)
    loss_predict = np.logaddexp(0.0, -ys * np.asarray(predict(xs), dtype=float))
    loss_optimum = np.logaddexp(0.0, -ys * optimum)
    return float(np.mean(loss_predict - loss_optimum))


# -- run records and slope fits -------------------------------------------------


@dataclass
class RunRecord:
    """One checkpoint of one replication."""

    n: int
    mse: float
    regret: Optional[float]
    op_count: int
    coef_count: int
    storage_bits: Optional[int]
    wall_time_s: float


def fit_loglog_slope(records, n_min: int, field: str = "mse"):
    """OLS line through (log10 n, log10 value) for checkpoints with n >= n_min.

    Returns (slope, intercept).  Requires at least three usable checkpoints
    and strictly positive values.
    """
    pts = []
    for rec in records:
        if rec.n < n_min:
            continue
        value = getattr(rec, field)
        if value is None:
            continue
        if value <= 0:
            raise ValueError(f"{field} must be > 0 for slope fitting, got {value} at n={rec.n}")
        pts.append((rec.n, value))
    if len(pts) < 3:
        raise ValueError(f"need at least 3 checkpoints with n >= {n_min}, have {len(pts)}")
    ns = np.log10([p[0] for p in pts])
    vals = np.log10([p[1] for p in pts])
    slope, intercept = np.polyfit(ns, vals, 1)
    return float(slope), float(intercept)


def default_checkpoints(n_max: int, per_decade: int = 10) -> list[int]:
    """Geometric checkpoint grid, ``per_decade`` points per decade, from 10 up."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if n_max < 10:
        return [n_max]
    count = int(round((math.log10(n_max) - 1.0) * per_decade)) + 1
    grid = np.logspace(1.0, math.log10(n_max), max(count, 2))
    ns = sorted(set(int(round(v)) for v in grid))
    if ns[-1] != n_max:
        ns.append(n_max)
    return ns


def aggregate_mean(records_by_rep: list[list[RunRecord]], field: str = "mse"):
    """Per-checkpoint mean across replications; returns a list of RunRecords.

    Only ``n`` and the averaged field are meaningful in the result; other
    fields carry the first replication's values.
    """
    if not records_by_rep:
        return []
    reference = records_by_rep[0]
    out = []
    for idx, ref in enumerate(reference):
        values = [getattr(reps[idx], field) for reps in records_by_rep]
        if any(v is None for v in values):
            mean = None
        else:
            mean = float(np.mean(values))
        rec = RunRecord(
            n=ref.n,
            mse=ref.mse,
            regret=ref.regret,
            op_count=ref.op_count,
            coef_count=ref.coef_count,
            storage_bits=ref.storage_bits,
            wall_time_s=ref.wall_time_s,
        )
        setattr(rec, field, mean)
        out.append(rec)
    return out


# -- experiment runner ----------------------------------------------------------


def replication_seed(seed: int, replication: int) -> int:
    """Integer data seed for one replication of a run with master seed ``seed``."""
    key = np.random.SeedSequence([seed, replication, _DATA_TAG])
    return int(key.generate_state(1, dtype=np.uint64)[0])


def evaluation_seed(seed: int, replication: int, n: int) -> int:
    """Independent evaluation seed; shared across configs with equal master seeds."""
    key = np.random.SeedSequence([seed, replication, _EVAL_TAG, n])
    return int(key.generate_state(1, dtype=np.uint64)[0])


def resolve_mse_method(config: "ExperimentConfig"):
    """Pick the error metric; returns (method, warning-or-None).

    Coefficient-space error is exact but needs the target expanded in the
    estimator's own family under the uniform feature law, and an estimator
    that exposes basis coefficients.
    """
    admits = (
        TargetFunction(config.target) is TargetFunction.SINE_SERIES_50
        and BasisFamily(config.family) is BasisFamily.SINE_HALF
        and XDist(config.x_dist) is XDist.UNIFORM01
        and config.estimator in ("sieve_sgd", "projection")
    )
    if config.mse_method == "monte_carlo":
        return "monte_carlo", None
    if config.mse_method == "coefficient_space":
        if admits:
            return "coefficient_space", None
        warning = (
            "coefficient-space MSE unavailable for "
            f"target={config.target} family={config.family} x_dist={config.x_dist} "
            f"estimator={config.estimator}; falling back to Monte Carlo"
        )
        return "monte_carlo", warning
    return ("coefficient_space" if admits else "monte_carlo"), None


def _build_streaming_estimator(config: "ExperimentConfig"):
    sieve_config = SieveConfig(
        family=BasisFamily(config.family),
        alpha=config.alpha,
        omega=config.omega,
        gamma0=config.gamma0,
        s=config.s,
        truncation=config.truncation_rule,
        quantization=default_fraction_bits if config.quantize else None,
    )
    loss = LossSpec.by_name(config.loss)
    if config.estimator == "sieve_sgd":
        return SieveSGD(sieve_config, loss=loss)
    if config.estimator == "sieve_sgd_tensor":
        return TensorSieveSGD(
            sieve_config, dims=config.dims, scale=config.tensor_scale, loss=loss
        )
    if config.estimator == "sieve_sgd_additive":
        return AdditiveSieveSGD([sieve_config] * config.dims, intercept=True)
    if config.estimator == "kernel_sgd":
        return KernelSGD(Kernel(config.kernel), gamma0=config.gamma0, s=config.s)
    raise ValueError(f"unknown streaming estimator {config.estimator!r}")


def _checkpoint_metrics(config, method, estimator, predictor, coefs, n, replication):
    if method == "coefficient_space":
        mse = mse_coefficient_space(
            coefs, TargetFunction(config.target), BasisFamily(config.family)
        )
    else:
        mse = mse_monte_carlo(
            predictor,
            TargetFunction(config.target),
            XDist(config.x_dist),
            config.mse_samples,
            evaluation_seed(config.seed, replication, n),
            dims=config.dims,
        )
    regret = None
    if config.loss == "logistic" and TargetFunction(config.target) is TargetFunction.LOGISTIC_TENT:
        regret = logistic_regret(
            predictor,
            config.mse_samples,
            evaluation_seed(config.seed, replication, n),
        )
    return mse, regret


def _replication_stream(config, replication) -> DataStream:
    return DataStream(
        target=TargetFunction(config.target),
        x_dist=XDist(config.x_dist),
        noise=NoiseKind(config.noise),
        seed=replication_seed(config.seed, replication),
        dims=config.dims,
    )


def _run_streaming_replication(config, replication, checkpoints, method):
    xs, ys = _replication_stream(config, replication).generate(config.n_max)
    estimator = _build_streaming_estimator(config)
    checkpoint_set = set(checkpoints)
    records = []
    started = time.perf_counter()
    for i in range(config.n_max):
        x_i = xs[i] if config.dims > 1 else float(xs[i])
        try:
            estimator.update(x_i, float(ys[i]))
        except Exception as exc:
            raise ExperimentError(
                f"replication {replication}, step {i + 1}: {exc}"
            ) from exc
        n = i + 1
        if n in checkpoint_set:
            op_count = estimator.op_count
            coefs = getattr(estimator, "avg_coefs", None)
            mse, regret = _checkpoint_metrics(
                config, method, estimator, estimator.as_function(), coefs, n, replication
            )
            records.append(
                RunRecord(
                    n=n,
                    mse=mse,
                    regret=regret,
                    op_count=op_count,
                    coef_count=estimator.coef_count,
                    storage_bits=getattr(estimator, "storage_bits", None),
                    wall_time_s=time.perf_counter() - started,
                )
            )
    return records


def _run_batch_replication(config, replication, checkpoints, method):
    if NoiseKind(config.noise) is NoiseKind.BERNOULLI_LABEL:
        raise ExperimentError(
            f"batch estimator {config.estimator} does not support label noise"
        )
    xs, ys = _replication_stream(config, replication).generate(config.n_max)

    records = []
    op_count = 0
    started = time.perf_counter()
    for n in checkpoints:
        try:
            if config.estimator == "projection":
                count = config.J or max(
                    int(math.floor(n ** (1.0 / (2.0 * config.s + 1.0)))), 1
                )
                count = min(count, n)
                coefs = projection_fit(xs[:n], ys[:n], count, BasisFamily(config.family))
                predictor = _projection_predictor(coefs, BasisFamily(config.family))
                op_count += n * count  # design-matrix evaluations for this refit
                coef_count = count
            else:  # krr
                model = krr_fit(xs[:n], ys[:n], Kernel(config.kernel), config.ridge)
                predictor = model.predict
                coefs = None
                op_count += n * n  # Gram-matrix kernel evaluations
                coef_count = n
        except Exception as exc:
            raise ExperimentError(
                f"replication {replication}, checkpoint n={n}: {exc}"
            ) from exc
        mse, regret = _checkpoint_metrics(
            config, method if config.estimator == "projection" else "monte_carlo",
            None, predictor, coefs, n, replication,
        )
        records.append(
            RunRecord(
                n=n,
                mse=mse,
                regret=regret,
                op_count=op_count,
                coef_count=coef_count,
                storage_bits=None,
                wall_time_s=time.perf_counter() - started,
            )
        )
    return records


def _projection_predictor(coefs: np.ndarray, family: BasisFamily):
    def predict(x):
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        out = basis_matrix(family, coefs.size, pts) @ coefs
        return float(out[0]) if np.ndim(x) == 0 else out

    return predict


def run_replication(config: "ExperimentConfig", replication: int) -> list[RunRecord]:
    """All checkpoint records for one replication."""
    checkpoints = resolve_checkpoints(config)
    method, _ = resolve_mse_method(config)
    if config.estimator in ("projection", "krr"):
        return _run_batch_replication(config, replication, checkpoints, method)
    return _run_streaming_replication(config, replication, checkpoints, method)


def resolve_checkpoints(config: "ExperimentConfig") -> list[int]:
    if config.checkpoints:
        return sorted(set(config.checkpoints))
    return default_checkpoints(config.n_max)


def _replication_task(args):
    config, replication = args
    return run_replication(config, replication)


def run_experiment(config: "ExperimentConfig", workers: int = 1) -> list[list[RunRecord]]:
    """Run all replications; returns one record list per replication.

    Replications are independent: with ``workers > 1`` they run in separate
    processes, which changes nothing about the output.
    """
    _, warning = resolve_mse_method(config)
    if warning:
        logger.warning(warning)
    reps = range(config.replications)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_replication_task, [(config, r) for r in reps]))
    return [run_replication(config, r) for r in reps]
