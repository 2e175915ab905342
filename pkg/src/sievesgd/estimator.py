"""Streaming sieve estimators: growing basis truncation, per-component learning
rates, and iterate averaging.

The central object is :class:`SieveSGD`.  After ``i`` observations it keeps the
coefficients of the first ``J_i`` basis functions, where the truncation level
``J_i`` grows with the observation counter.  Each update performs one stochastic
gradient step with step size ``gamma0 * i**(-1/(2s+1))``, damped per component
by ``j**(-2*omega)``, then folds the new iterate into a running average of all
iterates (including the zero initial state).  The averaged coefficients are the
returned estimate.

:class:`AdditiveSieveSGD` fits a sum of univariate components plus an optional
intercept, sharing a single residual across coordinates.
:class:`TensorSieveSGD` fits a tensor-product basis whose active set is the
prefix of the index-product ordering.

States are single-writer: updates must be applied sequentially.  Reading
(prediction) is safe whenever no update is in flight, and detached snapshot
predictors from :meth:`as_function` never touch the state at all.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .basis import (
    BasisFamily,
    MultiIndex,
    basis_matrix,
    basis_values,
    hyperbolic_cross_indices,
)

TruncationRule = Union[str, Callable[[int], int]]

POWER_LAW = "power_law"
POWER_LOG_SQUARED = "power_log_squared"

#: Bits reported per stored coefficient on top of the fractional part
#: (sign plus integer-part allowance).
HEADER_BITS = 16

STATE_FORMAT_VERSION = 1


class NumericOverflowError(FloatingPointError):
    """An update produced a non-finite value; the state is no longer usable."""


@dataclass(frozen=True)
class LossSpec:
    """A loss and its pseudo-residual g(y, v) = -d/dv loss(y, v).

    The update direction is ``+ g``, so both losses descend.
    """

    kind: str
    value: Callable[[float, np.ndarray], np.ndarray]
    pseudo_residual: Callable[[float, float], float]

    @staticmethod
    def squared() -> "LossSpec":
        return LossSpec(
            kind="squared",
            value=lambda y, v: 0.5 * (y - v) ** 2,
            pseudo_residual=lambda y, v: y - v,
        )

    @staticmethod
    def logistic() -> "LossSpec":
        """log(1 + exp(-y*v)) for labels y in {-1, +1}."""

        def value(y, v):
            return np.logaddexp(0.0, -y * v)

        def pseudo_residual(y, v):
            # y / (1 + exp(y*v)), written via tanh so it never overflows.
            return y * 0.5 * (1.0 - math.tanh(0.5 * y * v))

        return LossSpec(kind="logistic", value=value, pseudo_residual=pseudo_residual)

    @staticmethod
    def by_name(kind: str) -> "LossSpec":
        if kind == "squared":
            return LossSpec.squared()
        if kind == "logistic":
            return LossSpec.logistic()
        raise ValueError(f"unknown loss {kind!r}")


def default_fraction_bits(i: int) -> int:
    """ceil(3*log2(max(i, 2))) fractional bits at step i.

    Makes the per-step rounding error at most 2**(-bits-1) <= i**-3, small
    enough that coarse storage never shows up in the convergence rate.
    """
    return math.ceil(3.0 * math.log2(max(i, 2)))


def quantize_coefficients(coefs: np.ndarray, fraction_bits: int) -> np.ndarray:
    """Round each entry to the nearest multiple of 2**-fraction_bits.

    Ties go to even, matching IEEE default rounding.
    """
    scale = 2.0 ** fraction_bits
    return np.round(coefs * scale) / scale


@dataclass(frozen=True)
class SieveConfig:
    """Hyperparameters of a univariate sieve estimator.

    alpha   -- truncation growth exponent (J_i = floor(i**alpha) under the
               power-law rule)
    omega   -- per-component damping exponent; component j learns at relative
               rate j**(-2*omega)
    gamma0  -- step-size scale; step i uses gamma0 * i**(-1/(2s+1))
    s       -- assumed smoothness of the target, driving the step-size decay
    truncation -- "power_law", "power_log_squared", or a custom callable
               i -> J_i (callables are a programmatic convenience and cannot
               appear in config files)
    quantization -- optional rule i -> fractional bits; when set, stored
               coefficients are rounded after every update
    """

    family: BasisFamily
    alpha: float = 0.5
    omega: float = 1.0
    gamma0: float = 1.0
    s: float = 2.0
    truncation: TruncationRule = POWER_LAW
    quantization: Optional[Callable[[int], int]] = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.omega <= 0.5:
            raise ValueError(f"omega must be > 1/2, got {self.omega}")
        if self.gamma0 <= 0:
            raise ValueError(f"gamma0 must be > 0, got {self.gamma0}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if isinstance(self.truncation, str) and self.truncation not in (
            POWER_LAW,
            POWER_LOG_SQUARED,
        ):
            raise ValueError(f"unknown truncation rule {self.truncation!r}")

    def step_size(self, i: int) -> float:
        return self.gamma0 * i ** (-1.0 / (2.0 * self.s + 1.0))


def truncation_level(i: int, config: SieveConfig) -> int:
    """Number of active basis functions at step i; nondecreasing, >= 1."""
    if i < 1:
        raise ValueError(f"step must be >= 1, got {i}")
    rule = config.truncation
    if callable(rule):
        return max(int(rule(i)), 1)
    if rule == POWER_LAW:
        # The tiny nudge guards against pow() landing just below an exact
        # integer (e.g. 8**(1/3) = 1.9999...).
        return max(int(math.floor(i ** config.alpha + 1e-12)), 1)
    # power_log_squared, natural log, clamped to >= 1
    exponent = 1.0 / (2.0 * config.s + 1.0)
    return max(int(math.floor(i ** exponent * math.log(i) ** 2 + 1e-12)), 1)


def _check_scalar_domain(x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"input outside the domain [0,1]: {x!r}")
    return x


class SieveSGD:
    """Univariate streaming estimator over a growing truncated basis.

    ``raw_coefs`` holds the current iterate, ``avg_coefs`` the running average
    of all iterates (the estimate).  ``op_count`` tallies basis-function
    evaluations: each update adds J_prev + 2*J_new (residual evaluation plus
    coefficient update plus averaging bookkeeping), and each prediction adds
    the current truncation per evaluated point.
    """

    def __init__(self, config: SieveConfig, loss: Optional[LossSpec] = None):
        self.config = config
        self.loss = loss if loss is not None else LossSpec.squared()
        self.raw_coefs = np.zeros(0)
        self.avg_coefs = np.zeros(0)
        self.step = 0
        self.op_count = 0
        self._weights = np.zeros(0)

    @property
    def truncation(self) -> int:
        return self.raw_coefs.size

    @property
    def coef_count(self) -> int:
        return self.raw_coefs.size

    def _grow(self, count: int) -> None:
        have = self.raw_coefs.size
        if count <= have:
            return
        pad = count - have
        self.raw_coefs = np.concatenate([self.raw_coefs, np.zeros(pad)])
        self.avg_coefs = np.concatenate([self.avg_coefs, np.zeros(pad)])
        js = np.arange(have + 1, count + 1, dtype=float)
        self._weights = np.concatenate(
            [self._weights, js ** (-2.0 * self.config.omega)]
        )

    def update(self, x: float, y: float) -> None:
        """Consume one observation.  Must be called sequentially."""
        x = _check_scalar_domain(x)
        i = self.step + 1
        j_prev = self.raw_coefs.size
        j_new = max(truncation_level(i, self.config), j_prev)
        self._grow(j_new)

        psi = basis_values(self.config.family, j_new, x)
        # Residual is taken at the previous truncation; entries past j_prev
        # are zero anyway, so the slice only saves work.
        v = float(self.raw_coefs[:j_prev] @ psi[:j_prev])
        g = self.loss.pseudo_residual(y, v)
        scale = self.config.step_size(i) * g
        if not math.isfinite(scale):
            raise NumericOverflowError(
                f"non-finite update at step {i}: residual scale {scale!r}"
            )
        self.raw_coefs += scale * (self._weights * psi)

        self.avg_coefs *= i / (i + 1.0)
        self.avg_coefs += (1.0 / (i + 1.0)) * self.raw_coefs

        self.op_count += j_prev + 2 * j_new
        self.step = i
        if self.config.quantization is not None:
            self._apply_quantization()
        if not np.isfinite(self.raw_coefs).all():
            raise NumericOverflowError(f"non-finite coefficient after step {i}")

    def _apply_quantization(self) -> None:
        bits = self.config.quantization(self.step)
        self.raw_coefs = quantize_coefficients(self.raw_coefs, bits)
        self.avg_coefs = quantize_coefficients(self.avg_coefs, bits)

    def _predict_with(self, coefs: np.ndarray, x):
        scalar = np.ndim(x) == 0
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        if pts.size and (float(pts.min()) < 0.0 or float(pts.max()) > 1.0):
            raise ValueError(f"input outside the domain [0,1]: {x!r}")
        self.op_count += coefs.size * pts.size
        if coefs.size == 0:
            out = np.zeros(pts.size)
        else:
            out = basis_matrix(self.config.family, coefs.size, pts) @ coefs
        return float(out[0]) if scalar else out

    def predict_raw(self, x):
        """Current iterate evaluated at x (scalar or 1-d array of points)."""
        return self._predict_with(self.raw_coefs, x)

    def predict(self, x):
        """The averaged estimate evaluated at x (scalar or 1-d array)."""
        return self._predict_with(self.avg_coefs, x)

    def as_function(self) -> Callable[[np.ndarray], np.ndarray]:
        """Detached snapshot of the averaged estimate.

        The returned callable evaluates a frozen copy of the coefficients and
        neither mutates the state nor contributes to ``op_count``.
        """
        coefs = self.avg_coefs.copy()
        family = self.config.family
        return _coefficient_predictor(coefs, family)

    @property
    def storage_bits(self) -> Optional[int]:
        """Reported storage when quantized: J * (fraction bits + header)."""
        if self.config.quantization is None:
            return None
        if self.step == 0:
            return 0
        return self.raw_coefs.size * (self.config.quantization(self.step) + HEADER_BITS)


def _coefficient_predictor(coefs: np.ndarray, family: BasisFamily):
    def predict(x):
        scalar = np.ndim(x) == 0
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        if coefs.size == 0:
            out = np.zeros(pts.size)
        else:
            out = basis_matrix(family, coefs.size, pts) @ coefs
        return float(out[0]) if scalar else out

    return predict


class AdditiveSieveSGD:
    """Sum of univariate sieve components plus an optional shared intercept.

    All coordinates share one residual and one step-size schedule (so the
    per-dimension configs must agree on gamma0 and s), but each coordinate has
    its own family, damping exponent, and truncation rule.  With the intercept
    disabled and p = 1 this reproduces :class:`SieveSGD` exactly.
    """

    def __init__(self, configs: Sequence[SieveConfig], intercept: bool = True):
        if not configs:
            raise ValueError("need at least one coordinate config")
        first = configs[0]
        for cfg in configs[1:]:
            if cfg.gamma0 != first.gamma0 or cfg.s != first.s:
                raise ValueError("all coordinates must share gamma0 and s")
        self.configs = list(configs)
        self.use_intercept = intercept
        p = len(configs)
        self.raw_coefs = [np.zeros(0) for _ in range(p)]
        self.avg_coefs = [np.zeros(0) for _ in range(p)]
        self._weights = [np.zeros(0) for _ in range(p)]
        self.intercept_raw = 0.0
        self.intercept_avg = 0.0
        self.step = 0
        self.op_count = 0

    @property
    def dims(self) -> int:
        return len(self.configs)

    @property
    def coef_count(self) -> int:
        total = sum(c.size for c in self.raw_coefs)
        return total + (1 if self.use_intercept else 0)

    def _grow(self, k: int, count: int) -> None:
        have = self.raw_coefs[k].size
        if count <= have:
            return
        pad = count - have
        self.raw_coefs[k] = np.concatenate([self.raw_coefs[k], np.zeros(pad)])
        self.avg_coefs[k] = np.concatenate([self.avg_coefs[k], np.zeros(pad)])
        js = np.arange(have + 1, count + 1, dtype=float)
        self._weights[k] = np.concatenate(
            [self._weights[k], js ** (-2.0 * self.configs[k].omega)]
        )

    def _check_input(self, x) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        if xs.ndim != 1 or xs.size != self.dims:
            raise ValueError(
                f"dimension mismatch: expected {self.dims} coordinates, got shape {xs.shape}"
            )
        return xs

    def update(self, x, y: float) -> None:
        xs = self._check_input(x)
        i = self.step + 1
        j_prev = [c.size for c in self.raw_coefs]
        j_new = [
            max(truncation_level(i, cfg), j_prev[k])
            for k, cfg in enumerate(self.configs)
        ]
        for k in range(self.dims):
            self._grow(k, j_new[k])

        psis = [
            basis_values(self.configs[k].family, j_new[k], float(xs[k]))
            for k in range(self.dims)
        ]
        v = 0.0
        for k in range(self.dims):
            v += float(self.raw_coefs[k][: j_prev[k]] @ psis[k][: j_prev[k]])
        res = y - v
        if self.use_intercept:
            res = res - self.intercept_raw
        gamma = self.configs[0].step_size(i)
        scale = gamma * res
        if not math.isfinite(scale):
            raise NumericOverflowError(
                f"non-finite update at step {i}: residual scale {scale!r}"
            )

        w_old = i / (i + 1.0)
        w_new = 1.0 / (i + 1.0)
        for k in range(self.dims):
            self.raw_coefs[k] += scale * (self._weights[k] * psis[k])
            self.avg_coefs[k] *= w_old
            self.avg_coefs[k] += w_new * self.raw_coefs[k]
        if self.use_intercept:
            self.intercept_raw += scale
            self.intercept_avg = w_old * self.intercept_avg + w_new * self.intercept_raw

        self.op_count += sum(j_prev) + 2 * sum(j_new)
        self.step = i
        for k in range(self.dims):
            if not np.isfinite(self.raw_coefs[k]).all():
                raise NumericOverflowError(f"non-finite coefficient after step {i}")

    def predict(self, x) -> float:
        xs = self._check_input(x)
        out = self.intercept_avg if self.use_intercept else 0.0
        for k in range(self.dims):
            count = self.avg_coefs[k].size
            self.op_count += count
            if count:
                psi = basis_values(self.configs[k].family, count, float(xs[k]))
                out += float(self.avg_coefs[k] @ psi)
        return out

    def as_function(self):
        coef_copies = [c.copy() for c in self.avg_coefs]
        intercept = self.intercept_avg if self.use_intercept else 0.0
        families = [cfg.family for cfg in self.configs]

        def predict(x):
            pts = np.asarray(x, dtype=float)
            scalar = pts.ndim == 1
            if scalar:
                pts = pts.reshape(1, -1)
            out = np.full(pts.shape[0], intercept)
            for k, coefs in enumerate(coef_copies):
                if coefs.size:
                    out += basis_matrix(families[k], coefs.size, pts[:, k]) @ coefs
            return float(out[0]) if scalar else out

        return predict


class TensorSieveSGD:
    """Tensor-product sieve estimator over a hyperbolic-cross active set.

    The active set after i observations is the first
    ``ceil(scale * dims * i**(1/(2s+1)))`` multi-indices in index-product
    order, and the multi-index ``j`` is damped by ``(prod j)**(-2*omega)``.
    With dims = 1 (and a matching size schedule) this reduces to
    :class:`SieveSGD` exactly.
    """

    def __init__(
        self,
        config: SieveConfig,
        dims: int,
        scale: float = 4.0,
        active_size: Optional[Callable[[int], int]] = None,
        loss: Optional[LossSpec] = None,
    ):
        if dims < 1:
            raise ValueError(f"dims must be >= 1, got {dims}")
        if scale <= 0:
            raise ValueError(f"scale must be > 0, got {scale}")
        self.config = config
        self.dims = dims
        self.scale = scale
        self.loss = loss if loss is not None else LossSpec.squared()
        self._active_size = active_size or self._default_active_size
        self.active: list[MultiIndex] = []
        self._index_matrix = np.zeros((0, dims), dtype=int)
        self._weights = np.zeros(0)
        self.raw_coefs = np.zeros(0)
        self.avg_coefs = np.zeros(0)
        self.step = 0
        self.op_count = 0

    def _default_active_size(self, i: int) -> int:
        exponent = 1.0 / (2.0 * self.config.s + 1.0)
        return int(math.ceil(self.scale * self.dims * i ** exponent))

    @property
    def coef_count(self) -> int:
        return self.raw_coefs.size

    def _grow(self, count: int) -> None:
        have = self.raw_coefs.size
        if count <= have:
            return
        full = hyperbolic_cross_indices(self.dims, count)
        fresh = full[have:]
        self.active = full
        self._index_matrix = np.array(
            [mi.indices for mi in full], dtype=int
        ).reshape(count, self.dims)
        products = np.array([mi.product for mi in fresh], dtype=float)
        pad = count - have
        self._weights = np.concatenate(
            [self._weights, products ** (-2.0 * self.config.omega)]
        )
        self.raw_coefs = np.concatenate([self.raw_coefs, np.zeros(pad)])
        self.avg_coefs = np.concatenate([self.avg_coefs, np.zeros(pad)])

    def _check_input(self, x) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        if xs.ndim != 1 or xs.size != self.dims:
            raise ValueError(
                f"dimension mismatch: expected {self.dims} coordinates, got shape {xs.shape}"
            )
        if xs.size and (float(xs.min()) < 0.0 or float(xs.max()) > 1.0):
            raise ValueError(f"input outside the domain [0,1]^p: {x!r}")
        return xs

    def _tensor_values(self, xs: np.ndarray, count: int) -> np.ndarray:
        """Values of the first ``count`` active tensor functions at xs."""
        if count == 0:
            return np.zeros(0)
        idx = self._index_matrix[:count]
        out = None
        for k in range(self.dims):
            max_j = int(idx[:, k].max())
            uni = basis_values(self.config.family, max_j, float(xs[k]))
            col = uni[idx[:, k] - 1]
            out = col if out is None else out * col
        return out

    def update(self, x, y: float) -> None:
        xs = self._check_input(x)
        i = self.step + 1
        j_prev = self.raw_coefs.size
        j_new = max(self._active_size(i), j_prev, 1)
        self._grow(j_new)

        psi = self._tensor_values(xs, j_new)
        v = float(self.raw_coefs[:j_prev] @ psi[:j_prev])
        g = self.loss.pseudo_residual(y, v)
        scale = self.config.step_size(i) * g
        if not math.isfinite(scale):
            raise NumericOverflowError(
                f"non-finite update at step {i}: residual scale {scale!r}"
            )
        self.raw_coefs += scale * (self._weights * psi)

        self.avg_coefs *= i / (i + 1.0)
        self.avg_coefs += (1.0 / (i + 1.0)) * self.raw_coefs

        self.op_count += j_prev + 2 * j_new
        self.step = i
        if not np.isfinite(self.raw_coefs).all():
            raise NumericOverflowError(f"non-finite coefficient after step {i}")

    def predict(self, x) -> float:
        xs = self._check_input(x)
        count = self.avg_coefs.size
        self.op_count += count
        if count == 0:
            return 0.0
        return float(self.avg_coefs @ self._tensor_values(xs, count))

    def as_function(self):
        coefs = self.avg_coefs.copy()
        idx = self._index_matrix.copy()
        family = self.config.family
        dims = self.dims

        def predict(x):
            pts = np.asarray(x, dtype=float)
            scalar = pts.ndim == 1
            if scalar:
                pts = pts.reshape(1, -1)
            if coefs.size == 0:
                out = np.zeros(pts.shape[0])
                return float(out[0]) if scalar else out
            design = None
            for k in range(dims):
                max_j = int(idx[:, k].max())
                uni = basis_matrix(family, max_j, pts[:, k])
                col = uni[:, idx[:, k] - 1]
                design = col if design is None else design * col
            out = design @ coefs
            return float(out[0]) if scalar else out

        return predict


# -- state snapshots ---------------------------------------------------------


def state_to_dict(estimator: SieveSGD) -> dict:
    """Serializable dump of a univariate state; floats stored exactly as hex."""
    cfg = estimator.config
    if callable(cfg.truncation):
        raise ValueError("custom truncation callables cannot be serialized")
    if cfg.quantization is not None and cfg.quantization is not default_fraction_bits:
        raise ValueError("custom quantization rules cannot be serialized")
    return {
        "version": STATE_FORMAT_VERSION,
        "config": {
            "family": cfg.family.value,
            "alpha": cfg.alpha,
            "omega": cfg.omega,
            "gamma0": cfg.gamma0,
            "s": cfg.s,
            "truncation": cfg.truncation,
            "quantization": "default" if cfg.quantization is not None else None,
        },
        "loss": estimator.loss.kind,
        "step": estimator.step,
        "op_count": estimator.op_count,
        "raw_coefs": [float(v).hex() for v in estimator.raw_coefs],
        "avg_coefs": [float(v).hex() for v in estimator.avg_coefs],
    }


def state_from_dict(payload: dict) -> SieveSGD:
    version = payload.get("version")
    if version != STATE_FORMAT_VERSION:
        raise ValueError(f"unsupported state format version {version!r}")
    raw_cfg = payload["config"]
    config = SieveConfig(
        family=BasisFamily(raw_cfg["family"]),
        alpha=raw_cfg["alpha"],
        omega=raw_cfg["omega"],
        gamma0=raw_cfg["gamma0"],
        s=raw_cfg["s"],
        truncation=raw_cfg["truncation"],
        quantization=default_fraction_bits
        if raw_cfg.get("quantization") == "default"
        else None,
    )
    est = SieveSGD(config, loss=LossSpec.by_name(payload["loss"]))
    est.step = int(payload["step"])
    est.op_count = int(payload["op_count"])
    est.raw_coefs = np.array([float.fromhex(v) for v in payload["raw_coefs"]])
    est.avg_coefs = np.array([float.fromhex(v) for v in payload["avg_coefs"]])
    js = np.arange(1, est.raw_coefs.size + 1, dtype=float)
    est._weights = js ** (-2.0 * config.omega)
    return est


def save_state(estimator: SieveSGD, path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(estimator), indent=1))


def load_state(path) -> SieveSGD:
    return state_from_dict(json.loads(Path(path).read_text()))
