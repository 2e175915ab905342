"""Reference estimators: kernel SGD with iterate averaging, batch least-squares
projection onto a truncated basis, and kernel ridge regression.

These exist to benchmark the streaming sieve estimator against methods whose
statistical behavior is well understood.  Kernel SGD appends one weighted
kernel bump per observation, so its update cost grows linearly with the number
of observations seen; the batch methods refit from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .basis import basis_matrix

_CHUNK = 2048  # points per block when materializing center-by-point kernels


class SingularFitError(RuntimeError):
    """A linear solve failed or the design was rank deficient."""


class Kernel(str, Enum):
    """Closed-form kernels, selectable by string key."""

    BERNOULLI4 = "bernoulli4"
    BROWNIAN_MIN = "brownian_min"
    SOBOLEV_TENSOR = "sobolev_tensor"


def bernoulli4_poly(x):
    """x**4 - 2x**3 + x**2 - 1/30, the degree-4 Bernoulli polynomial."""
    x = np.asarray(x, dtype=float)
    return x ** 4 - 2.0 * x ** 3 + x ** 2 - 1.0 / 30.0


def kernel_eval(kernel: Kernel, s, t):
    """Evaluate K(s, t); broadcasts over array inputs.

    ``bernoulli4``: -B4({s - t}) / 24, where {x} is the fractional part
    (mapping negatives up, so {-0.25} = 0.75).
    ``brownian_min``: min(s, t).
    ``sobolev_tensor``: prod_k (1 + min(s_k, t_k)) over the last axis; inputs
    must agree on that axis.
    """
    if kernel is Kernel.BERNOULLI4:
        diff = np.asarray(s, dtype=float) - np.asarray(t, dtype=float)
        frac = diff - np.floor(diff)
        out = -bernoulli4_poly(frac) / 24.0
        return float(out) if np.ndim(out) == 0 else out
    if kernel is Kernel.BROWNIAN_MIN:
        out = np.minimum(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        return float(out) if np.ndim(out) == 0 else out
    if kernel is Kernel.SOBOLEV_TENSOR:
        sa = np.asarray(s, dtype=float)
        ta = np.asarray(t, dtype=float)
        if sa.shape[-1] != ta.shape[-1]:
            raise ValueError(
                f"dimension mismatch: {sa.shape[-1]} vs {ta.shape[-1]} coordinates"
            )
        out = np.prod(1.0 + np.minimum(sa, ta), axis=-1)
        return float(out) if np.ndim(out) == 0 else out
    raise ValueError(f"unknown kernel {kernel!r}")


def _is_single_point(kernel: Kernel, x) -> bool:
    if kernel is Kernel.SOBOLEV_TENSOR:
        return np.ndim(x) == 1
    return np.ndim(x) == 0


def _weighted_kernel_sum(kernel: Kernel, centers: np.ndarray, weights: np.ndarray, x):
    """sum_i weights[i] * K(centers[i], x), chunked over points to bound memory."""
    single = _is_single_point(kernel, x)
    pts = np.asarray(x, dtype=float)
    if single:
        pts = pts.reshape(1, -1) if kernel is Kernel.SOBOLEV_TENSOR else pts.reshape(1)
    if weights.size == 0:
        out = np.zeros(pts.shape[0])
        return float(out[0]) if single else out
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], _CHUNK):
        block = pts[start : start + _CHUNK]
        if kernel is Kernel.SOBOLEV_TENSOR:
            gram = kernel_eval(kernel, centers[:, None, :], block[None, :, :])
        else:
            gram = kernel_eval(kernel, centers[:, None], block[None, :])
        out[start : start + block.shape[0]] = weights @ gram
    return float(out[0]) if single else out


class KernelSGD:
    """Streaming kernel estimator; appends one (center, weight) pair per step.

    Weights are never modified after creation, which is what makes the
    closed-form averaged prediction below valid.  ``op_count`` tallies kernel
    evaluations performed by updates and predictions.
    """

    def __init__(self, kernel: Kernel, gamma0: float, s: float):
        if gamma0 <= 0:
            raise ValueError(f"gamma0 must be > 0, got {gamma0}")
        if s < 1:
            raise ValueError(f"s must be >= 1, got {s}")
        self.kernel = kernel
        self.gamma0 = gamma0
        self.s = s
        self.centers: list = []
        self.weights: list[float] = []
        self.step = 0
        self.op_count = 0
        self._centers_arr = np.zeros(0)
        self._weights_arr = np.zeros(0)
        self._arrays_stale = False

    @property
    def coef_count(self) -> int:
        return self.step

    def _arrays(self):
        if self._arrays_stale:
            self._centers_arr = np.asarray(self.centers, dtype=float)
            self._weights_arr = np.asarray(self.weights, dtype=float)
            self._arrays_stale = False
        return self._centers_arr, self._weights_arr

    def update(self, x, y: float) -> None:
        i = self.step + 1
        centers, weights = self._arrays()
        residual = y - _weighted_kernel_sum(self.kernel, centers, weights, x)
        gamma = self.gamma0 * i ** (-1.0 / (2.0 * self.s + 1.0))
        weight = gamma * residual
        if not math.isfinite(weight):
            raise FloatingPointError(f"non-finite kernel weight at step {i}")
        self.centers.append(x)
        self.weights.append(weight)
        self.step = i
        self.op_count += i  # i-1 kernel evaluations plus the append
        self._arrays_stale = True

    def _point_count(self, x) -> int:
        return 1 if _is_single_point(self.kernel, x) else np.asarray(x).shape[0]

    def predict(self, x):
        """Current (unaveraged) iterate at x."""
        self.op_count += self.step * self._point_count(x)
        centers, weights = self._arrays()
        return _weighted_kernel_sum(self.kernel, centers, weights, x)

    def _triangular_weights(self) -> np.ndarray:
        n = self.step
        _, weights = self._arrays()
        return weights * ((n + 1 - np.arange(1, n + 1)) / (n + 1.0))

    def predict_averaged(self, x):
        """Average of all iterates (including the zero initial one) at x.

        The iterate after k steps contains center i exactly when k >= i, so
        the average of iterates 0..n weights center i by (n+1-i)/(n+1).
        """
        self.op_count += self.step * self._point_count(x)
        centers, _ = self._arrays()
        return _weighted_kernel_sum(self.kernel, centers, self._triangular_weights(), x)

    def as_function(self):
        """Detached snapshot of the averaged estimate (does not touch state)."""
        kernel = self.kernel
        centers, _ = self._arrays()
        centers = centers.copy()
        triangular = self._triangular_weights().copy()
        return lambda x: _weighted_kernel_sum(kernel, centers, triangular, x)


def projection_fit(xs, ys, count: int, family) -> np.ndarray:
    """Least-squares coefficients of the first ``count`` basis functions.

    Raises :class:`SingularFitError` when the design matrix is rank deficient
    (including the n < count case).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if xs.size < count:
        raise SingularFitError(
            f"need at least {count} observations to fit {count} coefficients, got {xs.size}"
        )
    design = basis_matrix(family, count, xs)
    coefs, _, rank, _ = np.linalg.lstsq(design, ys, rcond=None)
    if rank < count:
        raise SingularFitError(f"design matrix has rank {rank} < {count}")
    return coefs


@dataclass
class KRRModel:
    """Dual-weight kernel ridge fit: predict(x) = sum_i a_i K(x_i, x)."""

    kernel: Kernel
    centers: np.ndarray
    dual_weights: np.ndarray

    def predict(self, x):
        return _weighted_kernel_sum(self.kernel, self.centers, self.dual_weights, x)


def krr_fit(xs, ys, kernel: Kernel, ridge: float) -> KRRModel:
    """Solve (G + n*ridge*I) a = y for the dual weights.

    The n*ridge*I parameterization keeps the ridge value scale-free in the
    number of observations.
    """
    if ridge <= 0:
        raise ValueError(f"ridge must be > 0, got {ridge}")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = xs.shape[0]
    if kernel is Kernel.SOBOLEV_TENSOR:
        gram = kernel_eval(kernel, xs[:, None, :], xs[None, :, :])
    else:
        gram = kernel_eval(kernel, xs[:, None], xs[None, :])
    system = gram + n * ridge * np.eye(n)
    try:
        weights = np.linalg.solve(system, ys)
    except np.linalg.LinAlgError as exc:
        raise SingularFitError(f"ridge system solve failed: {exc}") from exc
    return KRRModel(kernel=kernel, centers=xs, dual_weights=weights)
