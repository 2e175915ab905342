"""Trigonometric basis families on [0,1] and tensor products ordered by index product.

Three univariate families are provided, all uniformly bounded by sqrt(2):

* ``cosine_eigen``: psi_1(x) = 1, psi_j(x) = sqrt(2)*cos((j-1)*pi*x) for j >= 2.
  Orthonormal for Lebesgue measure on [0,1].
* ``sine_half``: psi_j(x) = sqrt(2)*sin((2j-1)*pi*x/2).  Orthonormal for
  Lebesgue measure on [0,1].
* ``trig_pairs``: psi_j(x) = sin(2*pi*ceil(j/2)*x) for even j and
  cos(2*pi*ceil(j/2)*x) for odd j.  Deliberately kept in this raw form (no
  sqrt(2) factor, no constant term), so it is *not* unit-normalized; the
  per-index integral of psi_j^2 is 1/2.

A key name for an algebraic-polynomial family is reserved but not implemented.

Multivariate bases are tensor products of a univariate family, enumerated in
increasing order of the product of the coordinate indices (ties broken
lexicographically), so low-interaction functions enter first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

SQRT2 = math.sqrt(2.0)


class BasisFamily(str, Enum):
    """Univariate function system on [0,1], selectable by string key."""

    COSINE_EIGEN = "cosine_eigen"
    SINE_HALF = "sine_half"
    TRIG_PAIRS = "trig_pairs"


def _check_index(j: int) -> None:
    if j < 1:
        raise ValueError(f"basis index must be >= 1, got {j}")


def _check_domain(x) -> None:
    # Works for scalars and arrays; every coordinate must lie in [0,1].
    arr = np.asarray(x)
    if arr.size and (float(arr.min()) < 0.0 or float(arr.max()) > 1.0):
        raise ValueError(f"input outside the domain [0,1]: {x!r}")


def eval_basis(family: BasisFamily, j: int, x: float) -> float:
    """Evaluate psi_j(x) for the given family.

    ``j`` must be >= 1 and ``x`` must lie in [0,1].
    """
    _check_index(j)
    _check_domain(x)
    if family is BasisFamily.COSINE_EIGEN:
        if j == 1:
            return 1.0
        return float(SQRT2 * np.cos((j - 1) * np.pi * x))
    if family is BasisFamily.SINE_HALF:
        return float(SQRT2 * np.sin((2 * j - 1) * (np.pi / 2) * x))
    if family is BasisFamily.TRIG_PAIRS:
        m = (j + 1) // 2
        if j % 2 == 0:
            return float(np.sin(2 * np.pi * m * x))
        return float(np.cos(2 * np.pi * m * x))
    raise ValueError(f"unknown basis family {family!r}")


def basis_values(family: BasisFamily, count: int, x: float) -> np.ndarray:
    """Values of psi_1(x)..psi_count(x) as a float64 vector.

    Vectorized over the index; this is the hot path of every streaming update.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count == 0:
        return np.zeros(0)
    _check_domain(x)
    js = np.arange(1, count + 1)
    if family is BasisFamily.COSINE_EIGEN:
        out = SQRT2 * np.cos((js - 1) * np.pi * x)
        out[0] = 1.0
        return out
    if family is BasisFamily.SINE_HALF:
        return SQRT2 * np.sin((2 * js - 1) * (np.pi / 2) * x)
    if family is BasisFamily.TRIG_PAIRS:
        m = (js + 1) // 2
        angles = 2 * np.pi * m * x
        return np.where(js % 2 == 0, np.sin(angles), np.cos(angles))
    raise ValueError(f"unknown basis family {family!r}")


def basis_matrix(family: BasisFamily, count: int, xs: np.ndarray) -> np.ndarray:
    """Design matrix [psi_j(x_i)]_{ij} of shape (len(xs), count)."""
    xs = np.asarray(xs, dtype=float)
    if count == 0:
        return np.zeros((xs.size, 0))
    _check_domain(xs)
    js = np.arange(1, count + 1)
    col = xs.reshape(-1, 1)
    if family is BasisFamily.COSINE_EIGEN:
        out = SQRT2 * np.cos((js - 1) * np.pi * col)
        out[:, 0] = 1.0
        return out
    if family is BasisFamily.SINE_HALF:
        return SQRT2 * np.sin((2 * js - 1) * (np.pi / 2) * col)
    if family is BasisFamily.TRIG_PAIRS:
        m = (js + 1) // 2
        angles = 2 * np.pi * m * col
        return np.where(js % 2 == 0, np.sin(angles), np.cos(angles))
    raise ValueError(f"unknown basis family {family!r}")


@dataclass(frozen=True)
class MultiIndex:
    """Vector of positive integer basis indices with its cached product."""

    indices: tuple[int, ...]
    product: int = field(init=False)

    def __post_init__(self):
        if not self.indices:
            raise ValueError("multi-index must have at least one coordinate")
        if any(v < 1 for v in self.indices):
            raise ValueError(f"multi-index entries must be >= 1: {self.indices}")
        object.__setattr__(self, "product", math.prod(self.indices))

    def __len__(self) -> int:
        return len(self.indices)


def _tuples_with_product_at_most(p: int, bound: int) -> list[tuple[int, ...]]:
    if p == 1:
        return [(v,) for v in range(1, bound + 1)]
    out = []
    for head in range(1, bound + 1):
        for tail in _tuples_with_product_at_most(p - 1, bound // head):
            out.append((head, *tail))
    return out


def hyperbolic_cross_indices(p: int, count: int) -> list[MultiIndex]:
    """The ``count`` multi-indices in (N+)^p with smallest index products.

    Sorted ascending by product; ties broken lexicographically on the index
    vector, so the result for a smaller ``count`` is always a prefix of the
    result for a larger one.
    """
    if p < 1:
        raise ValueError(f"dimension must be >= 1, got {p}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    bound = 1
    while True:
        # (1,...,1,v) alone contributes `bound` tuples, so this terminates.
        tuples = _tuples_with_product_at_most(p, bound)
        if len(tuples) >= count:
            break
        bound *= 2
    tuples.sort(key=lambda t: (math.prod(t), t))
    return [MultiIndex(t) for t in tuples[:count]]


def eval_tensor_basis(family: BasisFamily, mi: MultiIndex, x) -> float:
    """Product of univariate evaluations: psi_mi(x) = prod_k psi_{mi[k]}(x[k])."""
    xs = np.asarray(x, dtype=float)
    if xs.ndim != 1 or xs.size != len(mi):
        raise ValueError(
            f"dimension mismatch: index has {len(mi)} coordinates, input has shape {xs.shape}"
        )
    out = 1.0
    for j, xk in zip(mi.indices, xs):
        out *= eval_basis(family, j, float(xk))
    return out


def orthonormality_defect(
    family: BasisFamily, i: int, j: int, quadrature_points: int
) -> float:
    """|midpoint-rule estimate of integral(psi_i * psi_j) - delta_ij| on [0,1].

    Composite midpoint is accurate enough for these smooth integrands; with
    1e4 points the residual for exact-zero or exact-one integrals is < 1e-8.
    """
    _check_index(i)
    _check_index(j)
    if quadrature_points < 2:
        raise ValueError(f"need at least 2 quadrature points, got {quadrature_points}")
    grid = (np.arange(quadrature_points) + 0.5) / quadrature_points
    vi = basis_matrix(family, i, grid)[:, i - 1]
    vj = basis_matrix(family, j, grid)[:, j - 1]
    estimate = float(np.mean(vi * vj))
    return abs(estimate - (1.0 if i == j else 0.0))
