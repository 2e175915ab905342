"""Tests for kernel SGD, the batch projection fit, and kernel ridge regression."""

import numpy as np
import pytest

from sievesgd.basis import BasisFamily, basis_matrix
from sievesgd.baselines import (
    Kernel,
    KernelSGD,
    SingularFitError,
    bernoulli4_poly,
    kernel_eval,
    krr_fit,
    projection_fit,
)


class TestKernelEval:
    def test_brownian_min(self):
        assert kernel_eval(Kernel.BROWNIAN_MIN, 0.3, 0.7) == 0.3

    def test_bernoulli4_on_diagonal(self):
        # -B4(0)/24 = (1/30)/24 = 1/720
        for x in (0.0, 0.37, 0.9):
            assert kernel_eval(Kernel.BERNOULLI4, x, x) == pytest.approx(
                1.0 / 720.0, rel=1e-12
            )

    def test_bernoulli4_wraps_negative_differences(self):
        # fractional part maps -0.25 to 0.75
        value = kernel_eval(Kernel.BERNOULLI4, 0.25, 0.5)
        assert value == pytest.approx(-bernoulli4_poly(0.75) / 24.0, rel=1e-12)

    def test_sobolev_tensor_with_zero_coordinate(self):
        assert kernel_eval(
            Kernel.SOBOLEV_TENSOR, np.array([0.0, 0.0]), np.array([1.0, 1.0])
        ) == pytest.approx(1.0, rel=1e-12)

    def test_sobolev_tensor_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernel_eval(Kernel.SOBOLEV_TENSOR, np.zeros(2), np.zeros(3))

    @pytest.mark.parametrize("kernel", [Kernel.BERNOULLI4, Kernel.BROWNIAN_MIN])
    def test_symmetry_univariate(self, kernel):
        rng = np.random.default_rng(1)
        for _ in range(30):
            s, t = rng.uniform(0, 1, size=2)
            assert kernel_eval(kernel, s, t) == pytest.approx(
                kernel_eval(kernel, t, s), rel=1e-12, abs=1e-15
            )

    def test_symmetry_tensor(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            s, t = rng.uniform(0, 1, size=(2, 3))
            assert kernel_eval(Kernel.SOBOLEV_TENSOR, s, t) == pytest.approx(
                kernel_eval(Kernel.SOBOLEV_TENSOR, t, s), rel=1e-12
            )

    @pytest.mark.parametrize("kernel", list(Kernel))
    def test_gram_matrices_numerically_psd(self, kernel):
        rng = np.random.default_rng(3)
        for size in (5, 12, 20):
            if kernel is Kernel.SOBOLEV_TENSOR:
                pts = rng.uniform(0, 1, size=(size, 2))
                gram = kernel_eval(kernel, pts[:, None, :], pts[None, :, :])
            else:
                pts = rng.uniform(0, 1, size=size)
                gram = kernel_eval(kernel, pts[:, None], pts[None, :])
            assert np.allclose(gram, gram.T)
            assert np.linalg.eigvalsh(gram).min() >= -1e-9


class TestKernelSGD:
    def test_first_update_weight(self):
        est = KernelSGD(Kernel.BROWNIAN_MIN, gamma0=2.0, s=2.0)
        est.update(0.4, 1.5)
        # empty predictor, so the weight is gamma_1 * y
        assert est.weights[0] == pytest.approx(2.0 * 1.5, rel=1e-15)
        assert est.centers == [0.4]

    def test_prediction_before_any_update_is_zero(self):
        est = KernelSGD(Kernel.BERNOULLI4, gamma0=1.0, s=2.0)
        assert est.predict(0.3) == 0.0
        assert est.predict_averaged(0.3) == 0.0

    def test_matches_functional_transcription(self):
        # independent oracle: keep the iterate as an explicit kernel expansion
        est = KernelSGD(Kernel.BERNOULLI4, gamma0=5.0, s=2.0)
        rng = np.random.default_rng(4)
        grid = np.linspace(0, 1, 41)
        centers, weights = [], []
        for i in range(1, 51):
            x = float(rng.uniform())
            y = float(rng.standard_normal())
            previous = sum(
                w * kernel_eval(Kernel.BERNOULLI4, c, x)
                for c, w in zip(centers, weights)
            )
            gamma = 5.0 * i ** (-1.0 / 5.0)
            centers.append(x)
            weights.append(gamma * (y - previous))
            est.update(x, y)
        oracle = np.zeros_like(grid)
        for c, w in zip(centers, weights):
            oracle += w * kernel_eval(Kernel.BERNOULLI4, c, grid)
        np.testing.assert_allclose(est.predict(grid), oracle, atol=1e-12)

    def test_averaged_prediction_after_one_update(self):
        est = KernelSGD(Kernel.BROWNIAN_MIN, gamma0=1.0, s=2.0)
        est.update(0.6, 2.0)
        x = 0.35
        expected = est.weights[0] * kernel_eval(Kernel.BROWNIAN_MIN, 0.6, x) / 2
        assert est.predict_averaged(x) == pytest.approx(expected, rel=1e-14)

    def test_averaged_prediction_equals_mean_of_stored_iterates(self):
        est = KernelSGD(Kernel.BERNOULLI4, gamma0=3.0, s=2.0)
        rng = np.random.default_rng(5)
        grid = np.linspace(0, 1, 31)
        iterate_values = [np.zeros_like(grid)]  # the zero initial iterate
        for _ in range(100):
            x = float(rng.uniform())
            y = float(rng.uniform(-1, 1))
            est.update(x, y)
            iterate_values.append(np.asarray(est.predict(grid)))
        brute_force = np.mean(iterate_values, axis=0)
        np.testing.assert_allclose(est.predict_averaged(grid), brute_force, atol=1e-12)

    def test_all_zero_weights_predict_zero(self):
        # zero targets give zero residuals, so every weight stays zero
        est = KernelSGD(Kernel.BROWNIAN_MIN, gamma0=1.0, s=2.0)
        for x in (0.1, 0.5, 0.9):
            est.update(x, 0.0)
        assert est.predict_averaged(0.4) == 0.0

    def test_snapshot_function_does_not_touch_op_count(self):
        est = KernelSGD(Kernel.BERNOULLI4, gamma0=1.0, s=2.0)
        rng = np.random.default_rng(6)
        for _ in range(20):
            est.update(float(rng.uniform()), float(rng.uniform()))
        frozen = est.as_function()
        ops = est.op_count
        xs = rng.uniform(0, 1, size=7)
        np.testing.assert_allclose(frozen(xs), est.predict_averaged(xs), atol=1e-14)
        assert est.op_count > ops

    def test_op_count_grows_linearly_with_step(self):
        est = KernelSGD(Kernel.BROWNIAN_MIN, gamma0=1.0, s=2.0)
        for i in range(1, 30):
            before = est.op_count
            est.update(float(i % 7) / 10 + 0.05, 0.3)
            assert est.op_count - before == i


class TestProjectionFit:
    def test_recovers_constant_multiple_of_first_function(self):
        rng = np.random.default_rng(7)
        xs = rng.uniform(0, 1, size=40)
        ys = 2.0 * basis_matrix(BasisFamily.COSINE_EIGEN, 1, xs)[:, 0]
        coefs = projection_fit(xs, ys, 1, BasisFamily.COSINE_EIGEN)
        assert coefs[0] == pytest.approx(2.0, abs=1e-9)

    def test_recovers_two_term_combination(self):
        rng = np.random.default_rng(8)
        xs = rng.uniform(0, 1, size=50)
        design = basis_matrix(BasisFamily.SINE_HALF, 2, xs)
        ys = 3.0 * design[:, 0] - design[:, 1]
        coefs = projection_fit(xs, ys, 2, BasisFamily.SINE_HALF)
        np.testing.assert_allclose(coefs, [3.0, -1.0], atol=1e-8)
        residual = ys - design @ coefs
        assert np.max(np.abs(residual)) <= 1e-8

    def test_square_system_interpolates(self):
        rng = np.random.default_rng(9)
        xs = np.sort(rng.uniform(0, 1, size=10))
        ys = rng.standard_normal(10)
        coefs = projection_fit(xs, ys, 10, BasisFamily.COSINE_EIGEN)
        fitted = basis_matrix(BasisFamily.COSINE_EIGEN, 10, xs) @ coefs
        np.testing.assert_allclose(fitted, ys, atol=1e-8)

    def test_too_few_observations(self):
        with pytest.raises(SingularFitError):
            projection_fit([0.1, 0.2], [1.0, 2.0], 3, BasisFamily.COSINE_EIGEN)

    def test_duplicate_points_are_rank_deficient(self):
        xs = np.array([0.3, 0.3, 0.3])
        ys = np.array([1.0, 1.0, 1.0])
        with pytest.raises(SingularFitError):
            projection_fit(xs, ys, 3, BasisFamily.COSINE_EIGEN)


class TestKRR:
    def test_single_observation_closed_form(self):
        x, y, ridge = 0.4, 2.0, 0.5
        model = krr_fit([x], [y], Kernel.BROWNIAN_MIN, ridge)
        diag = kernel_eval(Kernel.BROWNIAN_MIN, x, x)
        assert model.dual_weights[0] == pytest.approx(y / (diag + ridge), rel=1e-12)

    def test_weights_shrink_with_ridge(self):
        rng = np.random.default_rng(10)
        xs = rng.uniform(0, 1, size=30)
        ys = np.sin(2 * np.pi * xs) + 0.1 * rng.standard_normal(30)
        norms = []
        for ridge in (1.0, 10.0, 100.0):
            model = krr_fit(xs, ys, Kernel.BERNOULLI4, ridge)
            norms.append(np.linalg.norm(model.dual_weights))
        assert norms[0] > norms[1] > norms[2]

    def test_near_interpolation_at_tiny_ridge(self):
        rng = np.random.default_rng(11)
        xs = np.sort(rng.uniform(0, 1, size=10))
        ys = rng.standard_normal(10)
        model = krr_fit(xs, ys, Kernel.BROWNIAN_MIN, 1e-12)
        np.testing.assert_allclose(model.predict(xs), ys, atol=1e-6)

    def test_rejects_nonpositive_ridge(self):
        with pytest.raises(ValueError):
            krr_fit([0.1], [1.0], Kernel.BROWNIAN_MIN, 0.0)

    def test_tensor_kernel_fit(self):
        rng = np.random.default_rng(12)
        xs = rng.uniform(0, 1, size=(25, 2))
        ys = xs.sum(axis=1) + 0.05 * rng.standard_normal(25)
        model = krr_fit(xs, ys, Kernel.SOBOLEV_TENSOR, 1e-4)
        preds = model.predict(xs)
        assert np.mean((preds - ys) ** 2) < np.var(ys)


class TestTruncatedKernelExpansion:
    def test_partial_sums_approach_brownian_kernel(self):
        # eigen-expansion of min(s,t): weights ((2j-1)pi/2)^-2 on the half-sine family
        grid = np.linspace(0, 1, 51)
        closed_form = np.minimum(grid[:, None], grid[None, :])
        errors = {}
        for count in (8, 32, 128):
            js = np.arange(1, count + 1)
            eigenvalues = ((2 * js - 1) * np.pi / 2.0) ** -2
            design = basis_matrix(BasisFamily.SINE_HALF, count, grid)
            partial = (design * eigenvalues) @ design.T
            errors[count] = np.max(np.abs(partial - closed_form))
        assert errors[8] > errors[32] > errors[128]
        assert errors[128] <= 0.02
