"""
Kriging weights, variance and Lebesgue constant.

Oracles: the 2-point closed form, the Markov plateau of the exponential
covariance, the RKHS projection identity and the Cauchy-Schwarz bound.
"""
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from models import Kernel, Box, Design, KernelSpan
from kriging.errors import ConfigError, DimensionMismatchError, DuplicatePointsError
from kriging.functions import evaluate, evaluate_many
from kriging.kernels import kernel_eval
from kriging.solver import (
    build_system, kriging_weights, kriging_variance, lebesgue_constant, lebesgue_worst_case,
    predict, rkhs_norm_span, rkhs_distance_to_span, prediction_error_bound, extended_prediction,
)


def spread_points(rng, n, dim, gap):
    """Uniform points in the unit cube, pairwise at least `gap` apart."""
    while True:
        points = rng.uniform(0, 1, size=(n, dim))
        d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
        if np.all(d[np.triu_indices(n, 1)] >= gap):
            return points


def random_kernel(rng, dim):
    family = str(rng.choice(["gaussian", "exponential", "matern"]))
    if family == "gaussian":
        return Kernel(family="gaussian", s2=rng.uniform(0.5, 2), alpha=rng.uniform(0.5, 5), dim=dim)
    if family == "exponential":
        return Kernel(family="exponential", s2=rng.uniform(0.5, 2), alpha=rng.uniform(0.5, 5),
                      beta=rng.uniform(0.5, 1.9), dim=dim)
    return Kernel(family="matern", s2=rng.uniform(0.5, 2), nu=float(rng.choice([0.5, 1.5, 2.5, 0.9])),
                  rho=rng.uniform(0.2, 1), dim=dim)


def well_conditioned_kernel(rng, dim):
    """Rough kernels: Gram matrices of points 0.05 apart stay far from truncation."""
    if rng.uniform() < 0.5:
        return Kernel(family="exponential", s2=rng.uniform(0.5, 2), alpha=rng.uniform(1, 5),
                      beta=rng.uniform(0.5, 1.5), dim=dim)
    return Kernel(family="matern", s2=rng.uniform(0.5, 2), nu=float(rng.choice([0.5, 1.5])),
                  rho=rng.uniform(0.2, 0.5), dim=dim)


class TestTwoPoints:
    """gaussian(alpha=1), design {0, 1}, x = 0.5: lambda = e^-1/4 / (1 + e^-1) for both points."""

    @pytest.fixture
    def prediction(self, gaussian, make_design):
        return kriging_weights(build_system(gaussian, make_design([[0.0], [1.0]])), [0.5])

    def test_weights(self, prediction):
        weight = math.exp(-0.25) / (1.0 + math.exp(-1.0))
        np.testing.assert_allclose(prediction.weights, [weight, weight], rtol=1e-13)
        np.testing.assert_allclose(prediction.weights, [0.569306, 0.569306], rtol=1e-3)

    def test_variance_and_lebesgue(self, prediction):
        weight = math.exp(-0.25) / (1.0 + math.exp(-1.0))
        assert prediction.variance == pytest.approx(1.0 - 2.0 * weight * math.exp(-0.25), rel=1e-12)
        assert prediction.variance == pytest.approx(0.113202, rel=1e-3)
        assert prediction.lebesgue == pytest.approx(2.0 * weight, rel=1e-13)
        assert prediction.lebesgue == pytest.approx(1.138613, rel=1e-3)
        assert lebesgue_constant(prediction) == pytest.approx(prediction.lebesgue, rel=1e-15)
        assert not prediction.truncated

    def test_error_bound(self, prediction):
        assert prediction_error_bound(2.0, prediction) == pytest.approx(2.0 * math.sqrt(prediction.variance))


class TestInterpolation:
    def test_exact_at_nodes(self, rng):
        for _ in range(200):
            dim = int(rng.integers(1, 4))
            n = int(rng.integers(1, 31))
            kernel = random_kernel(rng, dim)
            points = rng.uniform(0, 1, size=(n, dim))
            design = Design(points=points.tolist(), box=Box.unit(dim))
            system = build_system(kernel, design)
            samples = rng.normal(size=n)
            j = int(rng.integers(n))

            prediction = kriging_weights(system, points[j])
            unit = np.zeros(n)
            unit[j] = 1.0
            np.testing.assert_array_equal(prediction.weights, unit)
            assert predict(prediction, samples) == samples[j]
            assert prediction.variance <= 1e-8 * kernel.s2

    def test_empty_design(self, matern15):
        system = build_system(matern15, Design(points=[], box=Box.unit(1)))
        prediction = kriging_weights(system, [0.3])
        assert prediction.variance == matern15.s2
        assert prediction.lebesgue == 0.0
        assert predict(prediction, []) == 0.0
        assert rkhs_distance_to_span(system, [0.3]) == pytest.approx(1.0)


class TestRkhsGeometry:
    def test_variance_is_squared_distance_to_span(self, rng):
        for _ in range(100):
            dim = int(rng.integers(1, 3))
            n = int(rng.integers(2, 9))
            kernel = Kernel(family="matern", nu=float(rng.choice([0.5, 1.5])), rho=rng.uniform(0.2, 0.5), dim=dim)
            points = spread_points(rng, n + 1, dim, 0.05)
            x = points[-1]
            system = build_system(kernel, Design(points=points[:-1].tolist(), box=Box.unit(dim)))
            assert kriging_variance(system, x) == pytest.approx(
                rkhs_distance_to_span(system, x) ** 2, rel=1e-6, abs=1e-12
            )

    def test_cauchy_schwarz(self, rng):
        for _ in range(100):
            kernel = random_kernel(rng, 1)
            centers = rng.uniform(-0.5, 1.5, size=(int(rng.integers(1, 6)), 1))
            coeffs = rng.normal(size=centers.shape[0])
            f = KernelSpan(kernel=kernel, centers=centers.tolist(), coeffs=coeffs.tolist())
            points = rng.uniform(0, 1, size=(int(rng.integers(1, 10)), 1))
            x = rng.uniform(-0.5, 1.5, size=1)

            prediction = kriging_weights(build_system(kernel, Design(points=points.tolist(), box=Box.unit(1))), x)
            error = abs(evaluate(f, x) - predict(prediction, evaluate_many(f, points)))
            bound = prediction_error_bound(rkhs_norm_span(kernel, centers, coeffs), prediction)
            assert error <= bound + 1e-8

    def test_span_norm(self, exponential):
        # ||k(0, .) - k(1, .)||^2 = 2 - 2 e^-1
        assert rkhs_norm_span(exponential, [[0.0], [1.0]], [1.0, -1.0]) == pytest.approx(
            math.sqrt(2.0 - 2.0 * math.exp(-1.0))
        )


class TestSymmetries:
    def test_scaling_the_variance(self, rng):
        for _ in range(20):
            kernel = well_conditioned_kernel(rng, 1)
            design = Design(points=spread_points(rng, 8, 1, 0.05).tolist(), box=Box.unit(1))
            x = rng.uniform(-0.5, 1.5, size=1)
            gamma = rng.uniform(0.1, 10.0)
            base = kriging_weights(build_system(kernel, design), x)
            scaled_kernel = kernel.model_copy(update={"s2": gamma * kernel.s2})
            scaled = kriging_weights(build_system(scaled_kernel, design), x)
            np.testing.assert_allclose(scaled.weights, base.weights, rtol=1e-8, atol=1e-10)
            assert scaled.lebesgue == pytest.approx(base.lebesgue, rel=1e-8)
            assert scaled.variance == pytest.approx(gamma * base.variance, rel=1e-6, abs=1e-10 * scaled_kernel.s2)

    def test_translation(self, rng):
        for _ in range(20):
            dim = int(rng.integers(1, 3))
            kernel = well_conditioned_kernel(rng, dim)
            points = spread_points(rng, 8, dim, 0.05)
            x = rng.uniform(-0.5, 1.5, size=dim)
            shift = rng.uniform(-20, 20, size=dim)
            base = kriging_weights(build_system(kernel, Design(points=points.tolist(), box=Box.unit(dim))), x)
            moved_box = Box(lower=shift.tolist(), upper=(shift + 1.0).tolist())
            moved = kriging_weights(build_system(kernel, Design(points=(points + shift).tolist(), box=moved_box)),
                                    x + shift)
            np.testing.assert_allclose(moved.weights, base.weights, rtol=1e-6, atol=1e-7)
            assert moved.lebesgue == pytest.approx(base.lebesgue, rel=1e-6)
            assert moved.variance == pytest.approx(base.variance, rel=1e-5, abs=1e-10)


class TestNestedDesigns:
    @pytest.mark.parametrize("kernel", [
        Kernel(family="exponential", alpha=1.0, beta=1.0),
        Kernel(family="matern", nu=1.5, rho=0.5),
        Kernel(family="gaussian", alpha=1000.0),
    ])
    def test_variance_non_increasing_and_bounded(self, kernel, unit_grid):
        x = [0.3]
        design = unit_grid(64)
        previous = kernel.s2
        for n in range(1, 65):
            prefix = design.prefix(n)
            sigma2 = kriging_variance(build_system(kernel, prefix), x)
            assert sigma2 <= previous + 1e-10 * kernel.s2
            for p in prefix.points:
                # variance of xi(x) - xi(x_j), a feasible single-point predictor
                gap = kernel.s2 + kernel.s2 - 2.0 * kernel_eval(kernel, x, p)
                assert sigma2 <= gap + 1e-10 * kernel.s2
            previous = sigma2

    def test_markov_plateau(self, exponential, unit_grid):
        """Exponential covariance in d = 1: sigma^2(2) = 1 - exp(-2 (2 - max design point))."""
        design = unit_grid(256)
        first = None
        for n in (5, 10, 20, 40, 80, 160, 256):
            prefix = design.prefix(n)
            sigma2 = kriging_variance(build_system(exponential, prefix), [2.0])
            expected = 1.0 - math.exp(-2.0 * (2.0 - prefix.array().max()))
            assert sigma2 == pytest.approx(expected, rel=1e-9)
            first = first or sigma2
            assert sigma2 >= 0.5 * first
        assert first == pytest.approx(1.0 - math.exp(-2.5), rel=1e-9)


class TestTruncation:
    def test_ill_conditioned_gaussian(self, gaussian, unit_grid):
        system = build_system(gaussian, unit_grid(40))
        assert system.truncated
        assert system.effective_rank < 40
        prediction = kriging_weights(system, [0.3])
        assert prediction.truncated
        assert prediction.variance >= 0.0
        assert prediction.variance == max(prediction.preclamp_variance, 0.0)

    def test_lower_tolerance_keeps_more_modes(self, gaussian, unit_grid):
        default = build_system(gaussian, unit_grid(40))
        assert build_system(gaussian, unit_grid(40), truncation_tol=1e-15).effective_rank >= default.effective_rank

    @pytest.mark.parametrize("x", [[0.3], [0.77], [1.4]])
    def test_variance_never_decreases_with_tolerance(self, gaussian, unit_grid, x):
        design = unit_grid(40)
        variances = [kriging_weights(build_system(gaussian, design, truncation_tol=tol), x).variance
                     for tol in (1e-15, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 0.5)]
        assert all(b >= a for a, b in zip(variances, variances[1:]))
        assert variances[-1] > variances[0]

    def test_settings_default(self, gaussian, unit_grid, monkeypatch):
        monkeypatch.setenv("KRIGLAB_TRUNCATION_TOL", "1e-6")
        from utils.settings import get_settings
        get_settings.cache_clear()
        assert build_system(gaussian, unit_grid(8)).truncation_tol == 1e-6

    def test_tolerance_range(self, gaussian, unit_grid):
        with pytest.raises(ConfigError):
            build_system(gaussian, unit_grid(4), truncation_tol=1.0)


class TestValidation:
    def test_duplicates(self, gaussian):
        with pytest.raises(DuplicatePointsError):
            build_system(gaussian, Design(points=[[0.1], [0.1]], box=Box.unit(1)))

    def test_dimension(self, gaussian):
        with pytest.raises(DimensionMismatchError):
            build_system(gaussian, Design(points=[[0.1, 0.2]], box=Box.unit(2)))

    def test_sample_count(self, gaussian, unit_grid):
        prediction = kriging_weights(build_system(gaussian, unit_grid(3)), [0.3])
        with pytest.raises(DimensionMismatchError):
            predict(prediction, [1.0, 2.0])


class TestLebesgueWorstCase:
    def test_signs_follow_weights(self, matern15, unit_grid):
        prediction = kriging_weights(build_system(matern15, unit_grid(9)), [1.7])
        samples, value = lebesgue_worst_case(prediction)
        assert value == pytest.approx(prediction.lebesgue, rel=1e-14)
        assert predict(prediction, samples) == pytest.approx(value, rel=1e-12)
        assert np.all(np.abs(samples) == 1.0)

    def test_bounded_samples(self, matern15, unit_grid):
        prediction = kriging_weights(build_system(matern15, unit_grid(5)), [0.3])
        bounds = np.array([0.5, 2.0, 0.0, 1.0, 3.0])
        _, value = lebesgue_worst_case(prediction, bounds)
        assert value == pytest.approx(np.sum(np.abs(prediction.weights) * bounds))


class TestExtendedPrecision:
    def test_agrees_with_double(self, exponential, unit_grid):
        design = unit_grid(12)
        double = kriging_weights(build_system(exponential, design, truncation_tol=0.0), [0.3])
        extended = extended_prediction(exponential, design, [0.3], dps=50)
        np.testing.assert_allclose(extended.weights, double.weights, rtol=1e-9, atol=1e-12)
        assert extended.variance == pytest.approx(double.variance, rel=1e-9)
        assert extended.effective_rank == 12 and not extended.truncated

    def test_node(self, gaussian, unit_grid):
        prediction = extended_prediction(gaussian, unit_grid(4), [0.25], dps=50)
        assert prediction.weights == [0.0, 1.0, 0.0, 0.0]
        assert prediction.variance == 0.0

    @pytest.mark.slow
    def test_concurrent_working_precisions(self, gaussian, exponential, unit_grid):
        """A 250-digit solve stays correct while other threads work at 30 digits."""
        fine, coarse = unit_grid(40), unit_grid(8)
        reference = extended_prediction(gaussian, fine, [2.0], dps=250)
        with ThreadPoolExecutor(max_workers=4) as pool:
            fine_jobs = [pool.submit(extended_prediction, gaussian, fine, [2.0], 250) for _ in range(2)]
            coarse_jobs = [pool.submit(extended_prediction, exponential, coarse, [0.3], 30) for _ in range(40)]
            for job in coarse_jobs:
                assert job.result().effective_rank == 8
            for job in fine_jobs:
                assert job.result() == reference
        assert reference.variance == pytest.approx(1.2379e-24, rel=1e-4)
