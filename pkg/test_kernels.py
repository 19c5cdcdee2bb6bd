"""Covariance catalog: evaluation, spectral densities, polynomial-minorant checks."""
import math

import mpmath
import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import quad

from models import Kernel, GridSpec, Box, Design
from kriging.errors import ConfigError, DimensionMismatchError, UnsupportedFamilyError
from kriging.kernels import (
    kernel_eval, kernel_matrix, spectral_density, log_spectral_density,
    check_polynomial_minorant, min_poly_order, default_grid,
)
from kriging.solver import build_system, kriging_weights

CATALOG = [
    Kernel(family="gaussian", s2=2.0, alpha=0.7),
    Kernel(family="exponential", s2=0.5, alpha=1.3, beta=1.0),
    Kernel(family="exponential", s2=1.0, alpha=2.0, beta=1.7),
    Kernel(family="matern", s2=1.5, nu=0.5, rho=0.4),
    Kernel(family="matern", s2=1.0, nu=1.5, rho=1.0),
    Kernel(family="matern", s2=1.0, nu=2.5, rho=0.3),
    Kernel(family="matern", s2=3.0, nu=0.8, rho=2.0),
]


class TestKernelModel:
    def test_missing_family_parameter(self):
        with pytest.raises(ValidationError):
            Kernel(family="gaussian")

    def test_irrelevant_parameter(self):
        with pytest.raises(ValidationError):
            Kernel(family="gaussian", alpha=1.0, nu=1.5)

    @pytest.mark.parametrize("beta", [0.0, 2.0, 2.5])
    def test_beta_range(self, beta):
        with pytest.raises(ValidationError):
            Kernel(family="exponential", alpha=1.0, beta=beta)

    def test_nonpositive_variance(self):
        with pytest.raises(ValidationError):
            Kernel(family="matern", s2=0.0, nu=1.5, rho=1.0)

    def test_record_omits_irrelevant_keys(self):
        record = Kernel(family="matern", nu=1.5, rho=1.0).to_record()
        assert record == {"family": "matern", "s2": 1.0, "nu": 1.5, "rho": 1.0, "dim": 1}


class TestEvaluation:
    @pytest.mark.parametrize("kernel", CATALOG)
    def test_lag_zero_is_s2(self, kernel):
        for x in ([0.0], [0.3], [-7.25]):
            assert kernel_eval(kernel, x, x) == kernel.s2

    @pytest.mark.parametrize("kernel", CATALOG)
    def test_symmetric_and_bounded(self, kernel, rng):
        X = rng.uniform(-2, 2, size=(12, 1))
        K = kernel_matrix(kernel, X, X)
        np.testing.assert_array_equal(K, K.T)
        assert np.all(np.abs(K) <= kernel.s2)

    @pytest.mark.parametrize("kernel", CATALOG)
    def test_catalog_gram_matrices_positive_semidefinite(self, kernel, rng):
        for n in (2, 10, 30):
            X = rng.uniform(-2, 2, size=(n, 1))
            assert np.linalg.eigvalsh(kernel_matrix(kernel, X, X)).min() >= -1e-10 * kernel.s2

    def test_gram_matrix_positive_semidefinite(self, rng):
        X = rng.uniform(0, 1, size=(15, 2))
        for kernel in (Kernel(family="gaussian", alpha=3.0, dim=2), Kernel(family="matern", nu=0.8, rho=0.5, dim=2)):
            assert np.linalg.eigvalsh(kernel_matrix(kernel, X, X)).min() > -1e-10

    def test_gaussian_closed_form(self):
        kernel = Kernel(family="gaussian", s2=2.0, alpha=0.5, dim=2)
        assert kernel_eval(kernel, [0.0, 0.0], [1.0, 1.0]) == pytest.approx(2.0 * math.exp(-1.0), rel=1e-15)

    def test_matern_half_is_exponential(self):
        matern = Kernel(family="matern", nu=0.5, rho=0.4)
        exponential = Kernel(family="exponential", alpha=2.5, beta=1.0)
        h = np.linspace(0, 3, 31)[:, None]
        np.testing.assert_allclose(
            kernel_matrix(matern, h, [[0.0]]), kernel_matrix(exponential, h, [[0.0]]), rtol=1e-14
        )

    def test_general_nu_matches_closed_form_nearby(self):
        """The Bessel branch (nu = 1.5 + 1e-7) agrees with the nu = 3/2 polynomial form."""
        h = np.linspace(0, 4, 41)[:, None]
        exact = kernel_matrix(Kernel(family="matern", nu=1.5, rho=1.0), h, [[0.0]])
        bessel = kernel_matrix(Kernel(family="matern", nu=1.5 + 1e-7, rho=1.0), h, [[0.0]])
        np.testing.assert_allclose(bessel, exact, rtol=1e-5, atol=1e-12)

    def test_dimension_mismatch(self, gaussian):
        with pytest.raises(DimensionMismatchError):
            kernel_eval(gaussian, [0.0, 1.0], [0.0])


def mp_matern(nu, rho, h, dps=50):
    """Reference Matern correlation from mpmath's Bessel K."""
    with mpmath.workdps(dps):
        z = mpmath.sqrt(2 * mpmath.mpf(nu)) / rho * mpmath.mpf(h)
        return float(mpmath.power(2, 1 - nu) / mpmath.gamma(nu) * z ** nu * mpmath.besselk(nu, z))


class TestMaternBesselBranch:
    @pytest.mark.parametrize("nu", [60.0, 100.0])
    def test_large_smoothness_near_zero_lag(self, nu):
        kernel = Kernel(family="matern", nu=nu, rho=1.0)
        value = kernel_eval(kernel, [0.0], [7e-4])
        assert math.isfinite(value) and value <= kernel.s2
        assert value == pytest.approx(mp_matern(nu, 1.0, 7e-4), rel=1e-10)
        assert kernel_eval(kernel, [0.4], [0.4]) == kernel.s2

    @pytest.mark.parametrize("nu", [60.0, 100.0])
    def test_large_smoothness_over_lags(self, nu):
        kernel = Kernel(family="matern", nu=nu, rho=1.0)
        lags = [1e-6, 1e-4, 1e-2, 0.3, 1.0, 3.0]
        values = kernel_matrix(kernel, np.array(lags)[:, None], [[0.0]])[:, 0]
        np.testing.assert_allclose(values, [mp_matern(nu, 1.0, h) for h in lags], rtol=1e-10)

    def test_large_smoothness_gram_system(self):
        kernel = Kernel(family="matern", nu=60.0, rho=1.0)
        design = Design(points=[[0.0], [1e-5], [0.5]], box=Box.unit(1))
        system = build_system(kernel, design)
        assert np.all(np.isfinite(system.eigenvalues))
        assert 0.0 <= kriging_weights(system, [0.25]).variance <= kernel.s2

    def test_rough_kernel_at_tiny_lags(self):
        """For nu < 1, 1 - k(h) ~ h^(2 nu) is far above machine precision at h = 1e-10."""
        kernel = Kernel(family="matern", nu=0.1, rho=1.0)
        near, far = kernel_eval(kernel, [0.0], [5e-11]), kernel_eval(kernel, [0.0], [2e-10])
        assert near == pytest.approx(mp_matern(0.1, 1.0, 5e-11), rel=1e-9)
        assert far == pytest.approx(mp_matern(0.1, 1.0, 2e-10), rel=1e-9)
        assert far < near < 1.0


class TestSpectralDensity:
    """S is the Fourier transform of k: k(h) = (2 pi)^-1 * integral of S(u) cos(u h) du in d = 1."""

    @pytest.mark.parametrize("kernel", [k for k in CATALOG if k.family != "exponential" or k.beta == 1.0])
    def test_integrates_to_variance(self, kernel):
        total, _ = quad(lambda u: spectral_density(kernel, [u]), 0.0, np.inf, limit=400)
        assert 2.0 * total / (2.0 * math.pi) == pytest.approx(kernel.s2, rel=1e-6)

    @pytest.mark.parametrize("kernel", [CATALOG[0], CATALOG[1], CATALOG[4]])
    def test_inverse_transform(self, kernel):
        h = 0.7
        half, _ = quad(lambda u: spectral_density(kernel, [u]), 0.0, np.inf, weight="cos", wvar=h)
        assert half / math.pi == pytest.approx(kernel_eval(kernel, [h], [0.0]), rel=1e-6)

    def test_radial_in_two_dimensions(self):
        kernel = Kernel(family="matern", nu=1.5, rho=1.0, dim=2)
        assert spectral_density(kernel, [3.0, 4.0]) == pytest.approx(spectral_density(kernel, [0.0, 5.0]), rel=1e-14)

    def test_log_density_avoids_underflow(self, gaussian):
        log_s = log_spectral_density(gaussian, [100.0])
        assert math.isfinite(log_s) and log_s < -2000
        assert spectral_density(gaussian, [100.0]) == 0.0

    def test_non_closed_form_exponent(self):
        with pytest.raises(UnsupportedFamilyError):
            spectral_density(CATALOG[2], [1.0])


class TestPolynomialMinorant:
    def test_matern_order_four(self, matern15):
        assert check_polynomial_minorant(matern15, 4).satisfied
        assert not check_polynomial_minorant(matern15, 3).satisfied
        assert min_poly_order(matern15, 10) == 4

    def test_exponential_order_two(self, exponential):
        assert min_poly_order(exponential, 10) == 2

    def test_gaussian_has_no_polynomial_minorant(self, gaussian):
        assert min_poly_order(gaussian, 50) is None
        report = check_polynomial_minorant(gaussian, 50)
        assert not report.satisfied
        assert report.c_estimate == 0.0

    def test_order_follows_smoothness_and_dimension(self):
        """Matern S decays like |u|^-(2 nu + d)."""
        assert min_poly_order(Kernel(family="matern", nu=2.5, rho=1.0), 10) == 6
        assert min_poly_order(Kernel(family="matern", nu=1.5, rho=1.0, dim=3), 10) == 6

    def test_report_carries_the_grid(self, matern15):
        grid = GridSpec(n_points=512, u_min=1e-2, u_max=1e3)
        report = check_polynomial_minorant(matern15, 4, grid)
        assert report.grid_spec == grid
        assert report.c_estimate > 0

    def test_grid_must_span_two_decades(self):
        with pytest.raises(ValidationError):
            GridSpec(u_min=1.0, u_max=50.0)

    def test_negative_order(self, matern15):
        with pytest.raises(ConfigError):
            check_polynomial_minorant(matern15, -1)
        with pytest.raises(ConfigError):
            min_poly_order(matern15, -1)

    def test_order_is_monotone_in_r(self):
        for kernel in CATALOG[:2] + CATALOG[3:]:
            satisfied = [check_polynomial_minorant(kernel, r).satisfied for r in range(13)]
            first = satisfied.index(True) if True in satisfied else len(satisfied)
            assert satisfied == [False] * first + [True] * (len(satisfied) - first), kernel

    @pytest.mark.parametrize("kernel, order", [
        (Kernel(family="gaussian", alpha=1e9), None),
        (Kernel(family="matern", nu=1.5, rho=1e-5), 4),
        (Kernel(family="matern", nu=1.5, rho=1e5), 4),
        (Kernel(family="exponential", alpha=1e6, beta=1.0), 2),
    ])
    def test_extreme_length_scales(self, kernel, order):
        assert min_poly_order(kernel, 50 if order is None else 10) == order

    def test_default_grid_follows_the_kernel(self, matern15):
        report = check_polynomial_minorant(matern15, 4)
        assert report.grid_spec == default_grid(matern15)
        assert report.grid_spec.u_max == pytest.approx(GridSpec().u_max * math.sqrt(3.0))
