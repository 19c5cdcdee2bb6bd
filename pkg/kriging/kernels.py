"""
Covariance catalog: evaluation, spectral densities and the polynomial-minorant check.

Fourier convention: k(h) = (2 pi)^{-d} * integral of S(u) exp(i <u, h>) du, i.e.
S is the plain Fourier transform of k. With it the RKHS norm of f reads
||f||_H^2 = (2 pi)^{-d} * integral of |f~(u)|^2 / S(u) du.
"""
import logging
import math
from typing import Optional

import numpy as np
from mpmath import MPContext, mp
from scipy.spatial.distance import cdist
from scipy.special import gammaln, kve

from models import Kernel, GridSpec, SpectralReport
from kriging.errors import ConfigError, DimensionMismatchError, UnsupportedFamilyError
from utils.helpers import as_point

logger = logging.getLogger(__name__)

_MATERN_FALLBACK_DPS = 30


def _as_points(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, dim) if X.size else X.reshape(0, dim)
    if X.ndim != 2 or X.shape[1] != dim:
        raise DimensionMismatchError(f"points of shape {X.shape} do not match kernel dimension {dim}")
    return X


def _mp_matern_correlation(nu: float, z: float) -> float:
    """Bessel form in mpmath, for lags where K_nu overflows double precision."""
    ctx = MPContext()
    ctx.dps = _MATERN_FALLBACK_DPS
    nu, z = ctx.mpf(nu), ctx.mpf(z)
    return float(ctx.power(2, 1 - nu) / ctx.gamma(nu) * z ** nu * ctx.besselk(nu, z))


def _matern_correlation(nu: float, z: np.ndarray) -> np.ndarray:
    """2^{1-nu}/Gamma(nu) * z^nu * K_nu(z), with the half-integer closed forms."""
    if nu == 0.5:
        return np.exp(-z)
    if nu == 1.5:
        return (1.0 + z) * np.exp(-z)
    if nu == 2.5:
        return (1.0 + z + z * z / 3.0) * np.exp(-z)
    out = np.ones_like(z)
    mask = z > 0.0
    zm = z[mask]
    # prefactor and exp(z) K_nu(z) are combined in log space
    with np.errstate(divide="ignore", over="ignore"):
        log_value = ((1.0 - nu) * math.log(2.0) - gammaln(nu) + nu * np.log(zm) - zm
                     + np.log(kve(nu, zm)))
    values = np.exp(log_value)
    overflow = ~np.isfinite(log_value)
    if overflow.any():
        values[overflow] = [_mp_matern_correlation(nu, float(v)) for v in zm[overflow]]
    out[mask] = values
    return out


def kernel_matrix(kernel: Kernel, X, Y) -> np.ndarray:
    """Matrix [k(x_i, y_j)] for two point sets of the kernel dimension."""
    X = _as_points(X, kernel.dim)
    Y = _as_points(Y, kernel.dim)
    if kernel.family == "gaussian":
        values = np.exp(-kernel.alpha * cdist(X, Y, "sqeuclidean"))
    elif kernel.family == "exponential":
        values = np.exp(-kernel.alpha * cdist(X, Y) ** kernel.beta)
    else:
        z = math.sqrt(2.0 * kernel.nu) / kernel.rho * cdist(X, Y)
        values = _matern_correlation(kernel.nu, z)
    # Catalog correlations are in [0, 1]; clip rounding excursions.
    return kernel.s2 * np.clip(values, 0.0, 1.0)


def kernel_eval(kernel: Kernel, x, y) -> float:
    x = as_point(x, kernel.dim)
    y = as_point(y, kernel.dim)
    return float(kernel_matrix(kernel, x[None, :], y[None, :])[0, 0])


def mp_covariance(kernel: Kernel, ctx: MPContext = mp):
    """Covariance as a function of the squared lag in the arithmetic of `ctx`."""
    s2 = ctx.mpf(kernel.s2)
    if kernel.family == "gaussian":
        alpha = ctx.mpf(kernel.alpha)
        return lambda r2: s2 * ctx.exp(-alpha * r2)
    if kernel.family == "exponential":
        alpha, half_beta = ctx.mpf(kernel.alpha), ctx.mpf(kernel.beta) / 2
        return lambda r2: s2 * ctx.exp(-alpha * r2 ** half_beta) if r2 else s2
    nu = ctx.mpf(kernel.nu)
    kappa = ctx.sqrt(2 * nu) / ctx.mpf(kernel.rho)
    scale = s2 * ctx.power(2, 1 - nu) / ctx.gamma(nu)

    def matern(r2):
        if not r2:
            return s2
        z = kappa * ctx.sqrt(r2)
        return scale * z ** nu * ctx.besselk(nu, z)

    return matern


def radial_log_spectral_density(kernel: Kernel, norms: np.ndarray) -> np.ndarray:
    """log S at frequencies of Euclidean norm `norms` (all catalog kernels are isotropic)."""
    d = kernel.dim
    norms = np.asarray(norms, dtype=float)
    log_s2 = math.log(kernel.s2)
    if kernel.family == "gaussian":
        a = kernel.alpha
        return log_s2 + 0.5 * d * math.log(math.pi / a) - norms ** 2 / (4.0 * a)
    if kernel.family == "exponential":
        if kernel.beta != 1.0:
            raise UnsupportedFamilyError(
                f"no closed-form spectral density for the exponential kernel with beta={kernel.beta}"
            )
        a = kernel.alpha
        const = (d * math.log(2.0) + 0.5 * (d - 1) * math.log(math.pi)
                 + gammaln(0.5 * (d + 1)) + math.log(a))
        return log_s2 + const - 0.5 * (d + 1) * np.log(a * a + norms ** 2)
    nu = kernel.nu
    kappa2 = 2.0 * nu / kernel.rho ** 2
    const = (d * math.log(2.0 * math.sqrt(math.pi)) + gammaln(nu + 0.5 * d)
             - gammaln(nu) + nu * math.log(kappa2))
    return log_s2 + const - (nu + 0.5 * d) * np.log(kappa2 + norms ** 2)


def log_spectral_density(kernel: Kernel, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = as_point(u, kernel.dim)
        return float(radial_log_spectral_density(kernel, np.linalg.norm(u)))
    return radial_log_spectral_density(kernel, np.linalg.norm(_as_points(u, kernel.dim), axis=1))


def spectral_density(kernel: Kernel, u):
    """S(u) for a point u (float) or an (m, d) array of points (array)."""
    return np.exp(log_spectral_density(kernel, u))


def characteristic_frequency(kernel: Kernel) -> float:
    """Frequency at which S leaves its low-frequency plateau."""
    if kernel.family == "gaussian":
        return math.sqrt(kernel.alpha)
    if kernel.family == "exponential":
        return kernel.alpha ** (1.0 / kernel.beta)
    return math.sqrt(2.0 * kernel.nu) / kernel.rho


def default_grid(kernel: Kernel) -> GridSpec:
    """
    GridSpec defaults widened to the kernel's characteristic frequency f.

    The grid covers [u_min * min(1, f), u_max * max(1, f)]: its last decades
    lie beyond both f and 1, where S(u)(1 + |u|^r) takes its asymptotic form.
    """
    base = GridSpec()
    scale = characteristic_frequency(kernel)
    return base.model_copy(update={"u_min": base.u_min * min(1.0, scale), "u_max": base.u_max * max(1.0, scale)})


def check_polynomial_minorant(kernel: Kernel, r: int, grid_spec: Optional[GridSpec] = None) -> SpectralReport:
    """
    Grid check of S(u)(1 + |u|^r) >= C > 0.

    The infimum is taken over a geometric |u| grid; the bound counts as
    satisfied when it is positive and the product does not decay from the
    second-to-last decade of the grid to the last one. Without a grid the
    default one is scaled to the kernel (see default_grid).
    """
    if r < 0:
        raise ConfigError("polynomial order r must be nonnegative")
    grid = grid_spec or default_grid(kernel)
    u = grid.values()
    log_g = radial_log_spectral_density(kernel, u) + np.logaddexp(0.0, r * np.log(u))

    last = u >= grid.u_max / 10.0
    previous = (u >= grid.u_max / 100.0) & ~last
    tail_log_ratio = float(log_g[last].min() - log_g[previous].min())
    c_estimate = float(np.exp(log_g.min()))
    satisfied = bool(c_estimate > 0.0 and tail_log_ratio >= math.log1p(-grid.rel_tol))

    logger.debug("🔍 r=%d c_estimate=%.3e tail_log_ratio=%.3e", r, c_estimate, tail_log_ratio)
    return SpectralReport(
        r=r, c_estimate=c_estimate, satisfied=satisfied,
        grid_spec=grid, tail_log_ratio=tail_log_ratio,
    )


def min_poly_order(kernel: Kernel, r_max: int, grid_spec: Optional[GridSpec] = None) -> Optional[int]:
    """Smallest r <= r_max for which the minorant check passes, or None."""
    if r_max < 0:
        raise ConfigError("r_max must be nonnegative")
    grid_spec = grid_spec or default_grid(kernel)
    for r in range(r_max + 1):
        if check_polynomial_minorant(kernel, r, grid_spec).satisfied:
            return r
    return None
