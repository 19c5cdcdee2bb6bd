"""
Sample-path surrogates: kernel spans (members of H), Gaussian bumps (rapidly
decreasing), mollifier bumps (compactly supported) and a triangle wave
(continuous, not smooth).
"""
import logging
import math
from typing import Optional

import numpy as np
from scipy.integrate import quad

from models import (
    Kernel, Design, Box,
    KernelSpan, GaussianBump, MollifierBump, ContinuousNonsmooth,
    QuadratureSpec, SpectralNorm,
)
from kriging.errors import ConfigError, DimensionMismatchError, UnsupportedKindError
from kriging.kernels import kernel_matrix, radial_log_spectral_density
from kriging.solver import build_system

logger = logging.getLogger(__name__)

# exp() of anything above this overflows double precision.
_LOG_OVERFLOW = 700.0


def _points(f, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim <= 1:
        X = X.reshape(-1, f.dim)
    if X.shape[1] != f.dim:
        raise DimensionMismatchError(f"points of dimension {X.shape[1]} for a {f.dim}-d function")
    return X


def evaluate_many(f, X) -> np.ndarray:
    """Values of f at the rows of X."""
    X = _points(f, X)
    if isinstance(f, KernelSpan):
        if not f.coeffs:
            return np.zeros(X.shape[0])
        return kernel_matrix(f.kernel, X, np.asarray(f.centers)) @ np.asarray(f.coeffs)
    if isinstance(f, GaussianBump):
        r2 = np.sum((X - np.asarray(f.center)) ** 2, axis=1)
        return f.height * np.exp(-r2 / (2.0 * f.width ** 2))
    if isinstance(f, MollifierBump):
        t2 = np.sum((X - np.asarray(f.center)) ** 2, axis=1) / f.radius ** 2
        out = np.zeros(X.shape[0])
        inside = t2 < 1.0
        out[inside] = f.height * np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
        return out
    if isinstance(f, ContinuousNonsmooth):
        offsets = X - f.period * np.round(X / f.period)
        return f.slope * np.sum(np.abs(offsets), axis=1)
    raise UnsupportedKindError(f"unknown test function {type(f).__name__}")


def evaluate(f, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != f.dim:
        raise DimensionMismatchError(f"point of dimension {x.shape[0]} for a {f.dim}-d function")
    return float(evaluate_many(f, x[None, :])[0])


def _log_abs_fourier_radial(f, norms: np.ndarray) -> np.ndarray:
    if not isinstance(f, GaussianBump):
        raise UnsupportedKindError(f"no closed-form Fourier transform for kind '{f.kind}'")
    if f.height == 0.0:
        return np.full_like(np.asarray(norms, dtype=float), -np.inf)
    w2 = f.width ** 2
    return (math.log(abs(f.height)) + 0.5 * f.dim * math.log(2.0 * math.pi * w2)
            - 0.5 * w2 * np.asarray(norms, dtype=float) ** 2)


def fourier_transform(f, u) -> complex:
    """f~(u) = integral of f(x) exp(-i <u, x>) dx (the convention of the spectral densities)."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != f.dim:
        raise DimensionMismatchError(f"frequency of dimension {u.shape[0]} for a {f.dim}-d function")
    modulus = math.exp(float(_log_abs_fourier_radial(f, np.linalg.norm(u))))
    phase = -float(np.dot(u, f.center))
    return complex(math.copysign(modulus, f.height) * math.cos(phase),
                   math.copysign(modulus, f.height) * math.sin(phase))


def rkhs_norm_spectral(f, kernel: Kernel, quadrature_spec: Optional[QuadratureSpec] = None) -> SpectralNorm:
    """
    ||f||_H^2 = (2 pi)^{-1} * integral over R of |f~(u)|^2 / S(u) du, for d = 1.

    The integrand is even, so [0, u0] is integrated adaptively and the tail is
    covered by dyadic blocks [U, 2U] until a block falls below rel_tol of the
    running total. Growing blocks or an overflowing integrand mean f is not in H.
    """
    if f.dim != 1 or kernel.dim != 1:
        raise ConfigError("spectral RKHS norms are computed for d = 1 only")
    spec = quadrature_spec or QuadratureSpec()

    def log_integrand(u):
        return 2.0 * _log_abs_fourier_radial(f, u) - radial_log_spectral_density(kernel, u)

    def integrand(u):
        return math.exp(min(float(log_integrand(u)), _LOG_OVERFLOW))

    def diverged(blocks):
        logger.info("♾️ Spectral RKHS integrand diverges after %d tail blocks", blocks)
        return SpectralNorm(value=math.inf, squared=math.inf, tail_bound=math.inf,
                            diverged=True, converged=False, blocks=blocks)

    u0 = spec.u0 or 10.0 / f.width
    if np.max(log_integrand(np.linspace(0.0, u0, 257))) > _LOG_OVERFLOW:
        return diverged(0)
    total, _ = quad(integrand, 0.0, u0, limit=200)

    history = []
    U = u0
    for blocks in range(1, spec.max_blocks + 1):
        if log_integrand(np.array([2.0 * U])).max() > _LOG_OVERFLOW:
            return diverged(blocks)
        block, _ = quad(integrand, U, 2.0 * U, limit=200)
        history.append(block)
        total += block
        U *= 2.0
        if not math.isfinite(total):
            return diverged(blocks)
        if block <= spec.rel_tol * total:
            squared = total / math.pi
            return SpectralNorm(value=math.sqrt(squared), squared=squared, tail_bound=block / math.pi,
                                diverged=False, converged=True, blocks=blocks)
        recent = history[-spec.growth_blocks:]
        if len(recent) == spec.growth_blocks and all(b1 > b0 for b0, b1 in zip(recent, recent[1:])):
            return diverged(blocks)

    # Blocks neither grew nor fell below tolerance: report what we have.
    squared = total / math.pi
    logger.info("⚠️ Spectral RKHS norm not converged after %d blocks", spec.max_blocks)
    return SpectralNorm(value=math.sqrt(squared), squared=squared, tail_bound=history[-1] / math.pi,
                        diverged=False, converged=False, blocks=spec.max_blocks)


def galerkin_norm(f, kernel: Kernel, points) -> float:
    """
    Norm of the kernel interpolant of f on `points`: sqrt(f_X^T K^{-1} f_X).

    It never exceeds ||f||_H and increases along nested point sets.
    """
    X = _points(f, points)
    lower, upper = X.min(axis=0), X.max(axis=0)
    design = Design(points=X.tolist(), box=Box(lower=lower.tolist(), upper=upper.tolist()))
    system = build_system(kernel, design)
    rank = system.effective_rank
    projections = (system.eigenvectors.T @ evaluate_many(f, X))[:rank]
    return math.sqrt(math.fsum(projections ** 2 / system.eigenvalues[:rank]))


def parseval_gap(f) -> tuple:
    """(integral of f^2, (2 pi)^{-1} integral of |f~|^2) by two independent quadratures, d = 1."""
    if f.dim != 1:
        raise ConfigError("Parseval check is implemented for d = 1")
    spatial, _ = quad(lambda t: evaluate(f, [t]) ** 2, -np.inf, np.inf, limit=200)
    spectral, _ = quad(lambda u: abs(fourier_transform(f, [u])) ** 2, -np.inf, np.inf, limit=200)
    return spatial, spectral / (2.0 * math.pi)
