"""
Kriging core: Gram systems, predictor weights, kriging variance, Lebesgue constant.

The Gram matrix K = [k(x_i, x_j)] is diagonalized once (symmetric
eigendecomposition, eigenvalues descending). Eigenvalues below
truncation_tol * lambda_max are dropped from the pseudo-inverse, which
projects k(x, .) onto a subspace of H_n = span{k(x_i, .)}; the reported
variance is then an upper bound of the exact one.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from mpmath import MPContext

from models import Kernel, Design, Prediction
from kriging.errors import (
    ConfigError, DimensionMismatchError, DuplicatePointsError,
    NumericalError, KrigingDiagnosticWarning,
)
from kriging.kernels import kernel_matrix, mp_covariance
from utils.helpers import as_point
from utils.settings import get_settings

logger = logging.getLogger(__name__)

# Pre-clamp variances below -NEGATIVE_VARIANCE_WARN * s2 are reported.
NEGATIVE_VARIANCE_WARN = 1e-8


@dataclass(frozen=True)
class GramSystem:
    kernel: Kernel
    design: Design
    points: np.ndarray
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, orthonormal
    truncation_tol: float
    effective_rank: int
    condition_estimate: float

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def truncated(self) -> bool:
        return self.effective_rank < self.n


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _check_design(kernel: Kernel, design: Design) -> np.ndarray:
    if design.dim != kernel.dim:
        raise DimensionMismatchError(f"design dimension {design.dim} != kernel dimension {kernel.dim}")
    points = design.array()
    if np.unique(points, axis=0).shape[0] != points.shape[0]:
        raise DuplicatePointsError("design points must be pairwise distinct")
    return points


def build_system(kernel: Kernel, design: Design, truncation_tol: Optional[float] = None) -> GramSystem:
    if truncation_tol is None:
        truncation_tol = get_settings().truncation_tol
    if not 0.0 <= truncation_tol < 1.0:
        raise ConfigError(f"truncation_tol must lie in [0, 1), got {truncation_tol}")
    points = _check_design(kernel, design)
    n = points.shape[0]

    if n == 0:
        empty = np.zeros(0)
        return GramSystem(kernel, design, _frozen(points), _frozen(empty), _frozen(np.zeros((0, 0))),
                          truncation_tol, 0, 1.0)

    K = kernel_matrix(kernel, points, points)
    if not np.all(np.isfinite(K)):
        raise NumericalError("non-finite kernel values in the Gram matrix")
    K = 0.5 * (K + K.T)
    eigenvalues, eigenvectors = scipy.linalg.eigh(K)
    eigenvalues = eigenvalues[::-1]
    eigenvectors = eigenvectors[:, ::-1]

    threshold = truncation_tol * eigenvalues[0]
    rank = int(np.count_nonzero((eigenvalues > 0.0) & (eigenvalues >= threshold)))
    if rank == 0:
        raise NumericalError("Gram matrix has no positive eigenvalue")
    condition = float(eigenvalues[0] / eigenvalues[rank - 1])

    if rank < n:
        logger.debug("✂️ Truncated %d of %d eigenvalues (tol=%.1e)", n - rank, n, truncation_tol)
    logger.debug("🔧 Gram system n=%d rank=%d cond=%.3e", n, rank, condition)
    return GramSystem(kernel, design, _frozen(points), _frozen(eigenvalues), _frozen(eigenvectors),
                      truncation_tol, rank, condition)


def _node_index(points: np.ndarray, x: np.ndarray) -> Optional[int]:
    hits = np.flatnonzero(np.all(points == x, axis=1))
    return int(hits[0]) if hits.size else None


def _node_prediction(x: np.ndarray, n: int, j: int, rank: int, condition: float) -> Prediction:
    weights = [0.0] * n
    weights[j] = 1.0
    return Prediction(
        x=x.tolist(), weights=weights, variance=0.0, lebesgue=1.0, truncated=rank < n,
        preclamp_variance=0.0, effective_rank=rank, condition_estimate=condition,
    )


def _clamp_variance(preclamp: float, s2: float) -> float:
    if preclamp < 0.0:
        logger.debug("📉 Clamping kriging variance %.3e to 0", preclamp)
        if preclamp < -NEGATIVE_VARIANCE_WARN * s2:
            warnings.warn(
                f"kriging variance {preclamp:.3e} is below -{NEGATIVE_VARIANCE_WARN:g}*s2; clamped to 0",
                KrigingDiagnosticWarning,
                stacklevel=3,
            )
        return 0.0
    return preclamp


def kriging_weights(system: GramSystem, x) -> Prediction:
    """Weights lambda = pinv(K) k_x, with variance and Lebesgue constant filled in."""
    kernel = system.kernel
    x = as_point(x, kernel.dim)
    n, rank = system.n, system.effective_rank

    if n == 0:
        return Prediction(
            x=x.tolist(), weights=[], variance=kernel.s2, lebesgue=0.0, truncated=False,
            preclamp_variance=kernel.s2, effective_rank=0, condition_estimate=1.0,
        )
    j = _node_index(system.points, x)
    if j is not None:
        return _node_prediction(x, n, j, rank, system.condition_estimate)

    k_x = kernel_matrix(kernel, x[None, :], system.points)[0]
    # projections on all modes, then the kept prefix: identical numbers for every rank
    projections = (system.eigenvectors.T @ k_x)[:rank]
    w = system.eigenvalues[:rank]
    weights = system.eigenvectors[:, :rank] @ (projections / w)

    # sum_i lambda_i k(x, x_i) = sum_r <v_r, k_x>^2 / w_r; fsum keeps it monotone in the rank
    explained = math.fsum(projections ** 2 / w)
    preclamp = kernel.s2 - explained
    return Prediction(
        x=x.tolist(),
        weights=weights.tolist(),
        variance=_clamp_variance(preclamp, kernel.s2),
        lebesgue=math.fsum(np.abs(weights)),
        truncated=rank < n,
        preclamp_variance=preclamp,
        effective_rank=rank,
        condition_estimate=system.condition_estimate,
    )


def kriging_variance(system: GramSystem, x) -> float:
    return kriging_weights(system, x).variance


def lebesgue_constant(prediction: Prediction) -> float:
    """Total variation norm sum_i |lambda_i| of the weight measure."""
    return math.fsum(abs(w) for w in prediction.weights)


def predict(prediction: Prediction, samples) -> float:
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.shape[0] != prediction.n:
        raise DimensionMismatchError(f"{samples.shape[0]} samples for {prediction.n} weights")
    if prediction.n == 0:
        return 0.0
    return float(np.dot(prediction.weights, samples)) + 0.0  # no -0.0


def rkhs_norm_span(kernel: Kernel, points, coeffs) -> float:
    """||sum_i c_i k(x_i, .)||_H = sqrt(c^T K c)."""
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    points = np.asarray(points, dtype=float)
    if coeffs.size == 0:
        return 0.0
    points = points.reshape(coeffs.shape[0], -1)
    if points.shape[1] != kernel.dim:
        raise DimensionMismatchError(f"points of dimension {points.shape[1]} for a {kernel.dim}-d kernel")
    K = kernel_matrix(kernel, points, points)
    return math.sqrt(max(float(coeffs @ K @ coeffs), 0.0))


def rkhs_distance_to_span(system: GramSystem, x) -> float:
    """d_H(k(x, .), H_n) as the norm of the residual k(x, .) - sum_i lambda_i k(x_i, .)."""
    kernel = system.kernel
    x = as_point(x, kernel.dim)
    if system.n == 0:
        return math.sqrt(kernel.s2)
    if _node_index(system.points, x) is not None:
        return 0.0
    prediction = kriging_weights(system, x)
    points = np.vstack([x[None, :], system.points])
    coeffs = np.concatenate([[1.0], -np.asarray(prediction.weights)])
    return rkhs_norm_span(kernel, points, coeffs)


def prediction_error_bound(f_norm: float, prediction: Prediction) -> float:
    """Cauchy-Schwarz bound |f(x) - <lambda, f>| <= ||f||_H * sigma(x)."""
    return f_norm * math.sqrt(prediction.variance)


def extended_prediction(kernel: Kernel, design: Design, x, dps: Optional[int] = None) -> Prediction:
    """
    Same quantities as kriging_weights, computed in mpmath arithmetic with no truncation.

    K is factorized by Cholesky at `dps` decimal digits; condition_estimate is
    (max diag L / min diag L)^2, a lower bound of the 2-norm condition number.
    """
    dps = dps or get_settings().extended_dps
    points = _check_design(kernel, design)
    x = as_point(x, kernel.dim)
    n = points.shape[0]
    if n == 0:
        return kriging_weights(build_system(kernel, design), x)
    j = _node_index(points, x)
    if j is not None:
        return _node_prediction(x, n, j, n, 1.0)

    # private context: the global mp precision is shared by every thread
    ctx = MPContext()
    ctx.dps = dps
    cov = mp_covariance(kernel, ctx)
    P = [[ctx.mpf(float(v)) for v in p] for p in points]
    X = [ctx.mpf(float(v)) for v in x]

    def r2(a, b):
        return ctx.fsum((ai - bi) ** 2 for ai, bi in zip(a, b))

    K = ctx.matrix(n, n)
    for a in range(n):
        for b in range(a, n):
            K[a, b] = K[b, a] = cov(r2(P[a], P[b]))
    k_x = ctx.matrix([cov(r2(X, p)) for p in P])
    try:
        L = ctx.cholesky(K)
    except ValueError as e:
        raise NumericalError(f"extended-precision Cholesky failed at dps={dps}: {e}") from None
    weights = ctx.cholesky_solve(K, k_x)
    preclamp = ctx.mpf(kernel.s2) - ctx.fsum(weights[i] * k_x[i] for i in range(n))
    lebesgue = ctx.fsum(abs(weights[i]) for i in range(n))
    diag = [L[i, i] for i in range(n)]
    condition = (max(diag) / min(diag)) ** 2

    preclamp_f = float(preclamp)
    return Prediction(
        x=x.tolist(),
        weights=[float(weights[i]) for i in range(n)],
        variance=_clamp_variance(preclamp_f, kernel.s2),
        lebesgue=float(lebesgue),
        truncated=False,
        preclamp_variance=preclamp_f,
        effective_rank=n,
        condition_estimate=float(condition),
    )


def lebesgue_worst_case(prediction: Prediction, f_values=None):
    """
    Samples g with |g_i| = |f_i| and the sign of lambda_i, and the prediction they give.

    The prediction sum_i |lambda_i f_i| is the largest reachable from samples
    bounded by |f_i|; with the default f = 1 it equals the Lebesgue constant.
    """
    weights = np.asarray(prediction.weights, dtype=float)
    if f_values is None:
        f_values = np.ones_like(weights)
    magnitudes = np.abs(np.asarray(f_values, dtype=float).reshape(-1))
    if magnitudes.shape != weights.shape:
        raise DimensionMismatchError(f"{magnitudes.shape[0]} sample bounds for {weights.shape[0]} weights")
    samples = np.where(weights < 0.0, -magnitudes, magnitudes)
    return samples, math.fsum(np.abs(weights) * magnitudes)
