"""
Gaussian sample paths and Monte Carlo checks of the kriging predictor as a
conditional expectation (and hence a martingale along nested designs).
"""
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import scipy.linalg

from models import (
    Kernel, Design, Prediction,
    ConditionalMeanReport, MartingaleRecord, MartingaleReport,
)
from kriging.errors import (
    ConfigError, DuplicatePointsError, NumericalError, PreconditionError, KrigingDiagnosticWarning,
)
from kriging.kernels import kernel_matrix
from kriging.solver import build_system, kriging_weights
from utils.helpers import as_point, write_rows
from utils.settings import get_settings

logger = logging.getLogger(__name__)

# Paths per Philox stream; fixed so a path's draws never depend on scheduling or n_paths.
PATH_BLOCK = 1024
MAX_JITTER = 1e-4  # relative to s2
EXCEED_LEVELS = (0.1, 0.01)  # epsilon / s


@dataclass(frozen=True)
class PathEnsemble:
    points: np.ndarray
    values: np.ndarray  # (n_paths, n_points)
    seed: int
    jitter_used: float

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MartingaleRun:
    report: MartingaleReport
    trajectories: np.ndarray  # (n_paths, len(n_list)) predictor values
    target: np.ndarray  # xi(x) per path


def _square_root(K: np.ndarray, s2: float):
    """Lower Cholesky factor of K + jitter*I with the smallest jitter that works."""
    for jitter in [0.0] + [10.0 ** e * s2 for e in range(-15, -3)]:
        try:
            L = scipy.linalg.cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            continue
        if jitter > 0.0:
            logger.info("🩹 Cholesky needed jitter %.1e", jitter)
            warnings.warn(f"covariance factorized with diagonal jitter {jitter:.1e}",
                          KrigingDiagnosticWarning, stacklevel=3)
        return L, jitter
    raise NumericalError(f"covariance factorization failed even with jitter {MAX_JITTER:g}*s2")


def _block_normals(seed: int, block: int, rows: int, n_points: int) -> np.ndarray:
    generator = np.random.Generator(np.random.Philox(key=seed).jumped(block))
    return generator.standard_normal((rows, n_points))


def sample_paths(kernel: Kernel, points, n_paths: int, seed: int) -> PathEnsemble:
    """
    Jointly Gaussian draws with covariance [k(p_i, p_j)], reproducible from seed.

    Block b of PATH_BLOCK paths uses the Philox stream keyed by seed and jumped
    b times; within a block normals are laid out path-major, so the draw for
    (path, point) is a fixed function of (seed, path index, point index).
    """
    if n_paths < 1:
        raise ConfigError("n_paths must be >= 1")
    if seed < 0:
        raise ConfigError("seed must be nonnegative")
    points = np.asarray(points, dtype=float).reshape(-1, kernel.dim)
    if np.unique(points, axis=0).shape[0] != points.shape[0]:
        raise DuplicatePointsError("sample points must be pairwise distinct")

    L, jitter = _square_root(kernel_matrix(kernel, points, points), kernel.s2)
    n_blocks = math.ceil(n_paths / PATH_BLOCK)
    sizes = [min(PATH_BLOCK, n_paths - b * PATH_BLOCK) for b in range(n_blocks)]
    m = points.shape[0]

    with ThreadPoolExecutor(max_workers=get_settings().max_workers) as pool:
        blocks = list(pool.map(lambda b: _block_normals(seed, b, sizes[b], m), range(n_blocks)))
    values = np.vstack(blocks) @ L.T
    logger.debug("🎲 Sampled %d paths at %d points (seed=%d)", n_paths, m, seed)
    return PathEnsemble(points=points, values=values, seed=seed, jitter_used=jitter)


def write_ensemble_csv(ensemble: PathEnsemble, path) -> None:
    n_paths, n_points = ensemble.values.shape
    rows = (
        (p, j, ensemble.values[p, j])
        for p in range(n_paths) for j in range(n_points)
    )
    write_rows(path, ("path_id", "point_id", "value"), rows)


def _simulation_points(design_points: np.ndarray, x: np.ndarray):
    """Design points plus x (unless x is already one of them) and the column holding xi(x)."""
    hits = np.flatnonzero(np.all(design_points == x, axis=1))
    if hits.size:
        return design_points, int(hits[0])
    return np.vstack([design_points, x[None, :]]), design_points.shape[0]


def _expected_gap_variance(prediction: Prediction, jitter: float, x_in_data: bool) -> float:
    """E[(xi(x) - sum lambda_i xi(x_i))^2] for the jittered simulation."""
    if x_in_data:
        return 0.0  # the residual is identically zero
    return prediction.variance + jitter * (1.0 + math.fsum(w * w for w in prediction.weights))


def conditional_mean_check(kernel: Kernel, design: Design, x, n_paths: int = 100_000,
                           seed: int = 0) -> ConditionalMeanReport:
    """Residual xi(x) - sum lambda_i xi(x_i): zero mean, orthogonal to the data, variance sigma^2."""
    x = as_point(x, kernel.dim)
    prediction = kriging_weights(build_system(kernel, design), x)
    points, target_col = _simulation_points(design.array(), x)
    ensemble = sample_paths(kernel, points, n_paths, seed)

    n = design.n
    data = ensemble.values[:, :n]
    residual = ensemble.values[:, target_col] - data @ np.asarray(prediction.weights)
    mean = float(residual.mean())
    variance = float(residual.var(ddof=1)) if n_paths > 1 else 0.0
    expected = _expected_gap_variance(prediction, ensemble.jitter_used, target_col < n)

    centered = residual - mean
    covariances = [float(c) for c in centered @ (data - data.mean(axis=0)) / max(n_paths - 1, 1)]
    data_sd = data.std(axis=0, ddof=1) if n_paths > 1 else np.zeros(n)
    noise = 1.0 / math.sqrt(n_paths)
    floor = 1e-12 * kernel.s2

    mean_ok = abs(mean) <= 4.0 * math.sqrt(max(variance, expected)) * noise + floor
    covariance_ok = all(
        abs(c) <= 4.0 * noise * math.sqrt(variance) * sd + abs(w) * ensemble.jitter_used + floor
        for c, sd, w in zip(covariances, data_sd, prediction.weights)
    )
    variance_ok = abs(variance - expected) <= 0.05 * expected + floor

    logger.info("🧪 conditional mean check: mean=%.2e var=%.4e expected=%.4e", mean, variance, expected)
    return ConditionalMeanReport(
        n_paths=n_paths, sigma2=prediction.variance, jitter_used=ensemble.jitter_used,
        residual_mean=mean, residual_variance=variance, expected_residual_variance=expected,
        covariances=covariances, mean_ok=mean_ok, covariance_ok=covariance_ok, variance_ok=variance_ok,
    )


def martingale_experiment(kernel: Kernel, design: Design, x, n_list: Sequence[int],
                          n_paths: int = 100_000, seed: int = 0) -> MartingaleRun:
    """
    Predictor values sum_i lambda_i(x; x_n) xi(x_i) along nested prefixes, per path.

    Checks: empirical mean-square gap tracks sigma^2 within 5%, E[prediction^2]
    stays below k(x, x), and the fraction of paths with |gap| > eps does not grow
    with n (eps = 0.1 s and 0.01 s) beyond Monte Carlo noise.
    """
    x = as_point(x, kernel.dim)
    n_list = list(n_list)
    if not n_list or sorted(n_list) != n_list or n_list[0] < 0:
        raise ConfigError("n_list must be a nonempty increasing list of sizes")
    if n_list[-1] > design.n:
        raise PreconditionError(f"n_list reaches {n_list[-1]} but the design has {design.n} points")

    points, target_col = _simulation_points(design.prefix(n_list[-1]).array(), x)
    ensemble = sample_paths(kernel, points, n_paths, seed)
    target = ensemble.values[:, target_col]
    s = math.sqrt(kernel.s2)
    noise = 1.0 / math.sqrt(n_paths)

    records: List[MartingaleRecord] = []
    columns = []
    mse_ok = l2_bounded = True
    for n in n_list:
        prediction = kriging_weights(build_system(kernel, design.prefix(n)), x)
        values = ensemble.values[:, :n] @ np.asarray(prediction.weights, dtype=float)
        gap = values - target
        mse = float(np.mean(gap ** 2))
        mean_square = float(np.mean(values ** 2))
        expected = _expected_gap_variance(prediction, ensemble.jitter_used, target_col < n)
        jitter_share = ensemble.jitter_used * math.fsum(w * w for w in prediction.weights)

        mse_ok &= abs(mse - expected) <= 0.05 * expected + 1e-12 * kernel.s2
        l2_bounded &= mean_square <= kernel.s2 + 5.0 * math.sqrt(2.0) * kernel.s2 * noise + jitter_share
        records.append(MartingaleRecord(
            n=n, sigma2=prediction.variance, empirical_mse=mse, mean_square_prediction=mean_square,
            exceed_coarse=float(np.mean(np.abs(gap) > EXCEED_LEVELS[0] * s)),
            exceed_fine=float(np.mean(np.abs(gap) > EXCEED_LEVELS[1] * s)),
        ))
        columns.append(values)

    def non_increasing(fractions):
        return all(
            later <= earlier + 3.0 * math.sqrt(max(earlier * (1.0 - earlier), noise ** 2)) * noise
            for earlier, later in zip(fractions, fractions[1:])
        )

    exceedance_ok = (non_increasing([r.exceed_coarse for r in records])
                     and non_increasing([r.exceed_fine for r in records]))
    report = MartingaleReport(
        n_paths=n_paths, seed=seed, jitter_used=ensemble.jitter_used, records=records,
        mse_ok=bool(mse_ok), l2_bounded=bool(l2_bounded), exceedance_ok=exceedance_ok,
    )
    logger.info("🧪 martingale experiment over n=%s: passed=%s", n_list, report.passed)
    return MartingaleRun(report=report, trajectories=np.column_stack(columns), target=target)
