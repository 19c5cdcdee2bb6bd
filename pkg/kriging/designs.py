"""
Evaluation-point sequences with nested-prefix semantics.

Every generator is deterministic and prefix-stable: the design of size n is
the first n points of the design of size n + 1.
"""
import itertools
import logging
from typing import List, Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from models import Box, Design
from kriging.errors import ConfigError, DimensionMismatchError
from utils.helpers import as_point, read_rows, write_rows

logger = logging.getLogger(__name__)

MAX_HALTON_DIM = 16

# Evaluation-grid resolution per axis for fill distances, by dimension.
_FILL_RESOLUTION = {1: 2 ** 12 + 1, 2: 2 ** 8 + 1, 3: 2 ** 5 + 1}


def _check_count(n: int) -> None:
    if n < 1:
        raise ConfigError(f"design size must be >= 1, got {n}")


def _check_box(box: Box) -> None:
    if box.volume <= 0:
        raise ConfigError("degenerate box: zero volume")


def _bit_reverse(j: int, bits: int) -> int:
    return int(format(j, f"0{bits}b")[::-1], 2)


def _dyadic_unit_points(n: int, dim: int) -> np.ndarray:
    """First n points of the nested interior dyadic grids {j / 2^L}^dim, L = 1, 2, ..."""
    points: List[tuple] = []
    level = 0
    while len(points) < n:
        level += 1
        size = 2 ** level
        fresh = [
            idx for idx in itertools.product(range(1, size), repeat=dim)
            if any(j % 2 for j in idx)
        ]
        # van der Corput rank of j / 2^L is the bit reversal of j
        fresh.sort(key=lambda idx: tuple(_bit_reverse(j, level) for j in idx))
        points.extend(tuple(j / size for j in idx) for idx in fresh)
    return np.asarray(points[:n], dtype=float)


def _rescale(unit_points: np.ndarray, box: Box) -> List[List[float]]:
    lower = np.asarray(box.lower)
    upper = np.asarray(box.upper)
    scaled = lower + (upper - lower) * unit_points
    return np.clip(scaled, lower, upper).tolist()


def grid_sequence(box: Box, n: int) -> Design:
    """Van-der-Corput-ordered dyadic grid: 0.5, 0.25, 0.75, 0.125, ... on [0, 1]."""
    _check_count(n)
    _check_box(box)
    return Design(points=_rescale(_dyadic_unit_points(n, box.dim), box), box=box)


def halton_sequence(box: Box, n: int) -> Design:
    """First n Halton points (bases = first d primes, index starting at 1) rescaled to box."""
    _check_count(n)
    if box.dim > MAX_HALTON_DIM:
        raise ConfigError(f"Halton designs support d <= {MAX_HALTON_DIM}, got {box.dim}")
    _check_box(box)
    sampler = qmc.Halton(d=box.dim, scramble=False)
    sampler.fast_forward(1)  # index 0 is the origin
    return Design(points=_rescale(sampler.random(n), box), box=box)


def accumulate_at(x, rate: float, direction, n: int) -> Design:
    """Points x + rate^i * direction, i = 1..n; x is their accumulation point."""
    _check_count(n)
    if not 0.0 < rate < 1.0:
        raise ConfigError(f"rate must lie in (0, 1), got {rate}")
    x = np.asarray(x, dtype=float).reshape(-1)
    direction = as_point(direction, x.shape[0])
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        raise ConfigError("direction must be nonzero")
    direction = direction / norm

    steps = rate ** np.arange(1, n + 1)
    points = x + steps[:, None] * direction
    corners = np.vstack([points, x])
    box = Box(lower=corners.min(axis=0).tolist(), upper=corners.max(axis=0).tolist())
    return Design(points=points.tolist(), box=box)


def exclude_ball(design: Design, center, radius: float) -> Design:
    """Order-preserving subsequence of the points at distance >= radius from center."""
    if radius <= 0:
        raise ConfigError(f"radius must be positive, got {radius}")
    center = as_point(center, design.dim)
    if design.n == 0:
        return design
    keep = np.linalg.norm(design.array() - center, axis=1) >= radius
    kept = [p for p, k in zip(design.points, keep) if k]
    logger.debug("🧹 exclude_ball kept %d of %d points", len(kept), design.n)
    return Design(points=kept, box=design.box)


def fill_distance(design: Design, box: Optional[Box] = None, resolution: Optional[int] = None) -> float:
    """Largest distance from a point of the box to its nearest design point (grid estimate)."""
    box = box or design.box
    if design.n == 0:
        return float("inf")
    resolution = resolution or _FILL_RESOLUTION.get(box.dim, 9)
    axes = [np.linspace(l, u, resolution) for l, u in zip(box.lower, box.upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
    distances, _ = cKDTree(design.array()).query(grid)
    return float(distances.max())


def write_design_csv(design: Design, path) -> None:
    header = [f"x{i + 1}" for i in range(design.dim)]
    write_rows(path, header, design.points)


def read_design_csv(path, box: Optional[Box] = None) -> Design:
    """Read `x1..xd` rows; without a box, the bounding box of the points is used."""
    header, rows = read_rows(path)
    dim = len(header)
    if header != [f"x{i + 1}" for i in range(dim)]:
        raise ConfigError(f"{path}: design CSV header must be x1..xd, got {header}")
    try:
        points = np.asarray([[float(v) for v in row] for row in rows], dtype=float)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None
    if points.size and points.shape[1] != dim:
        raise DimensionMismatchError(f"{path}: rows do not match the {dim}-column header")
    if box is None:
        if not points.size:
            raise ConfigError(f"{path}: empty design needs an explicit box")
        box = Box(lower=points.min(axis=0).tolist(), upper=points.max(axis=0).tolist())
    return Design(points=points.reshape(-1, dim).tolist(), box=box)
