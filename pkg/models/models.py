from pydantic import BaseModel, Field, ConfigDict, model_validator
from typing import List, Optional, Literal, Union, Annotated
import math

import numpy as np

Family = Literal["gaussian", "exponential", "matern"]

# Which optional parameters each covariance family takes.
FAMILY_PARAMETERS = {
    "gaussian": {"alpha"},
    "exponential": {"alpha", "beta"},
    "matern": {"nu", "rho"},
}
OPTIONAL_PARAMETERS = ("alpha", "beta", "nu", "rho")


class Kernel(BaseModel):
    """Stationary covariance k(x, y) = s2 * phi(||x - y||) with its family parameters."""
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    family: Family
    s2: float = Field(1.0, gt=0)
    alpha: Optional[float] = Field(None, gt=0)
    beta: Optional[float] = Field(None, gt=0, lt=2)
    nu: Optional[float] = Field(None, gt=0)
    rho: Optional[float] = Field(None, gt=0)
    dim: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_family_parameters(self):
        wanted = FAMILY_PARAMETERS[self.family]
        for name in OPTIONAL_PARAMETERS:
            value = getattr(self, name)
            if name in wanted and value is None:
                raise ValueError(f"{self.family} kernel requires '{name}'")
            if name not in wanted and value is not None:
                raise ValueError(f"'{name}' is irrelevant for a {self.family} kernel")
        return self

    def to_record(self) -> dict:
        """Flat key-value record; irrelevant keys are absent."""
        return self.model_dump(exclude_none=True)


class GridSpec(BaseModel):
    """Geometric grid of |u| values used by the polynomial-minorant check."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_points: int = Field(4096, ge=64)
    u_min: float = Field(1e-3, gt=0)
    u_max: float = Field(1e4, gt=0)
    rel_tol: float = Field(1e-3, ge=0, lt=1)

    @model_validator(mode="after")
    def check_two_decades(self):
        if self.u_max < 100 * self.u_min:
            raise ValueError("grid must span at least two decades of |u|")
        return self

    def values(self) -> np.ndarray:
        return np.geomspace(self.u_min, self.u_max, self.n_points)


class SpectralReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    r: int = Field(ge=0)
    c_estimate: float = Field(ge=0)
    satisfied: bool
    grid_spec: GridSpec
    tail_log_ratio: float  # log(min over last decade) - log(min over the decade before)


class Box(BaseModel):
    """Axis-aligned bounding box, the compact closure proxy of a design."""
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    lower: List[float]
    upper: List[float]

    @model_validator(mode="after")
    def check_corners(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("box corners must have the same, positive dimension")
        if any(u < l for l, u in zip(self.lower, self.upper)):
            raise ValueError("box upper corner must dominate the lower corner")
        return self

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return math.prod(u - l for l, u in zip(self.lower, self.upper))

    @classmethod
    def unit(cls, dim: int = 1) -> "Box":
        return cls(lower=[0.0] * dim, upper=[1.0] * dim)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)


class Design(BaseModel):
    """Ordered evaluation points x_1, ..., x_n; the first n points are the design of size n."""
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    points: List[List[float]] = Field(default_factory=list)
    box: Box

    @model_validator(mode="after")
    def check_points(self):
        if any(len(p) != self.box.dim for p in self.points):
            raise ValueError("every design point must have the box dimension")
        if self.points and not np.all(self.box.contains(np.asarray(self.points))):
            raise ValueError("design points must lie inside the box")
        return self

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def n(self) -> int:
        return len(self.points)

    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float).reshape(self.n, self.dim)

    def prefix(self, n: int) -> "Design":
        if n < 0 or n > self.n:
            raise ValueError(f"prefix size {n} outside [0, {self.n}]")
        return Design(points=self.points[:n], box=self.box)


class Prediction(BaseModel):
    """Kriging weights, kriging variance and Lebesgue constant at a target point."""
    model_config = ConfigDict(frozen=True)

    x: List[float]
    weights: List[float]
    variance: float = Field(ge=0)
    lebesgue: float = Field(ge=0)
    truncated: bool = False
    preclamp_variance: float
    effective_rank: int = Field(ge=0)
    condition_estimate: float

    @property
    def n(self) -> int:
        return len(self.weights)


# Test functions: a discriminated union on `kind`.

class KernelSpan(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    kind: Literal["kernel_span"] = "kernel_span"
    kernel: Kernel
    centers: List[List[float]]
    coeffs: List[float]

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.centers) != len(self.coeffs):
            raise ValueError("centers and coeffs must have the same length")
        if any(len(c) != self.kernel.dim for c in self.centers):
            raise ValueError("centers must have the kernel dimension")
        return self

    @property
    def dim(self) -> int:
        return self.kernel.dim


class GaussianBump(BaseModel):
    """h * exp(-||x - c||^2 / (2 w^2)), a rapidly decreasing function."""
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    kind: Literal["gaussian_bump"] = "gaussian_bump"
    center: List[float]
    width: float = Field(gt=0)
    height: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.center)


class MollifierBump(BaseModel):
    """h * exp(1 - 1/(1 - t^2)) with t = ||x - c|| / radius, exactly zero for t >= 1."""
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    kind: Literal["mollifier_bump"] = "mollifier_bump"
    center: List[float]
    radius: float = Field(gt=0)
    height: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.center)


class ContinuousNonsmooth(BaseModel):
    """Triangle wave: slope * sum_j dist(x_j, period * Z)."""
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    kind: Literal["continuous_nonsmooth"] = "continuous_nonsmooth"
    slope: float = 1.0
    period: float = Field(1.0, gt=0)
    dim: int = Field(1, ge=1)


TestFunction = Annotated[
    Union[KernelSpan, GaussianBump, MollifierBump, ContinuousNonsmooth],
    Field(discriminator="kind"),
]


class QuadratureSpec(BaseModel):
    """Adaptive quadrature on [0, u0] followed by dyadic tail blocks [U, 2U]."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    u0: Optional[float] = Field(None, gt=0)  # default: 10 / width of the test function
    rel_tol: float = Field(1e-8, gt=0, lt=1)
    max_blocks: int = Field(60, ge=1)
    growth_blocks: int = Field(3, ge=2)  # consecutive growing blocks that signal divergence


class SpectralNorm(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float  # +inf when the integrand tail diverges
    squared: float
    tail_bound: float
    diverged: bool
    converged: bool
    blocks: int


class CurveRecord(BaseModel):
    """One row of a convergence curve at design size n."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=0)
    sigma2: float
    lebesgue: float
    prediction: float = math.nan
    abs_error: float = math.nan
    effective_rank: int = Field(ge=0)
    condition_estimate: float
    preclamp_sigma2: float


CSV_COLUMNS = (
    "n",
    "sigma2",
    "lebesgue",
    "prediction",
    "abs_error",
    "effective_rank",
    "condition_estimate",
    "preclamp_sigma2",
)


class ConditionalMeanReport(BaseModel):
    """Monte Carlo check that the kriging residual behaves like xi(x) - E[xi(x) | F_n]."""
    model_config = ConfigDict(frozen=True)

    n_paths: int
    sigma2: float
    jitter_used: float
    residual_mean: float
    residual_variance: float
    expected_residual_variance: float
    covariances: List[float]
    mean_ok: bool
    covariance_ok: bool
    variance_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_ok and self.covariance_ok and self.variance_ok


class MartingaleRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    sigma2: float
    empirical_mse: float
    mean_square_prediction: float
    exceed_coarse: float  # fraction of paths with |gap| > 0.1 s
    exceed_fine: float  # fraction of paths with |gap| > 0.01 s


class MartingaleReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_paths: int
    seed: int
    jitter_used: float
    records: List[MartingaleRecord]
    mse_ok: bool
    l2_bounded: bool
    exceedance_ok: bool

    @property
    def passed(self) -> bool:
        return self.mse_ok and self.l2_bounded and self.exceedance_ok


# Scenario configs (TOML sections).

DEFAULT_N_LIST = [4, 8, 16, 32, 64, 128, 256]


class DesignSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    generator: Literal["grid", "halton", "accumulate", "csv"] = "grid"
    lower: List[float] = Field(default_factory=lambda: [0.0])
    upper: List[float] = Field(default_factory=lambda: [1.0])
    n: Optional[int] = Field(None, ge=1)
    point: Optional[List[float]] = None
    rate: Optional[float] = None
    direction: Optional[List[float]] = None
    csv: Optional[str] = None
    exclude_center: Optional[List[float]] = None
    exclude_radius: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def check_generator_keys(self):
        if self.generator == "accumulate" and (self.point is None or self.rate is None):
            raise ValueError("accumulate designs require 'point' and 'rate'")
        if self.generator == "csv" and not self.csv:
            raise ValueError("csv designs require 'csv'")
        if (self.exclude_center is None) != (self.exclude_radius is None):
            raise ValueError("'exclude_center' and 'exclude_radius' go together")
        return self


class TargetSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    x: List[float]


class RunSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Literal["neb", "consistency", "lebesgue", "counterexample"] = "neb"
    n_list: List[int] = Field(default_factory=lambda: list(DEFAULT_N_LIST))
    precision: Literal["double", "extended"] = "double"
    truncation_tol: float = Field(1e-12, ge=0, lt=1)
    dps: Optional[int] = Field(None, ge=30)
    seed: int = Field(0, ge=0)
    n_paths: int = Field(100_000, ge=1)
    radius: Optional[float] = Field(None, gt=0)
    out: Optional[str] = None

    @model_validator(mode="after")
    def check_n_list(self):
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValueError("n_list must hold positive design sizes")
        if sorted(self.n_list) != self.n_list:
            raise ValueError("n_list must be increasing")
        return self


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kernel: Kernel
    design: DesignSpec = Field(default_factory=DesignSpec)
    target: TargetSpec
    function: Optional[TestFunction] = None
    run: RunSpec = Field(default_factory=RunSpec)
