"""
Deterministic scenarios: kriging variance, Lebesgue constant and prediction
error along nested design prefixes, plus the compact-support counterexample.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from models import (
    Kernel, Box, Design, Prediction, MollifierBump,
    CurveRecord, CSV_COLUMNS, DesignSpec, ScenarioConfig,
)
from kriging.errors import ConfigError, NumericalError, PreconditionError
from kriging.designs import accumulate_at, exclude_ball, grid_sequence, halton_sequence, read_design_csv
from kriging.functions import evaluate, evaluate_many
from kriging.solver import build_system, extended_prediction, kriging_weights, predict
from utils.helpers import as_point, read_rows, write_rows
from utils.settings import get_settings

logger = logging.getLogger(__name__)

# Largest design generated while refilling points removed by an exclusion ball.
_MAX_GENERATED = 2 ** 16
_INT_COLUMNS = {"n", "effective_rank"}


def _prefix_predictions(kernel: Kernel, design: Design, x, n_list: Sequence[int],
                        truncation_tol: Optional[float] = None, precision: str = "double",
                        dps: Optional[int] = None) -> List[Prediction]:
    x = as_point(x, kernel.dim)
    if any(n > design.n for n in n_list):
        raise PreconditionError(f"n_list reaches {max(n_list)} but the design has {design.n} points")

    if precision not in ("double", "extended"):
        raise ConfigError(f"unknown precision '{precision}'")

    def one(n):
        if precision == "extended":
            return extended_prediction(kernel, design.prefix(n), x, dps)
        return kriging_weights(build_system(kernel, design.prefix(n), truncation_tol), x)

    with ThreadPoolExecutor(max_workers=get_settings().max_workers) as pool:
        return list(pool.map(one, n_list))


def _record(n: int, prediction: Prediction, value: float = float("nan"),
            abs_error: float = float("nan")) -> CurveRecord:
    return CurveRecord(
        n=n,
        sigma2=prediction.variance,
        lebesgue=prediction.lebesgue,
        prediction=value,
        abs_error=abs_error,
        effective_rank=prediction.effective_rank,
        condition_estimate=prediction.condition_estimate,
        preclamp_sigma2=prediction.preclamp_variance,
    )


def neb_curve(kernel: Kernel, design: Design, x, n_list: Sequence[int],
              truncation_tol: Optional[float] = None, precision: str = "double",
              dps: Optional[int] = None) -> List[CurveRecord]:
    """sigma^2, Lebesgue constant, rank and conditioning at x for each prefix size."""
    predictions = _prefix_predictions(kernel, design, x, n_list, truncation_tol, precision, dps)
    return [_record(n, p) for n, p in zip(n_list, predictions)]


def lebesgue_curve(kernel: Kernel, design: Design, x, n_list: Sequence[int],
                   truncation_tol: Optional[float] = None, precision: str = "double",
                   dps: Optional[int] = None) -> List[CurveRecord]:
    """Lebesgue constants Lambda_n(x); measured only, no boundedness is asserted."""
    return neb_curve(kernel, design, x, n_list, truncation_tol, precision, dps)


def consistency_curve(kernel: Kernel, design: Design, x, f, n_list: Sequence[int],
                      truncation_tol: Optional[float] = None, precision: str = "double",
                      dps: Optional[int] = None) -> List[CurveRecord]:
    """Prediction of f(x) from the samples f(x_1..x_n) and its absolute error, per n."""
    target = evaluate(f, x)
    predictions = _prefix_predictions(kernel, design, x, n_list, truncation_tol, precision, dps)
    samples = evaluate_many(f, design.array())
    records = []
    for n, p in zip(n_list, predictions):
        value = predict(p, samples[:n])
        records.append(_record(n, p, value, abs(value - target)))
    return records


def counterexample_probe(kernel: Kernel, design: Design, x, radius: float,
                         truncation_tol: Optional[float] = None) -> CurveRecord:
    """
    Mollifier bump centered at x, vanishing on every design point: the kriging
    prediction is exactly 0 while f(x) = 1, whatever sigma^2 does.
    """
    x = as_point(x, kernel.dim)
    f = MollifierBump(center=x.tolist(), radius=radius, height=1.0)
    points = design.array()
    # same expression as the bump's support test, so the samples are exact zeros
    t2 = np.sum((points - x) ** 2, axis=1) / radius ** 2
    if np.any(t2 < 1.0):
        raise PreconditionError(f"{int(np.sum(t2 < 1.0))} design point(s) inside the support ball")

    samples = evaluate_many(f, points)
    prediction = kriging_weights(build_system(kernel, design, truncation_tol), x)
    value = predict(prediction, samples)
    if value != 0.0:
        raise NumericalError(f"prediction from all-zero samples is {value!r}")
    f_x = evaluate(f, x)
    logger.info("🎯 counterexample: prediction=0 f(x)=%g sigma2=%.3e", f_x, prediction.variance)
    return _record(design.n, prediction, value, abs(value - f_x))


def write_csv(records: Sequence[CurveRecord], path) -> None:
    if not records:
        raise ConfigError("no records to write")
    write_rows(path, CSV_COLUMNS, ([getattr(r, c) for c in CSV_COLUMNS] for r in records))
    logger.info("💾 Wrote %d rows to %s", len(records), path)


def read_csv(path) -> List[CurveRecord]:
    header, rows = read_rows(path)
    if tuple(header) != CSV_COLUMNS:
        raise ConfigError(f"{path}: unexpected header {header}")
    return [
        CurveRecord(**{c: int(v) if c in _INT_COLUMNS else float(v) for c, v in zip(CSV_COLUMNS, row)})
        for row in rows
    ]


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return ScenarioConfig.model_validate(data)


def _generate(spec: DesignSpec, dim: int, n: int, base_dir: Path) -> Design:
    if spec.generator == "csv":
        return read_design_csv(base_dir / spec.csv)
    if spec.generator == "accumulate":
        direction = spec.direction or [1.0] + [0.0] * (dim - 1)
        return accumulate_at(spec.point, spec.rate, direction, n)
    box = Box(lower=spec.lower, upper=spec.upper)
    if spec.generator == "halton":
        return halton_sequence(box, n)
    return grid_sequence(box, n)


def build_design(spec: DesignSpec, dim: int, n_needed: int, base_dir: Optional[Path] = None) -> Design:
    """Design from a config section, refilled past an exclusion ball until n_needed points remain."""
    base_dir = base_dir or Path.cwd()
    n = max(spec.n or 0, n_needed)
    while True:
        design = _generate(spec, dim, n, base_dir)
        if spec.exclude_center is not None:
            design = exclude_ball(design, spec.exclude_center, spec.exclude_radius)
        if design.n >= n_needed or spec.generator == "csv" or n >= _MAX_GENERATED:
            break
        n *= 2
    if design.dim != dim:
        raise ConfigError(f"design dimension {design.dim} != kernel dimension {dim}")
    return design


def run_scenario(config: ScenarioConfig, base_dir: Optional[Path] = None) -> List[CurveRecord]:
    """Run the scenario named by config.run.scenario and write config.run.out if set."""
    run = config.run
    kernel = config.kernel
    design = build_design(config.design, kernel.dim, run.n_list[-1], base_dir)
    x = config.target.x
    logger.info("🚀 Scenario %s: %s kernel, %d design points", run.scenario, kernel.family, design.n)

    if run.scenario == "consistency":
        if config.function is None:
            raise ConfigError("consistency scenarios need a [function] section")
        records = consistency_curve(kernel, design, x, config.function, run.n_list,
                                    run.truncation_tol, run.precision, run.dps)
    elif run.scenario == "counterexample":
        if run.radius is None:
            raise ConfigError("counterexample scenarios need run.radius")
        records = [counterexample_probe(kernel, design.prefix(n), x, run.radius, run.truncation_tol)
                   for n in run.n_list]
    elif run.scenario == "lebesgue":
        records = lebesgue_curve(kernel, design, x, run.n_list, run.truncation_tol, run.precision, run.dps)
    else:
        records = neb_curve(kernel, design, x, run.n_list, run.truncation_tol, run.precision, run.dps)

    if run.out:
        write_csv(records, run.out)
    logger.info("✅ Scenario %s finished (%d rows)", run.scenario, len(records))
    return records
