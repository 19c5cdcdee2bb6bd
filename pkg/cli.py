"""
Command-line front end of the laboratory.

Every command prints one JSON document to stdout with the resolved
configuration (defaults made explicit) under "config" and the outcome under
"result". Logs and diagnostics go to stderr.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from models import Kernel, ScenarioConfig
from kriging import experiments, gp, kernels, solver
from kriging.errors import ConfigError, NumericalError
from kriging.functions import evaluate, evaluate_many
from utils.helpers import parse_point, serialize, write_rows
from utils.settings import get_settings

logger = logging.getLogger("kriglab.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

FAMILIES = ("gaussian", "exponential", "matern")
KERNEL_KEYS = ("s2", "alpha", "beta", "nu", "rho", "dim")
RUN_KEYS = ("scenario", "n_list", "precision", "truncation_tol", "dps", "seed", "n_paths", "radius", "out")
MARTINGALE_COLUMNS = ("n", "sigma2", "empirical_mse", "mean_square_prediction", "exceed_coarse", "exceed_fine")


class _Parser(argparse.ArgumentParser):
    """argparse with configuration errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def _kernel_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="TOML scenario config; flags override its keys")
    parent.add_argument("--kernel", choices=FAMILIES, help="covariance family")
    parent.add_argument("--s2", type=float)
    parent.add_argument("--alpha", type=float)
    parent.add_argument("--beta", type=float)
    parent.add_argument("--nu", type=float)
    parent.add_argument("--rho", type=float)
    parent.add_argument("--dim", type=int)
    return parent


def _scenario_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--design-csv", help="design points as an x1..xd CSV")
    parent.add_argument("--x", help="target point, e.g. 0.5 or 0.5,1.0")
    parent.add_argument("--scenario", choices=("neb", "consistency", "lebesgue", "counterexample"))
    parent.add_argument("--n-list", type=_int_list, help="increasing design sizes, e.g. 4,8,16")
    parent.add_argument("--precision", choices=("double", "extended"))
    parent.add_argument("--truncation-tol", type=float)
    parent.add_argument("--dps", type=int, help="decimal digits for extended precision")
    parent.add_argument("--seed", type=int)
    parent.add_argument("--n-paths", type=int)
    parent.add_argument("--radius", type=float, help="support radius of the counterexample bump")
    parent.add_argument("--out", help="CSV output path")
    return parent


def _kernel_section(args, base: dict) -> dict:
    section = dict(base)
    if args.kernel and args.kernel != section.get("family"):
        # a new family keeps only the family-independent keys
        section = {k: v for k, v in section.items() if k in ("s2", "dim")}
        section["family"] = args.kernel
    for key in KERNEL_KEYS:
        value = getattr(args, key)
        if value is not None:
            section[key] = value
    return section


def _config_data(args) -> dict:
    if args.config is None:
        return {}
    return experiments.load_scenario(args.config).model_dump(exclude_none=True)


def _resolve_kernel(args) -> Kernel:
    return Kernel.model_validate(_kernel_section(args, _config_data(args).get("kernel", {})))


def _resolve_scenario(args):
    """ScenarioConfig with the flags applied, and the directory relative design paths start from."""
    data = _config_data(args)
    base_dir = Path(args.config).parent if args.config else Path.cwd()
    data["kernel"] = _kernel_section(args, data.get("kernel", {}))
    if args.design_csv:
        data["design"] = {"generator": "csv", "csv": args.design_csv}
        base_dir = Path.cwd()
    if args.x is not None:
        data["target"] = {"x": parse_point(args.x)}
    run = dict(data.get("run", {}))
    for key in RUN_KEYS:
        value = getattr(args, key)
        if value is not None:
            run[key] = value
    data["run"] = run
    return ScenarioConfig.model_validate(data), base_dir


def _single_design(config: ScenarioConfig, base_dir: Path):
    """The design a single prediction uses: a whole CSV, else the prefix of size max(n_list)."""
    n = config.run.n_list[-1]
    design = experiments.build_design(config.design, config.kernel.dim, n, base_dir)
    if config.design.generator != "csv" and design.n > n:
        design = design.prefix(n)
    return design


def cmd_eval(args):
    kernel = _resolve_kernel(args)
    x, y = parse_point(args.x), parse_point(args.y)
    config = {"kernel": kernel, "x": x, "y": y}
    return config, {"value": kernels.kernel_eval(kernel, x, y)}


def cmd_spectral_check(args):
    kernel = _resolve_kernel(args)
    grid = kernels.default_grid(kernel)
    if args.r is not None:
        config = {"kernel": kernel, "r": args.r, "grid": grid}
        return config, kernels.check_polynomial_minorant(kernel, args.r, grid)
    config = {"kernel": kernel, "r_max": args.r_max, "grid": grid}
    return config, {"min_poly_order": kernels.min_poly_order(kernel, args.r_max, grid)}


def cmd_predict(args):
    config, base_dir = _resolve_scenario(args)
    kernel, run, x = config.kernel, config.run, config.target.x
    design = _single_design(config, base_dir)
    if run.precision == "extended":
        prediction = solver.extended_prediction(kernel, design, x, run.dps)
    else:
        prediction = solver.kriging_weights(solver.build_system(kernel, design, run.truncation_tol), x)

    result = {
        "n": prediction.n,
        "weights": prediction.weights,
        "sigma2": prediction.variance,
        "preclamp_sigma2": prediction.preclamp_variance,
        "lebesgue": prediction.lebesgue,
        "truncated": prediction.truncated,
        "effective_rank": prediction.effective_rank,
        "condition_estimate": prediction.condition_estimate,
    }
    if config.function is not None:
        value = solver.predict(prediction, evaluate_many(config.function, design.array()))
        result["prediction"] = value
        result["abs_error"] = abs(value - evaluate(config.function, x))
    return config, result


def cmd_curve(args):
    config, base_dir = _resolve_scenario(args)
    records = experiments.run_scenario(config, base_dir)
    if config.run.out:
        return config, {"out": config.run.out, "rows": len(records)}
    return config, records


def cmd_gp_check(args):
    config, base_dir = _resolve_scenario(args)
    design = _single_design(config, base_dir)
    report = gp.conditional_mean_check(config.kernel, design, config.target.x,
                                       config.run.n_paths, config.run.seed)
    return config, {"passed": report.passed, **report.model_dump()}


def cmd_martingale(args):
    config, base_dir = _resolve_scenario(args)
    run = config.run
    design = experiments.build_design(config.design, config.kernel.dim, run.n_list[-1], base_dir)
    outcome = gp.martingale_experiment(config.kernel, design, config.target.x, run.n_list,
                                       run.n_paths, run.seed)
    report = outcome.report
    if run.out:
        write_rows(run.out, MARTINGALE_COLUMNS,
                   ([getattr(r, c) for c in MARTINGALE_COLUMNS] for r in report.records))
    return config, {"passed": report.passed, **report.model_dump()}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kriglab", description="Kriging consistency laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    kernel_flags, scenario_flags = _kernel_flags(), _scenario_flags()

    p = sub.add_parser("eval", parents=[kernel_flags], help="evaluate k(x, y)")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("spectral-check", parents=[kernel_flags],
                       help="check S(u)(1 + |u|^r) >= C > 0 on a frequency grid")
    order = p.add_mutually_exclusive_group(required=True)
    order.add_argument("--r", type=int)
    order.add_argument("--r-max", type=int)
    p.set_defaults(handler=cmd_spectral_check)

    p = sub.add_parser("predict", parents=[kernel_flags, scenario_flags],
                       help="kriging weights, variance and Lebesgue constant at x")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("curve", parents=[kernel_flags, scenario_flags],
                       help="run a scenario along nested design prefixes")
    p.set_defaults(handler=cmd_curve)

    p = sub.add_parser("gp-check", parents=[kernel_flags, scenario_flags],
                       help="Monte Carlo check of the conditional-mean identity")
    p.set_defaults(handler=cmd_gp_check)

    p = sub.add_parser("martingale", parents=[kernel_flags, scenario_flags],
                       help="Monte Carlo predictor trajectories along nested designs")
    p.set_defaults(handler=cmd_martingale)
    return parser


def configure_logging() -> None:
    logging.basicConfig(
        level=get_settings().log_level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.captureWarnings(True)


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (None, 0) else int(e.code)
    configure_logging()
    logger.debug("🚀 kriglab %s", args.command)

    try:
        config, result = args.handler(args)
    except (NumericalError, np.linalg.LinAlgError) as e:
        logger.error("💥 Numerical failure: %s", e)
        return EXIT_NUMERICAL
    except ValidationError as e:
        logger.error("❌ Invalid configuration:\n%s", e)
        return EXIT_CONFIG
    except (ConfigError, ValueError, OSError) as e:
        logger.error("❌ %s", e)
        return EXIT_CONFIG

    print(serialize({"config": config, "result": result}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(run())
