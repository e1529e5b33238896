"""
Command-line front end: fit, simulate, experiment, tune, slopes and curves.

Every subcommand resolves its configuration as defaults < optional --config
JSON file < explicit flags, and records the resolved configuration as
config.json in its output directory.

Exit codes: 0 success, 1 numerical or internal failure, 2 usage or input error.
"""
import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.addspline.config.settings import (
    DEFAULT_JOBS,
    DEFAULT_SEED,
    DESK_N_GRID,
    DESK_REPLICATES,
    F_DERIVATIVE_ORDER,
    FULL_N_GRID,
    FULL_REPLICATES,
    G_DERIVATIVE_ORDER,
    RESULTS_DIR,
    SLOPE_N_MIN,
    TUNE_GRID_LAMBDA,
    TUNE_GRID_MU,
    TUNE_N,
    TV_MAX_ITERATIONS,
    TV_REL_TOLERANCE,
)
from src.addspline.datagen import build_scenario, simulate, study_scenarios
from src.addspline.exceptions import AddsplineError
from src.addspline.experiment import default_rule, dump_curves, loglog_slope
from src.addspline.models.experiment import TuningRule
from src.addspline.models.fit import FitConfig
from src.addspline.penalties import penalty_matrix
from src.addspline.services.experiment_service import CONFIG_FILENAME, ExperimentService
from src.addspline.solver import AdditiveSystem, fit_additive_tv
from src.addspline.spline_basis import design_matrix, make_basis
from src.addspline.utils.dataset_io import (
    read_dataset,
    read_json,
    read_mse_csv,
    write_dataset,
    write_json,
    write_rows,
    write_slopes_csv,
)
from src.addspline.utils.logger import logger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

SCENARIO_DEFAULTS = {"rho": 0.8, "snr": 7.0, "f_shape": "sine", "g_shape": "bump", "seed": DEFAULT_SEED}
SCENARIO_KEYS = ("rho", "snr", "f_shape", "g_shape")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _flag(parser: argparse.ArgumentParser, *names: str, help: str) -> None:
    parser.add_argument(*names, action="store_const", const=True, default=None, help=help)


def resolve_config(args: argparse.Namespace, defaults: Dict[str, Any]) -> Dict[str, Any]:
    """Merge defaults, the --config JSON file and explicitly given flags, in that order."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        file_config = read_json(args.config)
        unknown = sorted(set(file_config) - set(defaults))
        if unknown:
            raise ValueError(f"Unknown keys in {args.config}: {', '.join(unknown)}")
        resolved.update(file_config)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _output_dir(args: argparse.Namespace, command: str) -> Path:
    return Path(args.output) if args.output else RESULTS_DIR / command


def _rule(config: Dict[str, Any]) -> TuningRule:
    base = default_rule(config["q"])
    return base.with_constants(
        config["c_lambda"] if config.get("c_lambda") is not None else base.c_lambda,
        config["c_mu"] if config.get("c_mu") is not None else base.c_mu,
    )


def _scenario(config: Dict[str, Any]):
    snr = config["snr"]
    return build_scenario(config["rho"], math.inf if snr is None else snr, config["f_shape"], config["g_shape"])


def cmd_fit(args: argparse.Namespace) -> int:
    """Fit the additive model to an x,z,y CSV file."""
    config = resolve_config(args, {
        "input": None, "q": 2, "lam": None, "mu": None, "c_lambda": None, "c_mu": None,
        "max_iterations": TV_MAX_ITERATIONS, "rel_tolerance": TV_REL_TOLERANCE,
    })
    if not config["input"]:
        raise ValueError("fit needs --input")
    output_dir = _output_dir(args, "fit")
    dataset = read_dataset(config["input"])
    n = dataset.n

    rule = _rule(config)
    lam = config["lam"] if config["lam"] is not None else rule.lam(n)
    mu = config["mu"] if config["mu"] is not None else rule.mu(n)
    if config["q"] == 2 and (lam <= 0 or mu <= 0):
        raise ValueError(f"q=2 needs positive lambda and mu (lambda={lam}, mu={mu})")
    cfg = FitConfig(lam, mu, q=config["q"], max_iterations=config["max_iterations"],
                    rel_tolerance=config["rel_tolerance"])
    write_json(output_dir / CONFIG_FILENAME, {**config, "lam": lam, "mu": mu})

    basis_f = make_basis(dataset.x)
    bf = design_matrix(basis_f, dataset.x)
    omega_f = penalty_matrix(basis_f, F_DERIVATIVE_ORDER)
    bases = {"f": basis_f.to_dict()}
    coefficient_rows = []
    if cfg.q == 2:
        basis_g = make_basis(dataset.z)
        bases["g"] = basis_g.to_dict()
        system = AdditiveSystem(
            dataset.y, bf, design_matrix(basis_g, dataset.z), omega_f,
            penalty_matrix(basis_g, G_DERIVATIVE_ORDER),
        )
        fit = system.fit(cfg)
        coefficient_rows += [("g", k, float(v)) for k, v in enumerate(fit.gamma_g)]
    else:
        fit = fit_additive_tv(dataset.y, bf, omega_f, dataset.z, cfg)
        step = fit.step_function
        write_rows(output_dir / "step_function.csv", ("breakpoint", "level", "weight"),
                   zip(map(float, step.breakpoints), map(float, step.levels), map(int, step.weights)))
    coefficient_rows = [("f", k, float(v)) for k, v in enumerate(fit.gamma_f)] + coefficient_rows

    write_rows(output_dir / "coefficients.csv", ("component", "index", "value"), coefficient_rows)
    write_rows(
        output_dir / "fitted.csv",
        ("x", "z", "y", "f_hat", "g_hat"),
        zip(*(map(float, c) for c in (dataset.x, dataset.z, dataset.y, fit.fitted_f, fit.fitted_g))),
    )
    write_json(output_dir / "summary.json", {
        **fit.to_dict(), "kkt_residual": fit.residual, "kkt_bound": fit.residual_bound,
        "n": n, "bases": bases,
    })
    logger.info(
        f"Fit q={cfg.q} on {n} points: objective={fit.objective:.6g}, KKT residual={fit.residual:.3g}, "
        f"converged={fit.converged}"
    )
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """Draw one dataset and write it with its metadata sidecar."""
    config = resolve_config(args, {**SCENARIO_DEFAULTS, "n": 1000})
    output_dir = _output_dir(args, "simulate")
    write_json(output_dir / CONFIG_FILENAME, config)
    dataset = simulate(_scenario(config), config["n"], config["seed"])
    write_dataset(dataset, output_dir / "dataset.csv")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    """Run the MSE-curve experiment (one scenario or all four)."""
    config = resolve_config(args, {
        **SCENARIO_DEFAULTS, "q": 2, "n_grid": None, "replicates": None, "n_min": SLOPE_N_MIN,
        "c_lambda": None, "c_mu": None, "full_scale": False, "desk_scale": False,
        "all_scenarios": False,
    })
    if config["desk_scale"] and config["full_scale"]:
        raise ValueError("--desk-scale and --full-scale are mutually exclusive")
    if config["full_scale"]:
        n_grid, replicates = FULL_N_GRID, FULL_REPLICATES
    else:
        n_grid, replicates = DESK_N_GRID, DESK_REPLICATES
    config["n_grid"] = list(config["n_grid"] or n_grid)
    config["replicates"] = config["replicates"] or replicates
    if config["all_scenarios"]:
        overridden = [key for key in SCENARIO_KEYS
                      if getattr(args, key, None) is not None or config[key] != SCENARIO_DEFAULTS[key]]
        if overridden:
            raise ValueError(f"--all-scenarios runs the fixed study scenarios; drop {', '.join(overridden)}")
        for key in SCENARIO_KEYS:
            del config[key]

    service = ExperimentService(_output_dir(args, "experiment"), jobs=args.jobs or DEFAULT_JOBS)
    service.write_config(config)
    rule = _rule(config)
    if config["all_scenarios"]:
        service.run_all_scenarios(study_scenarios(), config["n_grid"], config["replicates"],
                                  config["seed"], rule=rule, q=config["q"], n_min=config["n_min"])
    else:
        service.run_experiment(_scenario(config), config["n_grid"], config["replicates"],
                               config["seed"], rule=rule, q=config["q"], n_min=config["n_min"])
    return EXIT_OK


def cmd_tune(args: argparse.Namespace) -> int:
    """Grid-search the tuning constants (c_lambda, c_mu)."""
    config = resolve_config(args, {
        **SCENARIO_DEFAULTS, "q": 2, "n": TUNE_N, "replicates": 10,
        "grid_lambda": list(TUNE_GRID_LAMBDA), "grid_mu": list(TUNE_GRID_MU),
    })
    service = ExperimentService(_output_dir(args, "tune"), jobs=args.jobs or DEFAULT_JOBS)
    service.write_config(config)
    summary = service.run_tuning(_scenario(config), config["n"], config["replicates"],
                                 config["grid_lambda"], config["grid_mu"], config["seed"],
                                 rule=default_rule(config["q"]), q=config["q"])
    print(json.dumps({"c_lambda": summary["c_lambda"], "c_mu": summary["c_mu"]}))
    return EXIT_OK


def cmd_slopes(args: argparse.Namespace) -> int:
    """Recompute log-log slopes from an MSE CSV file."""
    config = resolve_config(args, {"input": None, "n_min": SLOPE_N_MIN, "q": 2})
    if not config["input"]:
        raise ValueError("slopes needs --input")
    output_dir = _output_dir(args, "slopes")
    write_json(output_dir / CONFIG_FILENAME, config)
    slopes = [loglog_slope(c, n_min=config["n_min"], q=config["q"]) for c in read_mse_csv(config["input"])]
    write_slopes_csv(slopes, output_dir / "slopes.csv")
    for s in slopes:
        logger.info(f"{s.estimator_id}: slope {s.slope:.4f} (theory {s.theoretical_slope:.4f})")
    return EXIT_OK


def cmd_curves(args: argparse.Namespace) -> int:
    """Dump truths and estimates of one replicate on a grid."""
    config = resolve_config(args, {
        **SCENARIO_DEFAULTS, "q": 2, "n": 1000, "c_lambda": None, "c_mu": None, "grid_size": 501,
    })
    output_dir = _output_dir(args, "curves")
    write_json(output_dir / CONFIG_FILENAME, config)
    dump_curves(_scenario(config), config["n"], config["seed"], _rule(config), output_dir / "curves",
                q=config["q"], grid_size=config["grid_size"])
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with configuration values (flags override it)")
    parser.add_argument("--output", help="Output directory (default: RESULTS_DIR/<command>)")
    parser.add_argument("--q", type=int, choices=(1, 2), help="Penalty type for g: 2 spline, 1 total variation")


def _add_scenario(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rho", type=float, help="Correlation of X and Z (default 0.8)")
    parser.add_argument("--snr", type=float, help="Signal-to-noise ratio (default 7)")
    parser.add_argument("--f-shape", dest="f_shape", help="Truth shape of f (default sine)")
    parser.add_argument("--g-shape", dest="g_shape", help="Truth shape of g (default bump)")
    parser.add_argument("--seed", type=int, help=f"Seed base (default {DEFAULT_SEED})")


def _add_rule(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--c-lambda", dest="c_lambda", type=float, help="Constant of the lambda rule")
    parser.add_argument("--c-mu", dest="c_mu", type=float, help="Constant of the mu rule")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="addspline",
        description="Penalized least squares for additive models and its simulation study.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit = subparsers.add_parser("fit", help="Fit the additive model to an x,z,y CSV file")
    _add_common(fit)
    _add_rule(fit)
    fit.add_argument("--input", help="CSV file with columns x,z,y")
    fit.add_argument("--lambda", dest="lam", type=float, help="Tuning parameter of f (overrides the rule)")
    fit.add_argument("--mu", type=float, help="Tuning parameter of g (overrides the rule)")
    fit.add_argument("--max-iterations", dest="max_iterations", type=int, help="q=1 iteration cap")
    fit.add_argument("--tol", dest="rel_tolerance", type=float, help="q=1 relative tolerance")
    fit.set_defaults(handler=cmd_fit)

    sim = subparsers.add_parser("simulate", help="Draw a synthetic dataset")
    _add_common(sim)
    _add_scenario(sim)
    sim.add_argument("--n", type=int, help="Sample size (default 1000)")
    sim.set_defaults(handler=cmd_simulate)

    exp = subparsers.add_parser("experiment", help="Run the MSE-curve experiment")
    _add_common(exp)
    _add_scenario(exp)
    _add_rule(exp)
    _flag(exp, "--desk-scale", help="Desk grid {250,...,4000} with 20 replicates (default)")
    _flag(exp, "--full-scale", help="Full grid 100..5000 step 50 with 100 replicates")
    _flag(exp, "--all-scenarios", help="Run all four rho x SNR scenarios")
    exp.add_argument("--n-grid", dest="n_grid", type=_int_list, help="Comma-separated sample sizes")
    exp.add_argument("--replicates", type=int, help="Replicates per sample size")
    exp.add_argument("--n-min", dest="n_min", type=int, help="Smallest n in the slope regression")
    exp.add_argument("--jobs", type=int, help=f"Worker processes (default {DEFAULT_JOBS})")
    exp.set_defaults(handler=cmd_experiment)

    tune = subparsers.add_parser("tune", help="Grid-search the tuning constants")
    _add_common(tune)
    _add_scenario(tune)
    tune.add_argument("--n", type=int, help=f"Sample size (default {TUNE_N})")
    tune.add_argument("--replicates", type=int, help="Replicates averaged per grid point")
    tune.add_argument("--grid-lambda", dest="grid_lambda", type=_float_list, help="Candidate c_lambda values")
    tune.add_argument("--grid-mu", dest="grid_mu", type=_float_list, help="Candidate c_mu values")
    tune.add_argument("--jobs", type=int, help=f"Worker processes (default {DEFAULT_JOBS})")
    tune.set_defaults(handler=cmd_tune)

    slopes = subparsers.add_parser("slopes", help="Log-log slopes from an MSE CSV file")
    _add_common(slopes)
    slopes.add_argument("--input", help="MSE CSV with columns estimator,n,mse,stderr,replicates")
    slopes.add_argument("--n-min", dest="n_min", type=int, help="Smallest n in the regression")
    slopes.set_defaults(handler=cmd_slopes)

    curves = subparsers.add_parser("curves", help="Dump truths and estimates on a grid")
    _add_common(curves)
    _add_scenario(curves)
    _add_rule(curves)
    curves.add_argument("--n", type=int, help="Sample size (default 1000)")
    curves.add_argument("--grid-size", dest="grid_size", type=int, help="Grid points on [0, 1]")
    curves.set_defaults(handler=cmd_curves)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the subcommand and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except np.linalg.LinAlgError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_FAILURE
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except (AddsplineError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
