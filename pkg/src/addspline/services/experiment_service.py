"""
Experiment service for running simulation studies into an output directory.
"""
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.addspline.config.settings import DEFAULT_JOBS, RESULTS_DIR, SLOPE_N_MIN
from src.addspline.exceptions import AddsplineError
from src.addspline.experiment import default_rule, emit_outputs, loglog_slope, run_grid, tune_constants
from src.addspline.models.experiment import TuningRule
from src.addspline.models.scenario import Scenario
from src.addspline.utils.dataset_io import write_json, write_rows
from src.addspline.utils.logger import logger

CONFIG_FILENAME = "config.json"


class ExperimentService:
    """Service for running MSE-curve experiments and tuning searches."""

    def __init__(self, output_dir: Optional[Path] = None, jobs: int = DEFAULT_JOBS):
        """
        Initialize the experiment service.

        Args:
            output_dir: Directory for all outputs (default: RESULTS_DIR)
            jobs: Worker processes; 1 runs every replicate inline
        """
        if jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {jobs}")
        self.output_dir = Path(output_dir) if output_dir is not None else RESULTS_DIR
        self.jobs = jobs

    def write_config(self, config: Dict[str, Any]) -> Path:
        """Record the fully resolved configuration of a run."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return write_json(self.output_dir / CONFIG_FILENAME, config)

    def run_experiment(self, scenario: Scenario, n_grid: Sequence[int], replicates: int,
                       seed: int, rule: Optional[TuningRule] = None, q: int = 2,
                       n_min: int = SLOPE_N_MIN, prefix: str = "experiment") -> Dict[str, Any]:
        """
        Run the MSE grid for one scenario and write curves, slopes and plot script.

        Args:
            scenario: Data-generating scenario
            n_grid: Strictly increasing sample sizes
            replicates: Datasets per sample size
            seed: Seed base for every (n, replicate) cell
            rule: Tuning rule (default: the rule for q)
            q: 2 for spline/spline, 1 for spline/total variation
            n_min: Smallest n used in the slope regression
            prefix: File name prefix inside the output directory

        Returns:
            Dictionary with run metadata, slopes and written files

        Raises:
            ExperimentError: If a replicate fails
        """
        start_time = datetime.now()
        rule = rule or default_rule(q)
        self.output_dir.mkdir(parents=True, exist_ok=True)

        results: Dict[str, Any] = {
            "start_time": start_time.isoformat(),
            "scenario": scenario.name,
            "n_grid": list(n_grid),
            "replicates": replicates,
            "jobs": self.jobs,
            "output_directory": str(self.output_dir),
        }
        try:
            logger.info(f"Starting experiment {prefix} for scenario {scenario.name}")
            curves = run_grid(scenario, n_grid, replicates, rule, seed, q=q, jobs=self.jobs)
            curve_list = list(curves.values())
            slopes = []
            for curve in curve_list:
                try:
                    slopes.append(loglog_slope(curve, n_min=n_min, q=q))
                except ValueError as e:
                    logger.warning(f"Skipping slope for {curve.estimator_id}: {e}")
            files = emit_outputs(curve_list, slopes, self.output_dir / prefix)
            results["slopes"] = [s.to_dict() for s in slopes]
            results["files"] = [str(p) for p in files]
        except AddsplineError as e:
            logger.error(f"Experiment {prefix} failed: {e}")
            raise
        finally:
            end_time = datetime.now()
            results["end_time"] = end_time.isoformat()
            results["duration_seconds"] = (end_time - start_time).total_seconds()

        logger.info(f"Experiment {prefix} finished in {results['duration_seconds']:.1f}s")
        return results

    def run_all_scenarios(self, scenarios: Sequence[Scenario], n_grid: Sequence[int], replicates: int,
                          seed: int, rule: Optional[TuningRule] = None, q: int = 2,
                          n_min: int = SLOPE_N_MIN) -> List[Dict[str, Any]]:
        """Run each scenario into its own prefix, e.g. rho0.8_snr7."""
        summaries = []
        for scenario in scenarios:
            prefix = scenario.name.rsplit("_", 2)[0]
            summaries.append(
                self.run_experiment(scenario, n_grid, replicates, seed, rule=rule, q=q,
                                    n_min=n_min, prefix=prefix)
            )
        return summaries

    def run_tuning(self, scenario: Scenario, n: int, replicates: int, grid_lambda: Sequence[float],
                   grid_mu: Sequence[float], seed: int, rule: Optional[TuningRule] = None,
                   q: int = 2, prefix: str = "tuning") -> Dict[str, Any]:
        """
        Grid-search the tuning constants and write the objective table.

        Returns:
            Dictionary with the selected constants and the table file
        """
        start_time = datetime.now()
        result = tune_constants(scenario, n, replicates, grid_lambda, grid_mu, seed,
                                rule=rule, q=q, jobs=self.jobs)
        table_path = write_rows(
            self.output_dir / f"{prefix}_grid.csv",
            ("c_lambda", "c_mu", "objective"),
            ((cl, cm, value) for (cl, cm), value in sorted(result.table.items())),
        )
        selected = write_json(
            self.output_dir / f"{prefix}_selected.json",
            {"c_lambda": result.c_lambda, "c_mu": result.c_mu, "objective": result.objective},
        )
        end_time = datetime.now()
        return {
            "start_time": start_time.isoformat(),
            "end_time": end_time.isoformat(),
            "duration_seconds": (end_time - start_time).total_seconds(),
            "scenario": scenario.name,
            "c_lambda": result.c_lambda,
            "c_mu": result.c_mu,
            "objective": result.objective,
            "files": [str(table_path), str(selected)],
        }
