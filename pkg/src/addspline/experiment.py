"""
Monte-Carlo reproduction of the convergence-rate study.

Four estimators per simulated dataset: the joint fit (f_joint, g_joint) and
the two oracle fits that see the other true component (f_oracle, g_oracle).
Replicates are pure tasks keyed by (n, replicate); results are reduced in key
order, so the outputs do not depend on scheduling.
"""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.addspline.config.settings import (
    F_DERIVATIVE_ORDER,
    F_THEORETICAL_SLOPE,
    G_DERIVATIVE_ORDER,
    G_THEORETICAL_SLOPE,
    LAMBDA_EXPONENT,
    MU_EXPONENT,
    SLOPE_N_MIN,
    TUNING_C_LAMBDA,
    TUNING_C_MU,
    TV_C_MU,
    TV_MU_EXPONENT,
    TV_THEORETICAL_SLOPE,
)
from src.addspline.datagen import cell_seed, simulate
from src.addspline.exceptions import AddsplineError, ExperimentError
from src.addspline.models.experiment import (
    ESTIMATORS,
    CellResult,
    MseCurve,
    ReplicateResult,
    SlopeFit,
    TuningResult,
    TuningRule,
)
from src.addspline.models.fit import AdditiveFit, FitConfig, StepFunction
from src.addspline.models.scenario import Dataset, Scenario
from src.addspline.penalties import penalty_matrix
from src.addspline.solver import AdditiveSystem, fit_additive_tv, fit_single, predict, tv_denoise
from src.addspline.spline_basis import design_matrix, make_basis
from src.addspline.truths import truth_derivative
from src.addspline.utils.dataset_io import write_mse_csv, write_rows, write_slopes_csv
from src.addspline.utils.logger import logger

PathLike = Union[str, Path]


def default_rule(q: int = 2) -> TuningRule:
    """lambda = 14 n^(-3/7) with mu = 0.3 n^(-2/5) (q=2) or mu = n^(-1/3) (q=1)."""
    if q == 1:
        return TuningRule(TUNING_C_LAMBDA, LAMBDA_EXPONENT, TV_C_MU, TV_MU_EXPONENT)
    return TuningRule(TUNING_C_LAMBDA, LAMBDA_EXPONENT, TUNING_C_MU, MU_EXPONENT)


def theoretical_slope(estimator_id: str, q: int = 2) -> float:
    """Squared-error rate exponent: -6/7 for f, -4/5 for g (q=2) or -2/3 for g (q=1)."""
    if estimator_id.startswith("f"):
        return F_THEORETICAL_SLOPE
    return TV_THEORETICAL_SLOPE if q == 1 else G_THEORETICAL_SLOPE


def centered_mse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Mean squared difference after removing each vector's empirical mean."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    return float(np.mean(((estimate - estimate.mean()) - (truth - truth.mean())) ** 2))


def component_mse(fit: AdditiveFit, dataset: Dataset, scenario: Scenario) -> Tuple[float, float]:
    """(mse_f, mse_g) of a joint fit at the design points, both sides recentered."""
    return (
        centered_mse(fit.fitted_f, scenario.f0(dataset.x)),
        centered_mse(fit.fitted_g, scenario.g0(dataset.z)),
    )


class ReplicateProblem:
    """
    One simulated dataset with its bases, design matrices and penalties.

    Everything that does not depend on (lambda, mu) is built once, so a tuning
    grid reuses it for every pair.
    """

    def __init__(self, scenario: Scenario, dataset: Dataset, q: int = 2):
        if q not in (1, 2):
            raise ValueError(f"q must be 1 or 2, got {q}")
        self.scenario = scenario
        self.dataset = dataset
        self.q = q
        self.basis_f = make_basis(dataset.x)
        self.bf = design_matrix(self.basis_f, dataset.x)
        self.omega_f = penalty_matrix(self.basis_f, F_DERIVATIVE_ORDER)
        self.truth_f = scenario.f0(dataset.x)
        self.truth_g = scenario.g0(dataset.z)
        self.basis_g = None
        self._system: Optional[AdditiveSystem] = None
        if q == 2:
            self.basis_g = make_basis(dataset.z)
            self.bg = design_matrix(self.basis_g, dataset.z)
            self.omega_g = penalty_matrix(self.basis_g, G_DERIVATIVE_ORDER)

    @classmethod
    def simulated(cls, scenario: Scenario, n: int, seed: int, q: int = 2) -> "ReplicateProblem":
        return cls(scenario, simulate(scenario, n, seed), q)

    @property
    def system(self) -> AdditiveSystem:
        if self._system is None:
            self._system = AdditiveSystem(self.dataset.y, self.bf, self.bg, self.omega_f, self.omega_g)
        return self._system

    def fit_joint(self, lam: float, mu: float) -> AdditiveFit:
        if self.q == 2:
            return self.system.fit(FitConfig(lam, mu, q=2))
        return fit_additive_tv(self.dataset.y, self.bf, self.omega_f, self.dataset.z, FitConfig(lam, mu, q=1))

    def fit_f_oracle(self, lam: float) -> np.ndarray:
        """Fitted f at the design points from Y - g0(Z)."""
        return fit_single(self.dataset.y - self.truth_g, self.bf, self.omega_f, lam).fitted

    def g_oracle(self, mu: float) -> Callable[[np.ndarray], np.ndarray]:
        """Fitted g from Y - f0(X), as a function of z."""
        partial = self.dataset.y - self.truth_f
        if self.q == 2:
            gamma = fit_single(partial, self.bg, self.omega_g, mu).gamma
            basis_g = self.basis_g
            return lambda z: design_matrix(basis_g, np.atleast_1d(z)).values @ gamma
        breakpoints, inverse, counts = np.unique(self.dataset.z, return_inverse=True, return_counts=True)
        weights = counts.astype(float)
        means = np.bincount(inverse, weights=partial, minlength=len(breakpoints)) / weights
        return StepFunction(breakpoints, tv_denoise(means, weights, mu ** 2), counts)

    def fit_g_oracle(self, mu: float) -> np.ndarray:
        """Fitted g at the design points from Y - f0(X)."""
        return self.g_oracle(mu)(self.dataset.z)

    def joint_mse(self, lam: float, mu: float) -> Tuple[float, float]:
        return component_mse(self.fit_joint(lam, mu), self.dataset, self.scenario)

    def mses(self, lam: float, mu: float) -> Tuple[float, float, float, float]:
        """MSEs in the order f_joint, g_joint, f_oracle, g_oracle."""
        mse_f, mse_g = self.joint_mse(lam, mu)
        return (
            mse_f,
            mse_g,
            centered_mse(self.fit_f_oracle(lam), self.truth_f),
            centered_mse(self.fit_g_oracle(mu), self.truth_g),
        )


def _replicate_task(task: Tuple[Scenario, int, int, TuningRule, int, int]) -> ReplicateResult:
    scenario, n, replicate, rule, seed_base, q = task
    seed = cell_seed(seed_base, n, replicate)
    try:
        problem = ReplicateProblem.simulated(scenario, n, seed, q)
        mse = problem.mses(rule.lam(n), rule.mu(n))
    except (AddsplineError, np.linalg.LinAlgError) as e:
        raise ExperimentError(f"Replicate {replicate} failed: {e}", n=n, seed=seed) from e
    return ReplicateResult(n=n, replicate=replicate, seed=seed, mse=mse)


def _map_tasks(func, tasks: List, jobs: int) -> List:
    """Map pure tasks in input order, through a process pool when jobs > 1."""
    if jobs <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    chunksize = max(1, len(tasks) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(func, tasks, chunksize=chunksize))


def reduce_cell(results: Sequence[ReplicateResult]) -> CellResult:
    """Means and standard errors of the four MSEs over replicates, in replicate order."""
    ordered = sorted(results, key=lambda r: r.replicate)
    values = np.array([r.mse for r in ordered])
    count = len(ordered)
    means = values.mean(axis=0)
    stderrs = values.std(axis=0, ddof=1) / np.sqrt(count) if count > 1 else np.zeros(len(ESTIMATORS))
    return CellResult(
        n=ordered[0].n,
        replicates=count,
        means=dict(zip(ESTIMATORS, map(float, means))),
        stderrs=dict(zip(ESTIMATORS, map(float, stderrs))),
    )


def run_cell(scenario: Scenario, n: int, replicates: int, rule: TuningRule, seed_base: int,
             q: int = 2, jobs: int = 1) -> CellResult:
    """
    Simulate `replicates` datasets of size n and average the four component MSEs.

    Raises:
        ExperimentError: If a fit fails; the message names the (n, seed) cell
    """
    if replicates < 1:
        raise ValueError(f"replicates must be at least 1, got {replicates}")
    tasks = [(scenario, n, r, rule, seed_base, q) for r in range(replicates)]
    cell = reduce_cell(_map_tasks(_replicate_task, tasks, jobs))
    logger.info(
        f"n={n}: " + ", ".join(f"{k}={cell.means[k]:.4g}" for k in ESTIMATORS)
    )
    return cell


def run_grid(scenario: Scenario, n_grid: Sequence[int], replicates: int, rule: TuningRule,
             seed_base: int, q: int = 2, jobs: int = 1) -> Dict[str, MseCurve]:
    """
    MSE curves of the four estimators over the n grid.

    All (n, replicate) tasks share one work pool; seeds depend only on
    (seed_base, n, replicate).
    """
    sizes = [int(n) for n in n_grid]
    if not sizes:
        raise ValueError("n_grid must not be empty")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"n_grid must be strictly increasing, got {sizes}")
    if replicates < 1:
        raise ValueError(f"replicates must be at least 1, got {replicates}")

    tasks = [(scenario, n, r, rule, seed_base, q) for n in sizes for r in range(replicates)]
    logger.info(
        f"Running {len(tasks)} replicates over {len(sizes)} sample sizes for {scenario.name} "
        f"(q={q}, jobs={jobs})"
    )
    results = _map_tasks(_replicate_task, tasks, jobs)
    by_size: Dict[int, List[ReplicateResult]] = {n: [] for n in sizes}
    for result in results:
        by_size[result.n].append(result)
    cells = [reduce_cell(by_size[n]) for n in sizes]
    return {
        estimator: MseCurve(estimator, [cell.point(estimator) for cell in cells])
        for estimator in ESTIMATORS
    }


def _tuning_task(task) -> np.ndarray:
    scenario, n, replicate, rule, seed_base, q, grid_lambda, grid_mu = task
    seed = cell_seed(seed_base, n, replicate)
    try:
        problem = ReplicateProblem.simulated(scenario, n, seed, q)
        table = np.empty((len(grid_lambda), len(grid_mu)))
        for i, c_lambda in enumerate(grid_lambda):
            for j, c_mu in enumerate(grid_mu):
                pair_rule = rule.with_constants(c_lambda, c_mu)
                table[i, j] = sum(problem.joint_mse(pair_rule.lam(n), pair_rule.mu(n)))
    except (AddsplineError, np.linalg.LinAlgError) as e:
        raise ExperimentError(f"Tuning replicate {replicate} failed: {e}", n=n, seed=seed) from e
    return table


def tune_constants(scenario: Scenario, n: int, replicates: int, grid_lambda: Sequence[float],
                   grid_mu: Sequence[float], seed_base: int, rule: Optional[TuningRule] = None,
                   q: int = 2, jobs: int = 1) -> TuningResult:
    """
    Grid search for (c_lambda, c_mu) minimizing the replicate mean of mse_f + mse_g
    of the joint fit at sample size n. Ties go to the smaller c_lambda, then c_mu.
    """
    grid_lambda = sorted(float(c) for c in grid_lambda)
    grid_mu = sorted(float(c) for c in grid_mu)
    if not grid_lambda or not grid_mu:
        raise ValueError("Tuning grids must not be empty")
    if replicates < 1:
        raise ValueError(f"replicates must be at least 1, got {replicates}")
    rule = rule or default_rule(q)

    tasks = [
        (scenario, n, r, rule, seed_base, q, grid_lambda, grid_mu) for r in range(replicates)
    ]
    logger.info(
        f"Tuning over {len(grid_lambda)}x{len(grid_mu)} grid at n={n} with {replicates} replicates"
    )
    tables = _map_tasks(_tuning_task, tasks, jobs)
    mean_table = np.mean(np.stack(tables), axis=0)

    best: Optional[Tuple[float, float, float]] = None
    table: Dict[Tuple[float, float], float] = {}
    for i, c_lambda in enumerate(grid_lambda):
        for j, c_mu in enumerate(grid_mu):
            value = float(mean_table[i, j])
            table[(c_lambda, c_mu)] = value
            if best is None or value < best[2]:
                best = (c_lambda, c_mu, value)
    logger.info(f"Selected c_lambda={best[0]:g}, c_mu={best[1]:g} (objective {best[2]:.6g})")
    return TuningResult(c_lambda=best[0], c_mu=best[1], objective=best[2], table=table)


def loglog_slope(curve: MseCurve, n_min: int = SLOPE_N_MIN, q: int = 2,
                 reference_slope: Optional[float] = None) -> SlopeFit:
    """
    OLS of log(mse) on log(n) over the points with n >= n_min.

    Raises:
        ValueError: If fewer than 2 points qualify
    """
    points = [p for p in curve.points if p.n >= n_min and p.mse_mean > 0]
    if len(points) < 2:
        raise ValueError(
            f"Curve '{curve.estimator_id}' has {len(points)} positive points with n >= {n_min}; need 2"
        )
    log_n = np.log([p.n for p in points])
    log_mse = np.log([p.mse_mean for p in points])
    slope, intercept = np.polyfit(log_n, log_mse, 1)
    if reference_slope is None:
        reference_slope = theoretical_slope(curve.estimator_id, q)
    return SlopeFit(
        estimator_id=curve.estimator_id,
        slope=float(slope),
        intercept=float(intercept),
        n_min=n_min,
        theoretical_slope=reference_slope,
        points_used=len(points),
    )


def gnuplot_script(curves: Sequence[MseCurve], slopes: Sequence[SlopeFit], prefix_name: str) -> str:
    """
    Plain-text gnuplot script: MSE against n, then log-log panels with the
    fitted points and a guide line of theoretical slope. Run it from the
    output directory.
    """
    data = f"{prefix_name}_mse.csv"

    def series(estimator: str) -> str:
        return (
            f"'{data}' every ::1 using (strcol(1) eq '{estimator}' ? $2 : 1/0):3 "
            f"with linespoints title '{estimator}'"
        )

    lines = [
        "# MSE curves and log-log rate panels",
        "set datafile separator ','",
        "set terminal pngcairo size 1000,700",
        "set key top right",
        "",
        f"set output '{prefix_name}_mse.png'",
        "set xlabel 'n'",
        "set ylabel 'MSE'",
        "plot " + ", \\\n     ".join(series(c.estimator_id) for c in curves),
        "",
        f"set output '{prefix_name}_loglog.png'",
        "set logscale xy",
        f"set multiplot layout {max(len(slopes), 1)},1",
    ]
    for fit in slopes:
        # guide line through the fitted value at n_min
        offset = fit.intercept + (fit.slope - fit.theoretical_slope) * np.log(fit.n_min)
        lines += [
            f"set title '{fit.estimator_id}: fitted slope {fit.slope:.3f}, theory {fit.theoretical_slope:.3f}'",
            f"plot {series(fit.estimator_id)}, \\",
            f"     exp({offset!r}) * x**({fit.theoretical_slope!r}) with lines dashtype 2 lc 'black' "
            f"title 'theoretical slope'",
        ]
    lines += ["unset multiplot", "unset output", ""]
    return "\n".join(lines)


def emit_outputs(curves: Sequence[MseCurve], slopes: Sequence[SlopeFit], path_prefix: PathLike) -> List[Path]:
    """
    Write <prefix>_mse.csv, <prefix>_slopes.csv and, when there are curves,
    the plot script <prefix>.gp.
    """
    prefix = Path(path_prefix)
    written = [
        write_mse_csv(curves, prefix.with_name(f"{prefix.name}_mse.csv")),
        write_slopes_csv(slopes, prefix.with_name(f"{prefix.name}_slopes.csv")),
    ]
    if curves:
        script = prefix.with_name(f"{prefix.name}.gp")
        try:
            script.write_text(gnuplot_script(curves, slopes, prefix.name), encoding="utf-8")
        except OSError as e:
            raise OSError(f"Could not write {script}: {e}") from e
        written.append(script)
    logger.info(f"Wrote {', '.join(str(p) for p in written)}")
    return written


def dump_curves(scenario: Scenario, n: int, seed: int, rule: TuningRule, path_prefix: PathLike,
                q: int = 2, grid_size: int = 501) -> List[Path]:
    """
    Evaluate the truths and the four estimators of one replicate on a uniform
    grid over [0, 1] (estimators are clamped outside the observed support),
    and write the knots and the truths' derivatives alongside.
    """
    problem = ReplicateProblem.simulated(scenario, n, seed, q)
    lam, mu = rule.lam(n), rule.mu(n)
    joint = problem.fit_joint(lam, mu)
    f_oracle = fit_single(problem.dataset.y - problem.truth_g, problem.bf, problem.omega_f, lam).gamma
    g_oracle = problem.g_oracle(mu)

    t = np.linspace(0.0, 1.0, grid_size)
    f_joint, g_joint = predict(joint, problem.basis_f, t, t, problem.basis_g)
    columns = [
        t,
        scenario.f0(t),
        scenario.g0(t),
        f_joint,
        g_joint,
        design_matrix(problem.basis_f, t).values @ f_oracle,
        g_oracle(t),
    ]

    prefix = Path(path_prefix)
    written = [
        write_rows(
            prefix.with_name(f"{prefix.name}_curves.csv"),
            ("t", "f_true", "g_true", "f_joint", "g_joint", "f_oracle", "g_oracle"),
            zip(*(map(float, c) for c in columns)),
        )
    ]
    knot_rows = [("f", float(k)) for k in problem.basis_f.knot_vector.interior]
    if problem.basis_g is not None:
        knot_rows += [("g", float(k)) for k in problem.basis_g.knot_vector.interior]
    written.append(write_rows(prefix.with_name(f"{prefix.name}_knots.csv"), ("component", "knot"), knot_rows))
    derivatives = [t] + [truth_derivative(scenario.f_shape, t, d) for d in (1, 2, 3)] + [
        truth_derivative(scenario.g_shape, t, d) for d in (1, 2, 3)
    ]
    written.append(
        write_rows(
            prefix.with_name(f"{prefix.name}_derivatives.csv"),
            ("t", "f_d1", "f_d2", "f_d3", "g_d1", "g_d2", "g_d3"),
            zip(*(map(float, c) for c in derivatives)),
        )
    )
    logger.info(f"Wrote function curves for n={n}, seed={seed} to {prefix.parent}")
    return written
