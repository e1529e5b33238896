"""
Penalized least-squares solvers for the additive model Y = f(X) + g(Z) + noise.

q=2: ||Y - f - g||_n^2 + lambda^2 I^2(f) + mu^2 J^2(g), a block linear system.
q=1: the same with mu^2 TV(g), solved by exact block-coordinate descent.
"""
import heapq
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, block_diag, cho_factor, cho_solve

from src.addspline.config.settings import (
    BACKWARD_ERROR_FACTOR,
    NORMAL_RESIDUAL_TOLERANCE,
    REFINEMENT_STEPS,
)
from src.addspline.exceptions import FactorizationError, FitError
from src.addspline.models.basis import DesignMatrix, PenaltyMatrix, SplineBasis
from src.addspline.models.fit import AdditiveFit, ComponentFit, FitConfig, StepFunction
from src.addspline.penalties import factorize
from src.addspline.spline_basis import design_matrix
from src.addspline.utils.logger import logger

MatrixLike = Union[DesignMatrix, PenaltyMatrix, np.ndarray]


def _matrix(value: MatrixLike) -> np.ndarray:
    if isinstance(value, DesignMatrix):
        return value.values
    if isinstance(value, PenaltyMatrix):
        return value.entries
    return np.asarray(value, dtype=float)


def _vector(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise FitError(f"Response must be a vector, got shape {y.shape}")
    return y


def _check_design(y: np.ndarray, design: np.ndarray, omega: np.ndarray, label: str) -> None:
    if design.ndim != 2 or design.shape[0] != len(y):
        raise FitError(f"Design matrix {label} has shape {design.shape}, expected ({len(y)}, K)")
    if omega.shape != (design.shape[1], design.shape[1]):
        raise FitError(
            f"Penalty {label} has shape {omega.shape}, expected {(design.shape[1], design.shape[1])}"
        )


def normal_residual(matrix: np.ndarray, gamma: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """rhs - matrix @ gamma, accumulated in extended precision."""
    return (np.asarray(rhs, dtype=np.longdouble)
            - np.asarray(matrix, dtype=np.longdouble) @ np.asarray(gamma, dtype=np.longdouble))


def residual_norm(matrix: np.ndarray, gamma: np.ndarray, rhs: np.ndarray) -> float:
    return float(np.max(np.abs(normal_residual(matrix, gamma, rhs)), initial=0.0))


def residual_bound(matrix: np.ndarray, gamma: np.ndarray, rhs: np.ndarray) -> float:
    """
    Largest acceptable normal-equation residual for a float64 solution.

    1e-8 (1 + ||rhs||_inf) plus the rounding floor c eps || |M| |gamma| ||_inf.
    Rounding each coefficient to float64 alone moves the residual by up to
    eps/2 || |M| |gamma| ||_inf, which exceeds 1e-8 once the third-derivative
    penalty of a fine basis dominates M.
    """
    tolerance = NORMAL_RESIDUAL_TOLERANCE * (1.0 + float(np.max(np.abs(rhs), initial=0.0)))
    magnitude = float(np.max(np.abs(matrix) @ np.abs(gamma), initial=0.0))
    return tolerance + BACKWARD_ERROR_FACTOR * float(np.finfo(float).eps) * magnitude


class ScaledCholesky:
    """
    Solver for a symmetric positive definite system M gamma = b.

    Factors the equilibrated matrix D M D with D = diag(M)^(-1/2), then refines
    the solution on residuals accumulated in extended precision. Refinement
    stops when the residual no longer decreases.
    """

    def __init__(self, matrix: np.ndarray, refinement_steps: int = REFINEMENT_STEPS):
        self.matrix = np.asarray(matrix, dtype=float)
        self.refinement_steps = refinement_steps
        diagonal = np.diag(self.matrix)
        if not np.all(np.isfinite(diagonal)) or np.any(diagonal <= 0):
            raise FactorizationError("Normal-equation matrix has a non-positive or non-finite diagonal")
        self.scale = 1.0 / np.sqrt(diagonal)
        try:
            self._factor = cho_factor(self.matrix * np.outer(self.scale, self.scale), lower=False)
        except LinAlgError as e:
            logger.error(f"Normal-equation factorization failed: {e}")
            raise FactorizationError(f"Normal equations are not positive definite: {e}") from e

    def _correction(self, rhs: np.ndarray) -> np.ndarray:
        return self.scale * cho_solve(self._factor, self.scale * rhs)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        gamma = self._correction(rhs)
        residual = normal_residual(self.matrix, gamma, rhs)
        size = np.max(np.abs(residual), initial=0.0)
        for _ in range(self.refinement_steps):
            if size == 0:
                break
            candidate = gamma + self._correction(residual.astype(float))
            candidate_residual = normal_residual(self.matrix, candidate, rhs)
            candidate_size = np.max(np.abs(candidate_residual), initial=0.0)
            if candidate_size >= size:
                break
            gamma, residual, size = candidate, candidate_residual, candidate_size
        return gamma


class RidgeSystem:
    """
    Factorized normal equations (B^T B / n + tuning^2 Omega) gamma = B^T y / n.

    The factorization is reused across right-hand sides, which the q=1
    alternation relies on.
    """

    def __init__(self, design: MatrixLike, omega: MatrixLike, tuning: float):
        if tuning <= 0:
            raise FitError(f"Tuning parameter must be positive, got {tuning}")
        self.design = _matrix(design)
        self.omega = _matrix(omega)
        self.tuning = float(tuning)
        self.n = self.design.shape[0]
        self.matrix = self.design.T @ self.design / self.n + self.tuning ** 2 * self.omega
        self._solver = ScaledCholesky(self.matrix)

    def rhs(self, y: np.ndarray) -> np.ndarray:
        return self.design.T @ y / self.n

    def solve(self, y: np.ndarray) -> np.ndarray:
        return self._solver.solve(self.rhs(y))

    def residual(self, gamma: np.ndarray, y: np.ndarray) -> float:
        return residual_norm(self.matrix, gamma, self.rhs(y))

    def residual_bound(self, gamma: np.ndarray, y: np.ndarray) -> float:
        return residual_bound(self.matrix, gamma, self.rhs(y))


def fit_single(y, design: MatrixLike, omega: MatrixLike, tuning: float) -> ComponentFit:
    """
    Single-component fit argmin ||y - B gamma||_n^2 + tuning^2 gamma^T Omega gamma.

    Used for the oracle estimators, where the other true component has been
    subtracted from the response.
    """
    y = _vector(y)
    design_values, omega_values = _matrix(design), _matrix(omega)
    _check_design(y, design_values, omega_values, "B")
    system = RidgeSystem(design_values, omega_values, tuning)
    gamma = system.solve(y)
    fitted = design_values @ gamma
    objective = float(np.mean((y - fitted) ** 2) + tuning ** 2 * gamma @ omega_values @ gamma)
    return ComponentFit(
        gamma=gamma,
        tuning=float(tuning),
        objective=objective,
        fitted=fitted,
        residual=system.residual(gamma, y),
        residual_bound=system.residual_bound(gamma, y),
    )


def q2_objective(gamma_f: np.ndarray, gamma_g: np.ndarray, y, bf: MatrixLike, bg: MatrixLike,
                 omega_f: MatrixLike, omega_g: MatrixLike, cfg: FitConfig) -> float:
    """Criterion ||y - B_f gamma_f - B_g gamma_g||_n^2 + lambda^2 I^2 + mu^2 J^2."""
    y = _vector(y)
    residual = y - _matrix(bf) @ gamma_f - _matrix(bg) @ gamma_g
    return float(
        np.mean(residual ** 2)
        + cfg.lam ** 2 * gamma_f @ _matrix(omega_f) @ gamma_f
        + cfg.mu ** 2 * gamma_g @ _matrix(omega_g) @ gamma_g
    )


class AdditiveSystem:
    """
    Normal equations of the q=2 criterion for one dataset.

    B^T B / n and B^T Y / n with B = [B_f B_g] are computed once, so fits for
    many (lambda, mu) pairs only add the penalty blocks and refactor.
    """

    def __init__(self, y, bf: MatrixLike, bg: MatrixLike, omega_f: MatrixLike, omega_g: MatrixLike):
        self.y = _vector(y)
        self.bf, self.bg = _matrix(bf), _matrix(bg)
        self.omega_f, self.omega_g = _matrix(omega_f), _matrix(omega_g)
        _check_design(self.y, self.bf, self.omega_f, "f")
        _check_design(self.y, self.bg, self.omega_g, "g")
        design = np.hstack([self.bf, self.bg])
        n = len(self.y)
        self.gram = design.T @ design / n
        self.rhs = design.T @ self.y / n
        self.k_f = self.bf.shape[1]

    def matrix(self, cfg: FitConfig) -> np.ndarray:
        return self.gram + block_diag(cfg.lam ** 2 * self.omega_f, cfg.mu ** 2 * self.omega_g)

    def residual(self, gamma: np.ndarray, cfg: FitConfig) -> float:
        return residual_norm(self.matrix(cfg), gamma, self.rhs)

    def residual_bound(self, gamma: np.ndarray, cfg: FitConfig) -> float:
        return residual_bound(self.matrix(cfg), gamma, self.rhs)

    def fit(self, cfg: FitConfig) -> AdditiveFit:
        if cfg.q != 2:
            raise FitError(f"The spline/spline fit needs q=2, got q={cfg.q}")
        if cfg.lam <= 0 or cfg.mu <= 0:
            raise FitError(
                f"lambda and mu must both be positive for q=2 (lambda={cfg.lam}, mu={cfg.mu})"
            )
        matrix = self.matrix(cfg)
        gamma = ScaledCholesky(matrix).solve(self.rhs)
        gamma_f, gamma_g = gamma[:self.k_f], gamma[self.k_f:]
        residual = residual_norm(matrix, gamma, self.rhs)
        bound = residual_bound(matrix, gamma, self.rhs)
        objective = q2_objective(
            gamma_f, gamma_g, self.y, self.bf, self.bg, self.omega_f, self.omega_g, cfg
        )
        logger.debug(f"q=2 fit: n={len(self.y)}, objective={objective:.6g}, residual={residual:.3g}")
        return AdditiveFit(
            gamma_f=gamma_f,
            g_component=gamma_g,
            objective=objective,
            config=cfg,
            fitted_f=self.bf @ gamma_f,
            fitted_g=self.bg @ gamma_g,
            residual=residual,
            residual_bound=bound,
        )


def fit_additive_q2(y, bf: MatrixLike, bg: MatrixLike, omega_f: MatrixLike, omega_g: MatrixLike,
                    cfg: FitConfig) -> AdditiveFit:
    """
    Joint spline/spline fit.

    Solves [B^T B / n + diag(lambda^2 Omega_f, mu^2 Omega_g)] gamma = B^T Y / n
    with B = [B_f B_g] by an equilibrated Cholesky solve with iterative
    refinement. The L2 parts of the penalties make the system positive
    definite, so the solution is the unique minimizer. The fit records the
    normal-equation residual and the bound it is held to (`residual_bound`).

    Raises:
        FitError: On q != 2, a zero tuning parameter or mismatched dimensions
        FactorizationError: When the normal equations cannot be factored
    """
    return AdditiveSystem(y, bf, bg, omega_f, omega_g).fit(cfg)


def kkt_residual(fit: AdditiveFit, y, bf: MatrixLike, bg: MatrixLike, omega_f: MatrixLike,
                 omega_g: MatrixLike, cfg: FitConfig) -> float:
    """Sup-norm of (B^T B / n + P) gamma - B^T Y / n for a q=2 fit, in extended precision."""
    if fit.gamma_g is None:
        raise FitError("kkt_residual applies to q=2 fits only")
    gamma = np.concatenate([fit.gamma_f, fit.gamma_g])
    return AdditiveSystem(y, bf, bg, omega_f, omega_g).residual(gamma, cfg)


def tv_objective(values, weights, levels, tv_weight: float) -> float:
    """(1 / sum w) sum w_i (values_i - levels_i)^2 + tv_weight sum |levels_{i+1} - levels_i|."""
    values, weights, levels = (np.asarray(a, dtype=float) for a in (values, weights, levels))
    fidelity = np.sum(weights * (values - levels) ** 2) / np.sum(weights)
    return float(fidelity + tv_weight * np.sum(np.abs(np.diff(levels))))


def _fused_path(values: np.ndarray, weights: np.ndarray, theta: float) -> np.ndarray:
    """
    Exact minimizer of 1/2 sum w_i (v_i - l_i)^2 + theta sum |l_{i+1} - l_i|.

    Follows the solution path from theta = 0. Between fusion events a group G
    has level S_G / W_G + t (s_right - s_left) / W_G, with s the signs of the
    jumps to its neighbours; fused groups never split, so the path is a
    sequence of adjacent merges processed in order of their fusion time.
    """
    m = len(values)
    total_weight = weights.copy()
    total_sum = weights * values
    last = np.arange(m)
    prev_group = np.arange(-1, m - 1)
    next_group = np.arange(1, m + 1)
    next_group[-1] = -1
    sign_right = np.append(np.sign(np.diff(values)), 0.0)
    slope = np.zeros(m)
    version = np.zeros(m, dtype=np.int64)
    alive = np.ones(m, dtype=bool)

    def update_slope(g: int) -> None:
        left = sign_right[prev_group[g]] if prev_group[g] >= 0 else 0.0
        slope[g] = (sign_right[g] - left) / total_weight[g]

    def fusion_time(g: int, h: int, now: float) -> float:
        mean_g, mean_h = total_sum[g] / total_weight[g], total_sum[h] / total_weight[h]
        gap = (mean_h - mean_g) + now * (slope[h] - slope[g])
        rate = slope[h] - slope[g]
        if gap == 0.0:
            return now
        if gap * rate >= 0.0:
            return np.inf
        return max(now, (mean_g - mean_h) / rate)

    events = []

    def push(g: int, now: float) -> None:
        if g < 0 or next_group[g] < 0:
            return
        h = next_group[g]
        t = fusion_time(g, h, now)
        if t <= theta:
            heapq.heappush(events, (t, g, h, version[g], version[h]))

    for g in range(m):
        update_slope(g)
    for g in range(m - 1):
        push(g, 0.0)

    now = 0.0
    while events:
        t, g, h, version_g, version_h = heapq.heappop(events)
        if not (alive[g] and alive[h]) or next_group[g] != h:
            continue
        if version[g] != version_g or version[h] != version_h:
            continue
        now = max(now, t)
        total_weight[g] += total_weight[h]
        total_sum[g] += total_sum[h]
        last[g] = last[h]
        sign_right[g] = sign_right[h]
        next_group[g] = next_group[h]
        if next_group[h] >= 0:
            prev_group[next_group[h]] = g
        alive[h] = False
        version[g] += 1
        update_slope(g)
        push(prev_group[g], now)
        push(g, now)

    levels = np.empty(m)
    for g in np.flatnonzero(alive):
        levels[g:last[g] + 1] = total_sum[g] / total_weight[g] + theta * slope[g]
    return levels


def tv_denoise(values, weights, tv_weight: float) -> np.ndarray:
    """
    Exact weighted 1-D total-variation denoising.

    Minimizes (1/W) sum w_i (values_i - levels_i)^2 + tv_weight sum |levels_{i+1} - levels_i|
    with W = sum w_i.

    Args:
        values: Observations, in the order of their covariate
        weights: Positive weights (tie multiplicities in the additive fit)
        tv_weight: Nonnegative total-variation weight

    Returns:
        Levels, one per value
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape or values.ndim != 1:
        raise ValueError("values and weights must be vectors of equal length")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    if tv_weight < 0:
        raise ValueError(f"tv_weight must be nonnegative, got {tv_weight}")
    if len(values) <= 1 or tv_weight == 0:
        return values.copy()
    return _fused_path(values, weights, 0.5 * tv_weight * float(np.sum(weights)))


def fit_additive_tv(y, bf: MatrixLike, omega_f: MatrixLike, z, cfg: FitConfig,
                    initial_levels: Optional[np.ndarray] = None) -> AdditiveFit:
    """
    Joint spline/total-variation fit by block-coordinate descent.

    Alternates an exact ridge step for gamma_f given g and an exact weighted
    TV step for the levels of g on the sorted distinct z values given f. Each
    step minimizes the criterion over its block, so the objective sequence is
    nonincreasing. Stops when the relative decrease falls below
    cfg.rel_tolerance; hitting cfg.max_iterations leaves converged=False.

    An iteration whose evaluated objective exceeds the previous one has hit
    floating-point resolution: it is discarded, the previous iterate is
    returned with stalled=True and converged=False.

    Args:
        y: Responses
        bf: Design matrix of the f basis
        omega_f: Penalty matrix of the f basis
        z: Covariate of the TV component
        cfg: Fit configuration with q=1
        initial_levels: Optional starting levels, one per distinct z
    """
    if cfg.q != 1:
        raise FitError(f"fit_additive_tv needs q=1, got q={cfg.q}")
    if cfg.lam <= 0:
        raise FitError(f"lambda must be positive, got {cfg.lam}")
    y = _vector(y)
    bf_values, omega_values = _matrix(bf), _matrix(omega_f)
    _check_design(y, bf_values, omega_values, "f")
    z = np.asarray(z, dtype=float)
    if z.shape != y.shape:
        raise FitError(f"z has shape {z.shape}, expected {y.shape}")

    breakpoints, inverse, counts = np.unique(z, return_inverse=True, return_counts=True)
    weights = counts.astype(float)
    if initial_levels is None:
        levels = np.zeros(len(breakpoints))
    else:
        levels = np.asarray(initial_levels, dtype=float)
        if levels.shape != breakpoints.shape:
            raise FitError(f"initial_levels must have {len(breakpoints)} entries")

    system = RidgeSystem(bf_values, omega_values, cfg.lam)
    penalty_factor = factorize(omega_values)
    tv_weight = cfg.mu ** 2
    fitted_g = levels[inverse]
    history = []
    previous = np.inf
    converged = stalled = False
    gamma_f = np.zeros(bf_values.shape[1])
    fitted_f = np.zeros_like(y)

    for _ in range(cfg.max_iterations):
        candidate_f = system.solve(y - fitted_g)
        candidate_fitted_f = bf_values @ candidate_f
        partial = y - candidate_fitted_f
        means = np.bincount(inverse, weights=partial, minlength=len(breakpoints)) / weights
        candidate_levels = tv_denoise(means, weights, tv_weight)
        candidate_fitted_g = candidate_levels[inverse]

        objective = float(
            np.mean((partial - candidate_fitted_g) ** 2)
            + cfg.lam ** 2 * penalty_factor.norm_squared(candidate_f)
            + tv_weight * np.sum(np.abs(np.diff(candidate_levels)))
        )
        if objective > previous:
            stalled = True
            break
        gamma_f, fitted_f = candidate_f, candidate_fitted_f
        levels, fitted_g = candidate_levels, candidate_fitted_g
        history.append(objective)
        if np.isfinite(previous) and previous - objective <= cfg.rel_tolerance * previous:
            converged = True
            break
        previous = objective

    iterations = len(history)
    if stalled:
        logger.warning(
            f"q=1 alternation stalled after {iterations} iterations: the objective rose by "
            f"{objective - previous:.3g}, keeping the previous iterate"
        )
    elif not converged:
        logger.warning(
            f"q=1 alternation stopped after {iterations} iterations without meeting "
            f"rel_tolerance={cfg.rel_tolerance:g}"
        )

    return AdditiveFit(
        gamma_f=gamma_f,
        g_component=StepFunction(breakpoints=breakpoints, levels=levels, weights=counts),
        objective=history[-1],
        config=cfg,
        fitted_f=fitted_f,
        fitted_g=fitted_g,
        iterations=iterations,
        residual=system.residual(gamma_f, y - fitted_g),
        residual_bound=system.residual_bound(gamma_f, y - fitted_g),
        converged=converged,
        stalled=stalled,
        objective_history=history,
    )


def predict(fit: AdditiveFit, basis_f: SplineBasis, x, z,
            basis_g: Optional[SplineBasis] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Evaluate (f_hat(x), g_hat(z)).

    q=2 fits need `basis_g`; q=1 fits use the left-nearest step level, clamped
    outside the breakpoint range.
    """
    f_hat = design_matrix(basis_f, np.atleast_1d(x)).values @ fit.gamma_f
    if fit.step_function is not None:
        g_hat = fit.step_function(np.atleast_1d(z))
    else:
        if basis_g is None:
            raise FitError("predict needs basis_g for a q=2 fit")
        g_hat = design_matrix(basis_g, np.atleast_1d(z)).values @ fit.gamma_g
    if np.ndim(x) == 0 and np.ndim(z) == 0:
        return float(f_hat[0]), float(g_hat[0])
    return f_hat, g_hat
