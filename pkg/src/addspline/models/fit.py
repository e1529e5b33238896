"""
Fit configuration and fitted-model data models.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np

from src.addspline.config.settings import TV_MAX_ITERATIONS, TV_REL_TOLERANCE


@dataclass(frozen=True)
class FitConfig:
    """Tuning parameters of the penalized criterion."""
    lam: float
    mu: float
    q: int = 2
    max_iterations: int = TV_MAX_ITERATIONS
    rel_tolerance: float = TV_REL_TOLERANCE

    def __post_init__(self):
        if self.lam < 0 or self.mu < 0:
            raise ValueError(f"Tuning parameters must be nonnegative (lam={self.lam}, mu={self.mu})")
        if self.q not in (1, 2):
            raise ValueError(f"Penalty exponent q must be 1 or 2, got {self.q}")
        if self.rel_tolerance <= 0:
            raise ValueError("rel_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    def to_dict(self) -> Dict[str, Any]:
        """Convert config to dictionary."""
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "q": self.q,
            "max_iterations": self.max_iterations,
            "rel_tolerance": self.rel_tolerance,
        }


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Piecewise-constant function with jumps only at the breakpoints."""
    breakpoints: np.ndarray
    levels: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if not (len(self.breakpoints) == len(self.levels) == len(self.weights)):
            raise ValueError("breakpoints, levels and weights must have equal length")
        if len(self.breakpoints) > 1 and np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")

    def __call__(self, z: Union[float, np.ndarray]) -> np.ndarray:
        """Left-nearest level; clamped to the first/last level outside the range."""
        index = np.searchsorted(self.breakpoints, np.asarray(z, dtype=float), side="right") - 1
        return self.levels[np.clip(index, 0, len(self.levels) - 1)]

    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(self.levels))))

    def to_dict(self) -> Dict[str, Any]:
        """Convert step function to dictionary."""
        return {
            "breakpoints": self.breakpoints.tolist(),
            "levels": self.levels.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass(eq=False)
class ComponentFit:
    """Single-component penalized fit (oracle estimators)."""
    gamma: np.ndarray
    tuning: float
    objective: float
    fitted: np.ndarray
    residual: float
    residual_bound: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Convert fit to dictionary."""
        return {
            "gamma": self.gamma.tolist(),
            "tuning": self.tuning,
            "objective": self.objective,
            "residual": self.residual,
            "residual_bound": self.residual_bound,
        }


@dataclass(eq=False)
class AdditiveFit:
    """Two-component fit f(x) + g(z)."""
    gamma_f: np.ndarray
    g_component: Union[np.ndarray, StepFunction]
    objective: float
    config: FitConfig
    fitted_f: np.ndarray
    fitted_g: np.ndarray
    iterations: int = 1
    residual: float = 0.0
    residual_bound: float = 0.0
    converged: bool = True
    stalled: bool = False
    objective_history: List[float] = field(default_factory=list)

    @property
    def q(self) -> int:
        return self.config.q

    @property
    def gamma_g(self) -> Optional[np.ndarray]:
        return None if isinstance(self.g_component, StepFunction) else self.g_component

    @property
    def step_function(self) -> Optional[StepFunction]:
        return self.g_component if isinstance(self.g_component, StepFunction) else None

    def to_dict(self) -> Dict[str, Any]:
        """Convert fit to dictionary."""
        if self.step_function is not None:
            g_component: Dict[str, Any] = {"step_function": self.step_function.to_dict()}
        else:
            g_component = {"gamma_g": self.g_component.tolist()}
        return {
            "config": self.config.to_dict(),
            "gamma_f": self.gamma_f.tolist(),
            **g_component,
            "objective": self.objective,
            "diagnostics": {
                "iterations": self.iterations,
                "residual": self.residual,
                "residual_bound": self.residual_bound,
                "converged": self.converged,
                "stalled": self.stalled,
                "objective_history": list(self.objective_history),
            },
        }
