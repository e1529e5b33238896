"""
Experiment data models: tuning rules, MSE curves, slope fits.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

ESTIMATORS = ("f_joint", "g_joint", "f_oracle", "g_oracle")


@dataclass(frozen=True)
class TuningRule:
    """lambda = c_lambda * n^lambda_exponent, mu = c_mu * n^mu_exponent."""
    c_lambda: float
    lambda_exponent: float
    c_mu: float
    mu_exponent: float

    def __post_init__(self):
        if self.c_lambda <= 0 or self.c_mu <= 0:
            raise ValueError("Tuning constants must be positive")
        if self.lambda_exponent >= 0 or self.mu_exponent >= 0:
            raise ValueError("Tuning exponents must be negative")

    def lam(self, n: int) -> float:
        return self.c_lambda * n ** self.lambda_exponent

    def mu(self, n: int) -> float:
        return self.c_mu * n ** self.mu_exponent

    def with_constants(self, c_lambda: float, c_mu: float) -> "TuningRule":
        return TuningRule(c_lambda, self.lambda_exponent, c_mu, self.mu_exponent)

    def to_dict(self) -> Dict[str, Any]:
        """Convert rule to dictionary."""
        return {
            "c_lambda": self.c_lambda,
            "lambda_exponent": self.lambda_exponent,
            "c_mu": self.c_mu,
            "mu_exponent": self.mu_exponent,
        }


@dataclass(frozen=True)
class MsePoint:
    """Mean MSE of one estimator at one sample size."""
    n: int
    mse_mean: float
    mse_stderr: float
    replicates: int


@dataclass
class MseCurve:
    """Per-estimator MSE as a function of n."""
    estimator_id: str
    points: List[MsePoint] = field(default_factory=list)

    def __post_init__(self):
        sizes = [p.n for p in self.points]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"Curve '{self.estimator_id}' must have strictly increasing n")
        for p in self.points:
            if p.replicates < 1 or p.mse_stderr < 0:
                raise ValueError(f"Invalid point {p} in curve '{self.estimator_id}'")

    @property
    def sizes(self) -> List[int]:
        return [p.n for p in self.points]

    @property
    def means(self) -> List[float]:
        return [p.mse_mean for p in self.points]

    def at(self, n: int) -> MsePoint:
        for p in self.points:
            if p.n == n:
                return p
        raise KeyError(f"No point at n={n} in curve '{self.estimator_id}'")


@dataclass(frozen=True)
class SlopeFit:
    """OLS fit of log(mse) on log(n) for n >= n_min."""
    estimator_id: str
    slope: float
    intercept: float
    n_min: int
    theoretical_slope: float
    points_used: int

    def to_dict(self) -> Dict[str, Any]:
        """Convert slope fit to dictionary."""
        return {
            "estimator": self.estimator_id,
            "slope": self.slope,
            "intercept": self.intercept,
            "theoretical_slope": self.theoretical_slope,
            "n_min": self.n_min,
        }


@dataclass(frozen=True)
class ReplicateResult:
    """Four component MSEs from one simulated dataset."""
    n: int
    replicate: int
    seed: int
    mse: Tuple[float, float, float, float]

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(ESTIMATORS, self.mse))


@dataclass(frozen=True)
class CellResult:
    """Replicate-averaged MSEs of the four estimators at one n."""
    n: int
    replicates: int
    means: Dict[str, float]
    stderrs: Dict[str, float]

    def point(self, estimator_id: str) -> MsePoint:
        return MsePoint(self.n, self.means[estimator_id], self.stderrs[estimator_id], self.replicates)


@dataclass
class TuningResult:
    """Selected tuning constants and the full objective table."""
    c_lambda: float
    c_mu: float
    objective: float
    table: Dict[Tuple[float, float], float] = field(default_factory=dict)

    def objective_at(self, c_lambda: float, c_mu: float) -> float:
        return self.table[(c_lambda, c_mu)]

    def to_dict(self) -> Dict[str, Any]:
        """Convert tuning result to dictionary."""
        return {
            "c_lambda": self.c_lambda,
            "c_mu": self.c_mu,
            "objective": self.objective,
            "table": [
                {"c_lambda": cl, "c_mu": cm, "objective": value}
                for (cl, cm), value in sorted(self.table.items())
            ],
        }
