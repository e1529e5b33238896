"""
Synthetic scenarios: correlated uniform design, centered truths, SNR-calibrated noise.

X, U ~ U(0,1) independent, Z = a X + (1 - a) U, Y = f0(X) + g0(Z) + sigma eps.
Expectations under this law are computed by tensor composite Gauss-Legendre
quadrature, refined until successive refinements agree.
"""
import math
from typing import Callable, List, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import ndtri

from src.addspline.config.settings import STUDY_RHOS, STUDY_SNRS
from src.addspline.models.scenario import Dataset, Scenario
from src.addspline.truths import get_truth
from src.addspline.utils.logger import logger

NODES_PER_PANEL = 16
QUADRATURE_START = 64
QUADRATURE_MAX = 2048
QUADRATURE_TOLERANCE = 1e-10

_UNIT = 2.0 ** 53


def solve_mixing_coefficient(rho: float) -> float:
    """
    Mixing coefficient a in [0, 1) with corr(X, aX + (1-a)U) = a / sqrt(a^2 + (1-a)^2) = rho.

    Raises:
        ValueError: If rho is outside [0, 1)
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"Target correlation must lie in [0, 1), got {rho}")
    if rho == 0.0:
        return 0.0
    return float(brentq(lambda a: a / math.hypot(a, 1.0 - a) - rho, 0.0, 1.0, xtol=1e-15))


def panel_rule(nodes_per_axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [0, 1] with NODES_PER_PANEL nodes per panel."""
    panels = max(nodes_per_axis // NODES_PER_PANEL, 1)
    nodes, weights = leggauss(NODES_PER_PANEL)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    points = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    return points, (half[:, None] * weights[None, :]).ravel()


def design_expectation(func: Callable[[np.ndarray, np.ndarray], np.ndarray], a: float,
                       nodes_per_axis: int) -> float:
    """E[func(X, aX + (1-a)U)] on a fixed tensor rule."""
    points, weights = panel_rule(nodes_per_axis)
    x = points[:, None]
    z = a * x + (1.0 - a) * points[None, :]
    values = np.broadcast_to(func(x, z), z.shape)
    return float(weights @ values @ weights)


def refined_expectation(func: Callable[[np.ndarray, np.ndarray], np.ndarray], a: float,
                        tolerance: float = QUADRATURE_TOLERANCE) -> float:
    """Double the tensor rule until two successive values differ by less than `tolerance`."""
    nodes = QUADRATURE_START
    previous = design_expectation(func, a, nodes)
    while nodes < QUADRATURE_MAX:
        nodes *= 2
        current = design_expectation(func, a, nodes)
        if abs(current - previous) < tolerance:
            return current
        previous = current
    logger.warning(
        f"Quadrature did not reach tolerance {tolerance:g} with {QUADRATURE_MAX} nodes per axis (a={a})"
    )
    return previous


def centering_constants(a: float, f_shape: str = "sine", g_shape: str = "bump") -> Tuple[float, float]:
    """
    Expectations of the raw truth shapes: (E[f_raw(X)], E[g_raw(Z)]).

    Subtracting them gives the mean-zero truths f0 and g0.
    """
    if not 0.0 <= a < 1.0:
        raise ValueError(f"Mixing coefficient must lie in [0, 1), got {a}")
    f_raw, g_raw = get_truth(f_shape), get_truth(g_shape)
    center_f = refined_expectation(lambda x, z: f_raw(x), a)
    center_g = refined_expectation(lambda x, z: g_raw(z), a)
    return center_f, center_g


def _signal_variance(a: float, f_shape: str, g_shape: str, center_f: float, center_g: float) -> float:
    f_raw, g_raw = get_truth(f_shape), get_truth(g_shape)

    def signal(x, z):
        return f_raw(x) - center_f + g_raw(z) - center_g

    mean = refined_expectation(signal, a)
    second_moment = refined_expectation(lambda x, z: signal(x, z) ** 2, a)
    return max(second_moment - mean ** 2, 0.0)


def signal_variance(scenario: Scenario) -> float:
    """Var(f0(X) + g0(Z)) under the scenario's design law."""
    return _signal_variance(
        scenario.a, scenario.f_shape, scenario.g_shape, scenario.center_f, scenario.center_g
    )


def build_scenario(rho: float, snr: float, f_shape: str = "sine", g_shape: str = "bump") -> Scenario:
    """
    Calibrate a scenario: mixing coefficient from rho, centering constants and
    sigma^2 = Var(f0(X) + g0(Z)) / snr. snr = inf gives noiseless data.
    """
    if not snr > 0:
        raise ValueError(f"SNR must be positive, got {snr}")
    a = solve_mixing_coefficient(rho)
    center_f, center_g = centering_constants(a, f_shape, g_shape)
    variance = _signal_variance(a, f_shape, g_shape, center_f, center_g)
    sigma = 0.0 if math.isinf(snr) else math.sqrt(variance / snr)
    scenario = Scenario(
        rho=rho, a=a, snr=snr, sigma=sigma, center_f=center_f, center_g=center_g,
        signal_var=variance, f_shape=f_shape, g_shape=g_shape,
    )
    logger.info(f"Scenario {scenario.name}: a={a:.6f}, signal variance={variance:.6g}, sigma={sigma:.6g}")
    return scenario


def study_scenarios() -> List[Scenario]:
    """The four design scenarios rho in {0.2, 0.8} x SNR in {0.5, 7}."""
    return [build_scenario(rho, snr) for rho in STUDY_RHOS for snr in STUDY_SNRS]


def cell_seed(seed_base: int, n: int, replicate: int) -> int:
    """64-bit seed of replicate `replicate` at sample size n, hashed from (base, n, replicate)."""
    if seed_base < 0:
        raise ValueError(f"Seed base must be nonnegative, got {seed_base}")
    state = np.random.SeedSequence([seed_base, n, replicate]).generate_state(1, np.uint64)
    return int(state[0])


def _open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniforms on the open interval (0, 1) from 53-bit integers."""
    return (rng.integers(0, 2 ** 53, size=size, dtype=np.int64) + 0.5) / _UNIT


def simulate(scenario: Scenario, n: int, seed: int) -> Dataset:
    """
    Draw a dataset of size n.

    The stream comes from a Philox counter-based generator keyed by `seed`:
    n uniforms for X, n for U, n for the noise, which is the normal quantile of
    its uniforms. Identical (scenario, n, seed) give identical datasets.
    """
    if n < 2:
        raise ValueError(f"Sample size must be at least 2, got {n}")
    rng = np.random.Generator(np.random.Philox(seed))
    x = _open_uniform(rng, n)
    u = _open_uniform(rng, n)
    noise = ndtri(_open_uniform(rng, n))
    z = scenario.a * x + (1.0 - scenario.a) * u
    y = scenario.f0(x) + scenario.g0(z) + scenario.sigma * noise
    return Dataset(
        x=x, z=z, y=y, seed=seed, scenario_ref=scenario.name,
        metadata={"scenario": scenario.to_dict()},
    )
