"""
Unit tests for scenario calibration and dataset simulation.
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from src.addspline.datagen import (
    build_scenario,
    cell_seed,
    centering_constants,
    design_expectation,
    signal_variance,
    simulate,
    solve_mixing_coefficient,
    study_scenarios,
)
from src.addspline.truths import get_truth, truth_derivative


@pytest.fixture(scope="module")
def scenario():
    return build_scenario(0.8, 7.0)


class TestMixingCoefficient:
    """Test suite for solve_mixing_coefficient."""

    @pytest.mark.parametrize("rho, expected", [(0.8, 0.571), (0.2, 0.169)])
    def test_known_values(self, rho, expected):
        assert abs(solve_mixing_coefficient(rho) - expected) < 1e-3

    @pytest.mark.parametrize("rho", [0.05, 0.2, 0.5, 0.8, 0.95])
    def test_correlation_is_reproduced(self, rho):
        a = solve_mixing_coefficient(rho)
        assert a / math.hypot(a, 1 - a) == pytest.approx(rho, abs=1e-12)

    def test_independent_design(self):
        assert solve_mixing_coefficient(0.0) == 0.0

    @pytest.mark.parametrize("rho", [-0.1, 1.0, 1.5])
    def test_out_of_range(self, rho):
        with pytest.raises(ValueError):
            solve_mixing_coefficient(rho)


class TestCalibration:
    """Test suite for centering constants and noise level."""

    def test_sine_center_closed_form(self, scenario):
        expected = -10 * (math.cos(0.2 * math.pi) - math.cos(1.9 + 0.2 * math.pi)) / 1.9
        assert scenario.center_f == pytest.approx(expected, abs=1e-10)

    def test_bump_center_for_independent_design(self):
        _, center_g = centering_constants(0.0)
        root = math.sqrt(500)
        expected = 3 * math.sqrt(math.pi / 500) / 2 * (erf(0.9 * root) + erf(0.1 * root))
        assert center_g == pytest.approx(expected, abs=1e-10)

    def test_truths_are_centered(self, scenario):
        mean_f = design_expectation(lambda x, z: scenario.f0(x), scenario.a, 1024)
        mean_g = design_expectation(lambda x, z: scenario.g0(z), scenario.a, 1024)
        assert abs(mean_f) < 1e-9
        assert abs(mean_g) < 1e-9

    def test_independent_design_variance_adds(self):
        independent = build_scenario(0.0, 7.0)
        var_f = quad(lambda x: float(independent.f0(x)) ** 2, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)[0]
        var_g = quad(lambda z: float(independent.g0(z)) ** 2, 0.0, 1.0, points=[0.1], limit=200,
                     epsabs=1e-13, epsrel=1e-13)[0]
        assert independent.signal_var == pytest.approx(var_f + var_g, rel=1e-8)
        assert signal_variance(independent) == independent.signal_var

    def test_sigma_matches_snr(self, scenario):
        assert scenario.sigma ** 2 == pytest.approx(scenario.signal_var / scenario.snr, rel=1e-12)
        assert signal_variance(scenario) == pytest.approx(scenario.signal_var, rel=1e-12)

    def test_quadrature_is_refined(self, scenario):
        g = get_truth("bump")
        coarse = design_expectation(lambda x, z: g(z), scenario.a, 256)
        fine = design_expectation(lambda x, z: g(z), scenario.a, 512)
        assert abs(coarse - fine) < 1e-9

    def test_noiseless_scenario(self):
        noiseless = build_scenario(0.8, math.inf)
        dataset = simulate(noiseless, 200, seed=1)
        assert noiseless.sigma == 0.0
        assert np.array_equal(dataset.y, noiseless.f0(dataset.x) + noiseless.g0(dataset.z))
        assert noiseless.to_dict()["snr"] is None

    def test_nonpositive_snr_rejected(self):
        with pytest.raises(ValueError):
            build_scenario(0.8, 0.0)

    def test_study_scenarios(self):
        names = [s.name for s in study_scenarios()]
        assert names == [
            "rho0.2_snr0.5_sine_bump",
            "rho0.2_snr7_sine_bump",
            "rho0.8_snr0.5_sine_bump",
            "rho0.8_snr7_sine_bump",
        ]


class TestSimulate:
    """Test suite for simulate."""

    def test_reproducible(self, scenario):
        first = simulate(scenario, 500, seed=42)
        second = simulate(scenario, 500, seed=42)
        assert np.array_equal(first.x, second.x)
        assert np.array_equal(first.y, second.y)
        assert not np.array_equal(first.y, simulate(scenario, 500, seed=43).y)

    def test_design_law(self, scenario):
        dataset = simulate(scenario, 20_000, seed=3)
        assert dataset.n == 20_000
        assert np.all((dataset.x > 0) & (dataset.x < 1))
        assert np.all((dataset.z > 0) & (dataset.z < 1))
        assert np.corrcoef(dataset.x, dataset.z)[0, 1] == pytest.approx(0.8, abs=0.02)

    def test_empirical_snr(self, scenario):
        dataset = simulate(scenario, 1_000_000, seed=2016)
        signal = scenario.f0(dataset.x) + scenario.g0(dataset.z)
        noise = dataset.y - signal
        assert np.var(signal) / np.var(noise) == pytest.approx(scenario.snr, rel=0.02)

    def test_metadata(self, scenario):
        dataset = simulate(scenario, 100, seed=5)
        assert dataset.seed == 5
        assert dataset.scenario_ref == scenario.name
        assert dataset.to_dict()["scenario"]["a"] == scenario.a
        with pytest.raises(ValueError):
            dataset.x[0] = 0.5

    def test_too_small(self, scenario):
        with pytest.raises(ValueError):
            simulate(scenario, 1, seed=0)


class TestCellSeed:
    """Test suite for per-cell seeds."""

    def test_deterministic_and_distinct(self):
        seeds = {cell_seed(7, n, r) for n in (250, 500) for r in range(50)}
        assert len(seeds) == 100
        assert cell_seed(7, 250, 3) == cell_seed(7, 250, 3)
        assert 0 <= cell_seed(7, 250, 3) < 2 ** 64

    def test_negative_base_rejected(self):
        with pytest.raises(ValueError):
            cell_seed(-1, 100, 0)


class TestTruths:
    """Test suite for the truth-shape registry."""

    @pytest.mark.parametrize("name", ["sine", "bump", "quadratic"])
    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_derivatives_match_finite_differences(self, name, order):
        t = np.linspace(0.05, 0.95, 101)
        h = 1e-5
        approx = (truth_derivative(name, t + h, order - 1) - truth_derivative(name, t - h, order - 1)) / (2 * h)
        exact = truth_derivative(name, t, order)
        assert np.max(np.abs(approx - exact)) <= 1e-4 * max(np.max(np.abs(exact)), 1.0)

    def test_unknown_shape(self):
        with pytest.raises(ValueError):
            get_truth("wiggle")
