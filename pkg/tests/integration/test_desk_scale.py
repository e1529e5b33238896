"""
Desk-scale reproduction of the convergence rates.

Runs the rho=0.8, SNR=0.5 scenario over n in {250, ..., 4000} with 20
replicates per size. Takes minutes even with a full work pool.
"""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from src.addspline.config.settings import DEFAULT_JOBS, DEFAULT_SEED, DESK_N_GRID, DESK_REPLICATES
from src.addspline.datagen import build_scenario
from src.addspline.experiment import default_rule, loglog_slope, run_grid, tune_constants
from src.addspline.services.experiment_service import ExperimentService

pytestmark = [pytest.mark.integration, pytest.mark.slow]


@pytest.fixture(scope="module")
def scenario():
    return build_scenario(0.8, 0.5)


@pytest.fixture(scope="module")
def curves(scenario):
    return run_grid(scenario, DESK_N_GRID, DESK_REPLICATES, default_rule(2), DEFAULT_SEED, jobs=DEFAULT_JOBS)


class TestDeskScaleRates:
    """Rates and orderings at desk scale."""

    def test_slopes_in_band(self, curves):
        f_slope = loglog_slope(curves["f_joint"]).slope
        g_slope = loglog_slope(curves["g_joint"]).slope
        assert -1.15 <= f_slope <= -0.55
        assert -1.05 <= g_slope <= -0.50
        assert f_slope <= g_slope + 0.05

    def test_joint_close_to_oracle(self, curves):
        for component in ("f", "g"):
            joint = curves[f"{component}_joint"].at(2000).mse_mean
            oracle = curves[f"{component}_oracle"].at(2000).mse_mean
            assert 0.5 <= joint / oracle <= 2.0

    def test_f_is_easier_than_g(self, curves):
        assert curves["f_joint"].at(4000).mse_mean < curves["g_joint"].at(4000).mse_mean

    def test_reruns_are_byte_identical(self, scenario, tmp_path):
        outputs = []
        for name in ("first", "second"):
            service = ExperimentService(tmp_path / name, jobs=DEFAULT_JOBS)
            service.run_experiment(scenario, DESK_N_GRID, DESK_REPLICATES, DEFAULT_SEED)
            outputs.append([
                (tmp_path / name / f"experiment{suffix}").read_bytes()
                for suffix in ("_mse.csv", "_slopes.csv", ".gp")
            ])
        assert outputs[0] == outputs[1]


def test_tuned_constants_are_near_default(scenario):
    rule = default_rule(2)
    result = tune_constants(scenario, 1000, 10, [10.0, 12.0, 14.0, 16.0, 18.0], [0.1, 0.2, 0.3, 0.4, 0.5],
                            DEFAULT_SEED, rule=rule, jobs=DEFAULT_JOBS)
    assert result.objective_at(14.0, 0.3) <= 1.1 * result.objective
