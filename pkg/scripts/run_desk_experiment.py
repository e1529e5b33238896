#!/usr/bin/env python3
"""
Run the desk-scale experiment for all four scenarios and print the fitted slopes.
"""
import argparse
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.addspline.config.settings import (
    DEFAULT_JOBS,
    DEFAULT_SEED,
    DESK_N_GRID,
    DESK_REPLICATES,
    RESULTS_DIR,
)
from src.addspline.datagen import study_scenarios
from src.addspline.services.experiment_service import ExperimentService
from src.addspline.utils.logger import logger


def main():
    parser = argparse.ArgumentParser(description="Desk-scale convergence-rate experiment")
    parser.add_argument("--output", type=Path, default=RESULTS_DIR / "desk", help="Output directory")
    parser.add_argument("--jobs", type=int, default=DEFAULT_JOBS, help="Worker processes")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Seed base")
    parser.add_argument("--q", type=int, choices=(1, 2), default=2, help="Penalty type for g")
    args = parser.parse_args()

    service = ExperimentService(args.output, jobs=args.jobs)
    try:
        summaries = service.run_all_scenarios(
            study_scenarios(), DESK_N_GRID, DESK_REPLICATES, args.seed, q=args.q
        )
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        sys.exit(1)

    for summary in summaries:
        print(f"\n{summary['scenario']} ({summary['duration_seconds']:.0f}s)")
        for slope in summary["slopes"]:
            print(f"  {slope['estimator']:<9} slope {slope['slope']:+.3f}  theory {slope['theoretical_slope']:+.3f}")


if __name__ == "__main__":
    main()
