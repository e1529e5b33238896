"""
Service layer for running simulation experiments.
"""
from src.addspline.services.experiment_service import ExperimentService

__all__ = ["ExperimentService"]
