"""
Exception hierarchy for addspline.
"""
from typing import Optional


class AddsplineError(Exception):
    """Base class for every error raised by the package."""
    pass


class BasisError(AddsplineError, ValueError):
    """Invalid spline basis request (too few functions, degenerate domain)."""
    pass


class PenaltyError(AddsplineError):
    """Penalty matrix assembly or use failed."""
    pass


class FactorizationError(PenaltyError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, message: str, pivot: Optional[int] = None):
        super().__init__(message)
        self.pivot = pivot


class FitError(AddsplineError, ValueError):
    """Penalized least-squares problem is ill-posed or could not be solved."""
    pass


class DatasetError(AddsplineError, ValueError):
    """Malformed dataset file or inconsistent dataset arrays."""
    pass


class ExperimentError(AddsplineError):
    """A simulation cell failed; carries the cell that produced the failure."""

    def __init__(self, message: str, n: Optional[int] = None, seed: Optional[int] = None):
        cell = f" [cell n={n}, seed={seed}]" if n is not None else ""
        super().__init__(f"{message}{cell}")
        self.n = n
        self.seed = seed
