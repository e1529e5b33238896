"""
addspline: penalized least squares for the additive model Y = f(X) + g(Z) + noise.
"""

from .exceptions import AddsplineError
from .spline_basis import design_matrix, make_basis
from .penalties import penalty_matrix
from .solver import fit_additive_q2, fit_additive_tv, predict, tv_denoise

__all__ = [
    "AddsplineError",
    "design_matrix",
    "make_basis",
    "penalty_matrix",
    "fit_additive_q2",
    "fit_additive_tv",
    "predict",
    "tv_denoise",
]
