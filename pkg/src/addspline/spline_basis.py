"""
Clamped order-6 B-spline bases with sample-quantile knots.

Evaluation goes through scipy's BSpline with identity coefficients, which runs
the de Boor recursion and returns every basis function at once.
"""
import math
from typing import Optional, Sequence, Union

import numpy as np
from scipy.interpolate import BSpline

from src.addspline.config.settings import SPLINE_ORDER
from src.addspline.exceptions import BasisError
from src.addspline.models.basis import DesignMatrix, KnotVector, SplineBasis
from src.addspline.utils.logger import logger


def basis_dimension(n: int, order: int = SPLINE_ORDER) -> int:
    """
    Number of basis functions for a sample of size n: K = ceil(3 sqrt(n) / 5).

    Args:
        n: Sample size
        order: Spline order (the basis needs at least `order` functions)

    Returns:
        Basis dimension K

    Raises:
        BasisError: If n < 2 or the rule gives fewer than `order` functions
    """
    if n < 2:
        raise BasisError(f"Sample size must be at least 2, got {n}")
    dimension = math.ceil(3 * math.sqrt(n) / 5)
    if dimension < order:
        raise BasisError(
            f"n={n} gives K={dimension} basis functions; order {order} needs at least {order}"
        )
    return dimension


def build_knots(sorted_sample: Sequence[float], dimension: int, order: int = SPLINE_ORDER) -> KnotVector:
    """
    Clamped knot vector with interior knots at evenly spaced ranks.

    The first and last `order` knots sit at the sample minimum and maximum.
    Interior knot j (j = 1..K-order) is the order statistic of rank
    round(1 + j (n-2) / (K-order+1)). Candidates that tie with the previous
    knot or reach the maximum are moved to the midpoint between the previous
    knot and the next distinct sample value.

    Args:
        sorted_sample: Nondecreasing sample values
        dimension: Basis dimension K
        order: Spline order

    Returns:
        KnotVector of length K + order
    """
    sample = np.asarray(sorted_sample, dtype=float)
    if sample.ndim != 1 or len(sample) < 2:
        raise BasisError("Knot placement needs a one-dimensional sample with at least 2 values")
    if np.any(np.diff(sample) < 0):
        raise BasisError("Sample must be sorted in nondecreasing order")
    if dimension < order:
        raise BasisError(f"Basis dimension {dimension} is smaller than the order {order}")

    lower, upper = sample[0], sample[-1]
    if lower == upper:
        raise BasisError(f"All sample values equal {lower}; the knot range has zero width")

    n = len(sample)
    n_interior = dimension - order
    distinct = np.unique(sample)
    interior = np.empty(n_interior)
    previous = lower
    for j in range(1, n_interior + 1):
        rank = math.floor(1 + j * (n - 2) / (n_interior + 1) + 0.5)
        candidate = sample[min(max(rank, 1), n) - 1]
        if candidate <= previous or candidate >= upper:
            following = distinct[np.searchsorted(distinct, previous, side="right")]
            nudged = 0.5 * (previous + following)
            logger.warning(
                f"Interior knot {j} at {candidate!r} collides with a neighbour; moved to {nudged!r}"
            )
            candidate = nudged
        interior[j - 1] = candidate
        previous = candidate

    knots = np.concatenate([np.full(order, lower), interior, np.full(order, upper)])
    return KnotVector(knots=knots, order=order)


def make_basis(sample: Sequence[float], dimension: Optional[int] = None,
               order: int = SPLINE_ORDER) -> SplineBasis:
    """Build the basis for an unsorted sample, choosing K by `basis_dimension` if not given."""
    sorted_sample = np.sort(np.asarray(sample, dtype=float))
    if dimension is None:
        dimension = basis_dimension(len(sorted_sample), order)
    basis = SplineBasis(build_knots(sorted_sample, dimension, order))
    logger.debug(
        f"Built order-{order} basis {basis.identifier} with K={basis.dimension} "
        f"on [{basis.knot_vector.lower:.6g}, {basis.knot_vector.upper:.6g}]"
    )
    return basis


def _check_derivative(basis: SplineBasis, derivative_order: int) -> None:
    if not 0 <= derivative_order <= basis.degree:
        raise BasisError(
            f"Derivative order must be in 0..{basis.degree}, got {derivative_order}"
        )


def basis_spline(basis: SplineBasis) -> BSpline:
    """Vector-valued spline whose components are the basis functions."""
    return BSpline(basis.knots, np.eye(basis.dimension), basis.degree, extrapolate=True)


def clamp(basis: SplineBasis, x: Union[float, np.ndarray]) -> np.ndarray:
    """Clamp abscissae to the knot range."""
    return np.clip(np.asarray(x, dtype=float), basis.knot_vector.lower, basis.knot_vector.upper)


def eval_basis(basis: SplineBasis, x: float, derivative_order: int = 0) -> np.ndarray:
    """
    Evaluate (b_1^(d)(x), ..., b_K^(d)(x)).

    Points outside the knot range are clamped to it.
    """
    _check_derivative(basis, derivative_order)
    return basis_spline(basis)(clamp(basis, float(x)), nu=derivative_order)


def design_matrix(basis: SplineBasis, xs: Sequence[float], derivative_order: int = 0) -> DesignMatrix:
    """n x K matrix with rows eval_basis(basis, xs[i], derivative_order)."""
    _check_derivative(basis, derivative_order)
    points = np.asarray(xs, dtype=float).ravel()
    values = basis_spline(basis)(clamp(basis, points), nu=derivative_order)
    return DesignMatrix(values=values.reshape(len(points), basis.dimension), sample_points=points)
