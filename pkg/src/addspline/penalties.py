"""
Penalty Gram matrices Omega = int b^(d) b^(d)^T + int b b^T and their Cholesky factors.
"""
from typing import Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import LinAlgError, cholesky_banded

from src.addspline.config.settings import QUADRATURE_NODES
from src.addspline.exceptions import FactorizationError, PenaltyError
from src.addspline.models.basis import CholeskyFactor, PenaltyMatrix, SplineBasis
from src.addspline.spline_basis import basis_spline
from src.addspline.utils.logger import logger

MatrixLike = Union[PenaltyMatrix, np.ndarray]


def _entries(omega: MatrixLike) -> np.ndarray:
    return omega.entries if isinstance(omega, PenaltyMatrix) else np.asarray(omega, dtype=float)


def quadrature_rule(basis: SplineBasis, quad_nodes: int = QUADRATURE_NODES):
    """
    Composite Gauss-Legendre nodes and weights over the nondegenerate knot spans.

    Returns:
        Tuple (points, weights), each of length quad_nodes * number of spans
    """
    nodes, weights = leggauss(quad_nodes)
    breaks = np.unique(basis.knots)
    half = 0.5 * np.diff(breaks)
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    points = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    return points, (half[:, None] * weights[None, :]).ravel()


def gram_matrix(basis: SplineBasis, derivative_order: int, quad_nodes: int = QUADRATURE_NODES) -> np.ndarray:
    """
    G[i, j] = int b_i^(d) b_j^(d) over the knot range.

    Each span carries a polynomial integrand of degree <= 2 * degree, so six
    nodes per span integrate it exactly for order-6 splines. The upper triangle
    is mirrored so G is symmetric bit for bit.
    """
    if not 0 <= derivative_order <= basis.degree:
        raise PenaltyError(f"Derivative order must be in 0..{basis.degree}, got {derivative_order}")
    points, weights = quadrature_rule(basis, quad_nodes)
    values = basis_spline(basis)(points, nu=derivative_order)
    gram = values.T @ (weights[:, None] * values)
    upper = np.triu(gram)
    gram = upper + np.triu(gram, 1).T
    offsets = np.abs(np.subtract.outer(np.arange(basis.dimension), np.arange(basis.dimension)))
    gram[offsets >= basis.order] = 0.0
    return gram


def penalty_matrix(basis: SplineBasis, derivative_order: int,
                   quad_nodes: int = QUADRATURE_NODES) -> PenaltyMatrix:
    """
    Omega with entries int b_i^(d) b_j^(d) + int b_i b_j.

    The L2 block makes Omega positive definite.
    """
    entries = gram_matrix(basis, derivative_order, quad_nodes) + gram_matrix(basis, 0, quad_nodes)
    logger.debug(
        f"Assembled order-{derivative_order} penalty for basis {basis.identifier} (K={basis.dimension})"
    )
    return PenaltyMatrix(entries=entries, derivative_order=derivative_order, basis_ref=basis.identifier)


def seminorm_value(omega: MatrixLike, gamma: np.ndarray) -> float:
    """Quadratic form gamma^T Omega gamma."""
    entries = _entries(omega)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (entries.shape[0],):
        raise PenaltyError(
            f"Coefficient vector of shape {gamma.shape} does not match penalty of size {entries.shape[0]}"
        )
    return max(float(gamma @ entries @ gamma), 0.0)


def bandwidth(matrix: np.ndarray) -> int:
    """Largest |i - j| with a nonzero entry."""
    rows, cols = np.nonzero(matrix)
    return int(np.max(np.abs(rows - cols))) if len(rows) else 0


def to_upper_banded(matrix: np.ndarray, upper_bandwidth: int) -> np.ndarray:
    """Upper band in LAPACK storage: ab[u + i - j, j] = A[i, j]."""
    size = matrix.shape[0]
    banded = np.zeros((upper_bandwidth + 1, size))
    for k in range(upper_bandwidth + 1):
        banded[upper_bandwidth - k, k:] = np.diagonal(matrix, k)
    return banded


def from_upper_banded(banded: np.ndarray) -> np.ndarray:
    upper_bandwidth = banded.shape[0] - 1
    size = banded.shape[1]
    dense = np.zeros((size, size))
    for k in range(upper_bandwidth + 1):
        dense += np.diag(banded[upper_bandwidth - k, k:], k)
    return dense


def factorize(omega: MatrixLike) -> CholeskyFactor:
    """
    Banded Cholesky factor H (upper triangular) with H^T H = Omega.

    Raises:
        FactorizationError: On a non-positive pivot
    """
    entries = _entries(omega)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise PenaltyError(f"Penalty matrix must be square, got shape {entries.shape}")
    width = bandwidth(entries)
    try:
        banded = cholesky_banded(to_upper_banded(entries, width), lower=False)
    except LinAlgError as e:
        logger.error(f"Cholesky factorization failed: {e}")
        raise FactorizationError(f"Penalty matrix is not positive definite: {e}") from e
    basis_ref = omega.basis_ref if isinstance(omega, PenaltyMatrix) else ""
    return CholeskyFactor(
        factor=from_upper_banded(banded), banded=banded, bandwidth=width, basis_ref=basis_ref
    )
