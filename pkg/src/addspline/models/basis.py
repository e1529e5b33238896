"""
Spline basis and penalty data models.
"""
import hashlib
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np


def _frozen(values: Any) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Clamped knot sequence of a B-spline basis."""
    knots: np.ndarray
    order: int

    def __post_init__(self):
        object.__setattr__(self, "knots", _frozen(self.knots))

    @property
    def lower(self) -> float:
        return float(self.knots[0])

    @property
    def upper(self) -> float:
        return float(self.knots[-1])

    @property
    def interior(self) -> np.ndarray:
        return self.knots[self.order:-self.order]

    def to_dict(self) -> Dict[str, Any]:
        """Convert knot vector to dictionary."""
        return {"order": self.order, "knots": self.knots.tolist()}


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """B-spline basis spanned by a clamped knot vector."""
    knot_vector: KnotVector

    @property
    def order(self) -> int:
        return self.knot_vector.order

    @property
    def degree(self) -> int:
        return self.knot_vector.order - 1

    @property
    def dimension(self) -> int:
        return len(self.knot_vector.knots) - self.knot_vector.order

    @property
    def knots(self) -> np.ndarray:
        return self.knot_vector.knots

    @property
    def identifier(self) -> str:
        """Short content hash of the knot vector."""
        digest = hashlib.sha1(self.knots.tobytes())
        digest.update(str(self.order).encode())
        return digest.hexdigest()[:12]

    def to_dict(self) -> Dict[str, Any]:
        """Convert basis to dictionary."""
        return {
            "identifier": self.identifier,
            "dimension": self.dimension,
            **self.knot_vector.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Basis evaluations b_j(x_i) at the sample points."""
    values: np.ndarray
    sample_points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "sample_points", _frozen(self.sample_points))

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class PenaltyMatrix:
    """Gram matrix of a derivative penalty plus the L2 term."""
    entries: np.ndarray
    derivative_order: int
    basis_ref: str

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """
    Upper-triangular H with H^T H = Omega.

    `banded` is the upper band in LAPACK storage as returned by
    `cholesky_banded`; `factor` is the same matrix in dense form.
    """
    factor: np.ndarray
    banded: np.ndarray
    bandwidth: int
    basis_ref: str = field(default="")

    def __post_init__(self):
        object.__setattr__(self, "factor", _frozen(self.factor))
        object.__setattr__(self, "banded", _frozen(self.banded))

    @property
    def lower(self) -> np.ndarray:
        return self.factor.T

    def norm_squared(self, gamma: np.ndarray) -> float:
        """
        gamma^T Omega gamma evaluated as ||H gamma||^2 in extended precision.

        The direct quadratic form sums terms far larger than its value once the
        knot spacing is small; H gamma has entries of the size of the result.
        """
        h_gamma = self.factor.astype(np.longdouble) @ np.asarray(gamma, dtype=np.longdouble)
        return float(np.sum(h_gamma * h_gamma))
