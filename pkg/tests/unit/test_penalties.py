"""
Unit tests for penalty Gram matrices and their Cholesky factors.
"""
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.interpolate import BSpline

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from src.addspline.exceptions import FactorizationError, PenaltyError
from src.addspline.penalties import (
    bandwidth,
    factorize,
    from_upper_banded,
    gram_matrix,
    penalty_matrix,
    seminorm_value,
    to_upper_banded,
)
from src.addspline.spline_basis import basis_spline, make_basis


@pytest.fixture(scope="module")
def basis():
    """Order-6 basis with K=9 on 200 uniform draws."""
    return make_basis(np.random.default_rng(5).uniform(size=200))


def greville(basis):
    """Coefficients reproducing the identity function."""
    k = basis.knots
    return np.array([k[j + 1:j + basis.order].mean() for j in range(basis.dimension)])


def integrate(func, basis):
    lower, upper = basis.knot_vector.lower, basis.knot_vector.upper
    value, _ = quad(func, lower, upper, points=basis.knot_vector.interior, limit=200,
                    epsabs=1e-13, epsrel=1e-13)
    return value


class TestGramMatrix:
    """Test suite for Gram matrix assembly."""

    def test_symmetric_and_banded(self, basis):
        omega = penalty_matrix(basis, 3).entries
        assert np.array_equal(omega, omega.T)
        offsets = np.abs(np.subtract.outer(np.arange(basis.dimension), np.arange(basis.dimension)))
        assert np.all(omega[offsets >= basis.order] == 0.0)
        assert bandwidth(omega) == basis.order - 1

    @pytest.mark.parametrize("derivative_order", [2, 3])
    def test_entries_match_adaptive_quadrature(self, basis, derivative_order):
        omega = penalty_matrix(basis, derivative_order).entries
        spline = basis_spline(basis)
        derivative = spline.derivative(derivative_order)
        for i in range(basis.dimension):
            for j in range(i, min(i + basis.order, basis.dimension)):
                oracle = integrate(
                    lambda t: derivative(t)[i] * derivative(t)[j] + spline(t)[i] * spline(t)[j], basis
                )
                assert abs(omega[i, j] - oracle) <= 1e-8 * max(1.0, abs(oracle))

    def test_quadratic_form_matches_direct_integration(self, basis):
        omega = penalty_matrix(basis, 3)
        rng = np.random.default_rng(17)
        for _ in range(50):
            gamma = rng.normal(size=basis.dimension)
            function = BSpline(basis.knots, gamma, basis.degree)
            third = function.derivative(3)
            oracle = integrate(lambda t: third(t) ** 2 + function(t) ** 2, basis)
            assert abs(seminorm_value(omega, gamma) - oracle) <= 1e-8 * max(1.0, oracle)

    def test_polynomials_of_low_degree_are_not_penalized(self, basis):
        ones = np.ones(basis.dimension)
        identity = greville(basis)
        g3 = gram_matrix(basis, 3)
        g2 = gram_matrix(basis, 2)
        assert np.max(np.abs(g3 @ ones)) <= 1e-9 * np.max(np.abs(g3))
        assert np.max(np.abs(g2 @ identity)) <= 1e-9 * np.max(np.abs(g2))

    def test_l2_part_integrates_polynomials_exactly(self, basis):
        lower, upper = basis.knot_vector.lower, basis.knot_vector.upper
        identity = greville(basis)
        g0 = gram_matrix(basis, 0)
        assert np.ones(basis.dimension) @ g0 @ np.ones(basis.dimension) == pytest.approx(upper - lower, rel=1e-12)
        assert identity @ g0 @ identity == pytest.approx((upper ** 3 - lower ** 3) / 3, rel=1e-12)

    @pytest.mark.parametrize("derivative_order", [0, 2, 3])
    def test_six_nodes_integrate_exactly(self, basis, derivative_order):
        six = gram_matrix(basis, derivative_order, quad_nodes=6)
        twelve = gram_matrix(basis, derivative_order, quad_nodes=12)
        assert np.allclose(six, twelve, rtol=0.0, atol=1e-11 * np.max(np.abs(twelve)))

    @pytest.mark.parametrize("derivative_order", [0, 2, 3])
    def test_scaling_the_interval_scales_the_gram(self, derivative_order):
        sample = np.random.default_rng(5).uniform(size=200)
        unit, doubled = make_basis(sample), make_basis(2.0 * sample)
        expected = 2.0 ** (1 - 2 * derivative_order) * gram_matrix(unit, derivative_order)
        actual = gram_matrix(doubled, derivative_order)
        assert np.allclose(actual, expected, rtol=1e-10, atol=1e-12 * np.max(np.abs(expected)))

    def test_penalty_metadata(self, basis):
        omega = penalty_matrix(basis, 2)
        assert omega.derivative_order == 2
        assert omega.basis_ref == basis.identifier
        assert omega.dimension == basis.dimension

    def test_invalid_derivative_order(self, basis):
        with pytest.raises(PenaltyError):
            gram_matrix(basis, 6)


class TestSeminorm:
    """Test suite for the quadratic form."""

    def test_nonnegative(self, basis):
        omega = penalty_matrix(basis, 3)
        rng = np.random.default_rng(2)
        assert all(seminorm_value(omega, rng.normal(size=basis.dimension)) >= 0 for _ in range(20))

    @pytest.mark.parametrize("derivative_order", [2, 3])
    def test_matches_factor_norm(self, basis, derivative_order):
        omega = penalty_matrix(basis, derivative_order)
        factor = factorize(omega)
        rng = np.random.default_rng(8)
        for _ in range(20):
            gamma = rng.normal(size=basis.dimension)
            assert factor.norm_squared(gamma) == pytest.approx(seminorm_value(omega, gamma), rel=1e-9)

    def test_dimension_mismatch(self, basis):
        with pytest.raises(PenaltyError):
            seminorm_value(penalty_matrix(basis, 3), np.ones(basis.dimension + 1))


class TestFactorize:
    """Test suite for the banded Cholesky factorization."""

    @pytest.mark.parametrize("derivative_order", [2, 3])
    def test_factor_reproduces_penalty(self, basis, derivative_order):
        omega = penalty_matrix(basis, derivative_order)
        factor = factorize(omega)
        product = factor.factor.T @ factor.factor
        assert np.allclose(product, omega.entries, rtol=1e-10, atol=1e-10 * np.max(np.abs(omega.entries)))
        assert np.allclose(np.tril(factor.factor, -1), 0.0)
        assert np.all(np.diag(factor.factor) > 0)
        assert factor.bandwidth == basis.order - 1
        assert factor.basis_ref == basis.identifier
        assert np.array_equal(factor.lower, factor.factor.T)

    def test_banded_storage_layout(self):
        matrix = np.array([[4.0, 1.0, 0.0], [1.0, 5.0, 2.0], [0.0, 2.0, 6.0]])
        banded = to_upper_banded(matrix, 1)
        assert np.array_equal(banded, [[0.0, 1.0, 2.0], [4.0, 5.0, 6.0]])
        assert np.array_equal(from_upper_banded(banded), np.triu(matrix))

    def test_indefinite_matrix_rejected(self):
        with pytest.raises(FactorizationError):
            factorize(-np.eye(4))

    def test_non_square_rejected(self):
        with pytest.raises(PenaltyError):
            factorize(np.ones((3, 4)))
