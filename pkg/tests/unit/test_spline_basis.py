"""
Unit tests for B-spline basis construction and evaluation.
"""
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from src.addspline.exceptions import BasisError
from src.addspline.spline_basis import (
    basis_dimension,
    build_knots,
    clamp,
    design_matrix,
    eval_basis,
    make_basis,
)


@pytest.fixture
def uniform_sample():
    """1000 uniform draws with a fixed seed."""
    return np.random.default_rng(11).uniform(size=1000)


class TestBasisDimension:
    """Test suite for the basis-size rule."""

    @pytest.mark.parametrize("n, expected", [(100, 6), (1000, 19), (5000, 43)])
    def test_rule(self, n, expected):
        assert basis_dimension(n) == expected

    def test_too_small_sample(self):
        with pytest.raises(BasisError):
            basis_dimension(50)
        with pytest.raises(BasisError):
            basis_dimension(1)


class TestKnots:
    """Test suite for knot placement."""

    def test_clamped_layout(self, uniform_sample):
        basis = make_basis(uniform_sample)
        knots = basis.knots
        assert basis.dimension == 19
        assert len(knots) == basis.dimension + basis.order
        assert np.all(knots[:6] == uniform_sample.min())
        assert np.all(knots[-6:] == uniform_sample.max())
        interior = basis.knot_vector.interior
        assert len(interior) == 13
        assert np.all(np.diff(interior) > 0)
        assert interior[0] > knots[0] and interior[-1] < knots[-1]

    def test_interior_knots_are_order_statistics(self, uniform_sample):
        basis = make_basis(uniform_sample)
        assert np.all(np.isin(basis.knot_vector.interior, uniform_sample))

    def test_knots_do_not_depend_on_sample_order(self, uniform_sample):
        shuffled = np.random.default_rng(3).permutation(uniform_sample)
        assert np.array_equal(make_basis(shuffled).knots, make_basis(uniform_sample).knots)

    def test_ties_are_nudged(self):
        sample = np.repeat([0.0, 0.25, 0.5, 0.75, 1.0], 200)
        basis = make_basis(sample)
        interior = basis.knot_vector.interior
        assert np.all(np.diff(interior) > 0)
        assert interior[0] > 0.0 and interior[-1] < 1.0

    def test_constant_sample_rejected(self):
        with pytest.raises(BasisError):
            make_basis(np.full(200, 0.3))

    def test_unsorted_input_to_build_knots_rejected(self):
        with pytest.raises(BasisError):
            build_knots(np.array([0.3, 0.1, 0.2, 0.9] * 50), 6)

    def test_identifier_tracks_knots(self, uniform_sample):
        first = make_basis(uniform_sample)
        second = make_basis(uniform_sample.copy())
        other = make_basis(uniform_sample[:900])
        assert first.identifier == second.identifier
        assert first.identifier != other.identifier


class TestEvaluation:
    """Test suite for basis evaluation."""

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1),
           n=st.integers(min_value=100, max_value=3000))
    def test_partition_of_unity(self, seed, n):
        sample = np.random.default_rng(seed).uniform(size=n)
        basis = make_basis(sample)
        points = np.linspace(basis.knot_vector.lower, basis.knot_vector.upper, 10_000)
        values = design_matrix(basis, points).values
        assert np.max(np.abs(values.sum(axis=1) - 1.0)) < 1e-12
        assert values.min() > -1e-14

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_derivatives_match_finite_differences(self, uniform_sample, order):
        basis = make_basis(uniform_sample)
        lower, upper = basis.knot_vector.lower, basis.knot_vector.upper
        points = np.linspace(lower + 0.01, upper - 0.01, 200)
        h = 1e-5
        exact = design_matrix(basis, points, order).values
        forward = design_matrix(basis, points + h, order - 1).values
        backward = design_matrix(basis, points - h, order - 1).values
        approx = (forward - backward) / (2 * h)
        relative = np.max(np.abs(approx - exact)) / max(np.max(np.abs(exact)), 1.0)
        assert relative < 1e-5

    def test_row_has_at_most_order_nonzeros(self, uniform_sample):
        basis = make_basis(uniform_sample)
        values = design_matrix(basis, uniform_sample).values
        assert np.all(np.count_nonzero(values, axis=1) <= basis.order)

    def test_evaluation_is_clamped(self, uniform_sample):
        basis = make_basis(uniform_sample)
        lower, upper = basis.knot_vector.lower, basis.knot_vector.upper
        assert np.array_equal(eval_basis(basis, lower - 1.0), eval_basis(basis, lower))
        assert np.array_equal(eval_basis(basis, upper + 1.0), eval_basis(basis, upper))
        assert np.array_equal(clamp(basis, [lower - 2.0, upper + 2.0]), [lower, upper])

    def test_endpoint_values(self, uniform_sample):
        basis = make_basis(uniform_sample)
        at_lower = eval_basis(basis, basis.knot_vector.lower)
        at_upper = eval_basis(basis, basis.knot_vector.upper)
        assert at_lower[0] == pytest.approx(1.0)
        assert at_upper[-1] == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [100, 1000])
    def test_reproduces_polynomials_up_to_degree_five(self, n):
        sample = np.sort(np.random.default_rng(n).uniform(size=n))
        basis = make_basis(sample)
        values = design_matrix(basis, sample).values
        for degree in range(6):
            target = (sample - 0.5) ** degree
            coefficients = np.linalg.lstsq(values, target, rcond=None)[0]
            assert np.max(np.abs(values @ coefficients - target)) < 1e-9
        if n == 100:
            assert basis.dimension == basis.order

    def test_design_matrix_shape(self, uniform_sample):
        basis = make_basis(uniform_sample)
        design = design_matrix(basis, uniform_sample[:37])
        assert design.shape == (37, basis.dimension)
        assert not design.values.flags.writeable

    def test_invalid_derivative_order(self, uniform_sample):
        basis = make_basis(uniform_sample)
        with pytest.raises(BasisError):
            eval_basis(basis, 0.5, derivative_order=6)
        with pytest.raises(BasisError):
            design_matrix(basis, uniform_sample, derivative_order=-1)
