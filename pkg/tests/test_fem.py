"""Tests for P1 elements, quadrature, point location and norms."""

import math

import numpy as np
import pytest

from lgmm.errors import InvalidInputError
from lgmm.fem import (
    ExtensionPolicy,
    PiecewiseLinearFunction,
    QuadratureRule,
    assemble_mass,
    assemble_stiffness,
    evaluate,
    gauss_rule,
    h1_error,
    h1_seminorm,
    hat_basis_eval,
    interp_time_derivative,
    interpolant_transport_part,
    interpolate,
    l2_error,
    l2_norm,
    locate_element,
    locate_elements,
    lumped_masses,
    sample,
    total_integral,
)
from lgmm.mesh import MeshLevel, NodeVelocities, initial_uniform_mesh


class TestHatBasis:
    """Tests for the nodal basis."""

    def test_values(self):
        """Hat functions are one at their node and linear in between."""
        mesh = MeshLevel([0.0, 1.0, 3.0])
        assert hat_basis_eval(mesh, 1, 1.0) == 1.0
        assert hat_basis_eval(mesh, 1, 2.0) == pytest.approx(0.5)
        assert hat_basis_eval(mesh, 0, 0.25) == pytest.approx(0.75)
        assert hat_basis_eval(mesh, 2, 0.5) == 0.0

    def test_index_out_of_range(self):
        """Indices outside 0..N_p-1 are rejected."""
        with pytest.raises(InvalidInputError) as exc:
            hat_basis_eval(MeshLevel([0.0, 1.0]), 2, 0.5)
        assert exc.value.code == "index-out-of-range"

    def test_partition_of_unity(self, rng, graded_mesh):
        """The hat functions sum to one inside the hull."""
        for x in rng.uniform(-1.0, 1.0, 25):
            total = sum(hat_basis_eval(graded_mesh, i, x) for i in range(graded_mesh.n_points))
            assert total == pytest.approx(1.0, abs=1e-14)


class TestInterpolation:
    """Tests for the Lagrange interpolant."""

    def test_affine_reproduction(self, rng, graded_mesh):
        """Affine functions are reproduced exactly."""
        fn = interpolate(lambda x: 3.0 * x - 0.5, graded_mesh)
        xs = rng.uniform(-1.0, 1.0, 50)
        np.testing.assert_allclose(evaluate(fn, xs), 3.0 * xs - 0.5, atol=1e-14)

    def test_constant_broadcasts(self, uniform_mesh):
        """A constant callable yields a constant interpolant."""
        fn = interpolate(lambda x: 2.0, uniform_mesh)
        np.testing.assert_array_equal(fn.values, np.full(uniform_mesh.n_points, 2.0))

    def test_second_order_in_l2(self):
        """Halving h divides the L2 interpolation error of x^2 by four."""
        errors = [
            l2_error(interpolate(lambda x: x**2, initial_uniform_mesh(-1.0, 1.0, n)), lambda x: x**2)
            for n in (8, 16, 32)
        ]
        assert errors[0] / errors[1] == pytest.approx(4.0, rel=1e-8)
        assert errors[1] / errors[2] == pytest.approx(4.0, rel=1e-8)

    def test_first_order_in_h1(self):
        """Halving h halves the H1 interpolation error of sin(pi x)."""
        errors = [
            h1_error(
                interpolate(lambda x: np.sin(math.pi * x), initial_uniform_mesh(-1.0, 1.0, n)),
                lambda x: math.pi * np.cos(math.pi * x),
            )
            for n in (32, 64)
        ]
        assert math.log2(errors[0] / errors[1]) == pytest.approx(1.0, abs=0.05)

    def test_mismatched_values(self, uniform_mesh):
        """One value per node."""
        with pytest.raises(InvalidInputError) as exc:
            PiecewiseLinearFunction(uniform_mesh, np.zeros(3))
        assert exc.value.code == "mismatched-levels"


# ---------------------------------------------------------------------------
# Point location and evaluation
# ---------------------------------------------------------------------------


class TestLocate:
    """Tests for element search."""

    def test_interior_and_ties(self):
        """Interior points find their element; shared nodes belong to the left element."""
        mesh = initial_uniform_mesh(0.0, 1.0, 4)
        assert locate_element(mesh, 0.6) == 2
        assert locate_element(mesh, 0.5) == 1
        assert locate_element(mesh, 0.0) == 0
        assert locate_element(mesh, 1.0) == 3

    def test_exterior(self):
        """Exterior points map to the end elements."""
        mesh = initial_uniform_mesh(0.0, 1.0, 4)
        assert locate_element(mesh, -5.0) == 0
        assert locate_element(mesh, 5.0) == 3

    def test_far_hint_falls_back_to_bisection(self):
        """A hint many elements away still gives the right element."""
        mesh = initial_uniform_mesh(0.0, 1.0, 100)
        assert locate_element(mesh, 0.985, hint=0) == 98
        assert locate_element(mesh, 0.015, hint=99) == 1

    def test_vectorized_matches_scalar(self, rng, graded_mesh):
        """locate_elements agrees with locate_element for arbitrary hints."""
        xs = np.r_[rng.uniform(-1.2, 1.2, 200), graded_mesh.points]
        hints = rng.integers(-3, graded_mesh.n_elements + 3, xs.size)
        expected = [locate_element(graded_mesh, x, h) for x, h in zip(xs, hints)]
        np.testing.assert_array_equal(locate_elements(graded_mesh, xs, hints), expected)
        np.testing.assert_array_equal(
            locate_elements(graded_mesh, xs), [locate_element(graded_mesh, x) for x in xs]
        )


class TestEvaluate:
    """Tests for evaluation and extension policies."""

    def test_policies(self):
        """Linear extension continues the end slope, clamp holds the end value, error raises."""
        fn = PiecewiseLinearFunction(MeshLevel([0.0, 1.0]), [0.0, 2.0])
        assert evaluate(fn, 0.25) == pytest.approx(0.5)
        assert evaluate(fn, 1.5) == pytest.approx(3.0)
        assert evaluate(fn, 1.5, ExtensionPolicy.CLAMP) == pytest.approx(2.0)
        assert evaluate(fn, -1.0, ExtensionPolicy.CLAMP) == pytest.approx(0.0)
        with pytest.raises(InvalidInputError) as exc:
            evaluate(fn, 1.5, ExtensionPolicy.ERROR)
        assert exc.value.code == "out-of-domain"

    def test_scalar_and_array(self):
        """Scalars give floats, arrays give arrays."""
        fn = PiecewiseLinearFunction(MeshLevel([0.0, 1.0, 2.0]), [1.0, 3.0, 2.0])
        assert isinstance(evaluate(fn, 0.5), float)
        np.testing.assert_allclose(evaluate(fn, np.array([0.5, 1.5])), [2.0, 2.5])

    def test_sample_counts(self):
        """Nodes plus the requested interior samples per element."""
        fn = PiecewiseLinearFunction(MeshLevel([0.0, 1.0, 2.0]), [0.0, 1.0, 0.0])
        xs, values = sample(fn, 3)
        assert xs.size == 9
        np.testing.assert_allclose(xs[:5], [0.0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_allclose(values[:5], [0.0, 0.25, 0.5, 0.75, 1.0])
        xs, _ = sample(fn)
        np.testing.assert_array_equal(xs, [0.0, 1.0, 2.0])


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


class TestGaussRule:
    """Tests for Gauss–Legendre rules."""

    def test_nine_point_exactness(self):
        """The default rule integrates monomials up to degree 17 exactly."""
        rule = gauss_rule()
        assert rule.n_points == 9
        assert rule.degree == 17
        assert rule.weights.sum() == pytest.approx(2.0, abs=1e-14)
        for k in range(18):
            exact = 0.0 if k % 2 else 2.0 / (k + 1)
            assert rule.integrate(lambda x: x**k) == pytest.approx(exact, abs=1e-13)

    def test_sixteenth_power(self):
        """int x^16 over [-1, 1] is 2/17."""
        assert gauss_rule(9).integrate(lambda x: x**16) == pytest.approx(2.0 / 17.0, abs=1e-13)

    @pytest.mark.parametrize("points", [0, 17])
    def test_unsupported_order(self, points):
        """Only 1..16 points."""
        with pytest.raises(InvalidInputError) as exc:
            gauss_rule(points)
        assert exc.value.code == "unsupported-order"

    def test_invalid_weights(self):
        """Weights must be positive and sum to two."""
        with pytest.raises(InvalidInputError):
            QuadratureRule([0.0], [1.0])

    def test_on_intervals(self):
        """Mapped rules integrate over physical intervals."""
        xq, wq = gauss_rule(3).on_intervals([0.0, 1.0], [1.0, 3.0])
        assert xq.shape == (2, 3)
        np.testing.assert_allclose(np.sum(wq * xq**2, axis=1), [1.0 / 3.0, 26.0 / 3.0])


# ---------------------------------------------------------------------------
# Matrices and norms
# ---------------------------------------------------------------------------


class TestMatrices:
    """Tests for mass and stiffness assembly."""

    def test_single_element(self):
        """Element matrices on [0, 1]."""
        mesh = MeshLevel([0.0, 1.0])
        np.testing.assert_allclose(
            assemble_mass(mesh).to_dense(), [[1 / 3, 1 / 6], [1 / 6, 1 / 3]]
        )
        np.testing.assert_allclose(assemble_stiffness(mesh).to_dense(), [[1.0, -1.0], [-1.0, 1.0]])

    def test_mass_row_sums(self, graded_mesh):
        """Row sums of M are the lumped masses and integrals of the hats."""
        mass = assemble_mass(graded_mesh)
        np.testing.assert_allclose(mass.matvec(np.ones(graded_mesh.n_points)), lumped_masses(graded_mesh))
        assert lumped_masses(graded_mesh).sum() == pytest.approx(2.0)

    def test_mass_positive_definite(self, graded_mesh):
        """M is symmetric positive definite."""
        dense = assemble_mass(graded_mesh).to_dense()
        np.testing.assert_allclose(dense, dense.T)
        assert np.min(np.linalg.eigvalsh(dense)) > 0.0

    def test_stiffness_kernel(self, graded_mesh):
        """K annihilates constants and has exactly one zero eigenvalue."""
        stiffness = assemble_stiffness(graded_mesh)
        np.testing.assert_allclose(stiffness.matvec(np.ones(graded_mesh.n_points)), 0.0, atol=1e-12)
        eigs = np.linalg.eigvalsh(stiffness.to_dense())
        assert abs(eigs[0]) < 1e-10
        assert eigs[1] > 1e-6


class TestNorms:
    """Tests for exact P1 norms and integrals."""

    def test_constant(self, uniform_mesh):
        """A constant 3 on (-1, 1)."""
        fn = interpolate(lambda x: 3.0, uniform_mesh)
        assert l2_norm(fn) == pytest.approx(3.0 * math.sqrt(2.0))
        assert h1_seminorm(fn) == 0.0
        assert total_integral(fn) == pytest.approx(6.0)

    def test_identity_on_unit_interval(self):
        """x on [0, 1]: L2 norm 1/sqrt(3), H1 seminorm 1."""
        fn = interpolate(lambda x: x, MeshLevel([0.0, 0.5, 1.0]))
        assert l2_norm(fn) == pytest.approx(1.0 / math.sqrt(3.0))
        assert h1_seminorm(fn) == pytest.approx(1.0)
        assert total_integral(fn) == pytest.approx(0.5)

    def test_total_integral_is_trapezoid(self, graded_mesh):
        """The integral of an interpolant equals the trapezoid rule and 1^T M v."""
        fn = interpolate(lambda x: np.exp(x), graded_mesh)
        assert total_integral(fn) == pytest.approx(np.trapezoid(fn.values, graded_mesh.points))
        ones = np.ones(graded_mesh.n_points)
        assert total_integral(fn) == pytest.approx(ones @ assemble_mass(graded_mesh).matvec(fn.values))

    def test_errors_vanish_for_interpolated_affine(self, graded_mesh):
        """Errors against an affine function are zero."""
        fn = interpolate(lambda x: 2.0 * x + 1.0, graded_mesh)
        assert l2_error(fn, lambda x: 2.0 * x + 1.0) == pytest.approx(0.0, abs=1e-14)
        assert h1_error(fn, lambda x: np.full_like(x, 2.0)) == pytest.approx(0.0, abs=1e-13)


# ---------------------------------------------------------------------------
# Moving interpolants
# ---------------------------------------------------------------------------


class TestInterpTimeDerivative:
    """Tests for the time derivative of the moving interpolant."""

    def test_constant_profile(self):
        """Moving the nodes under a constant profile changes nothing."""
        level = MeshLevel([0.0, 0.4, 1.0])
        w = NodeVelocities([0.0, 1.0, 0.0], 0.1)
        assert interp_time_derivative(lambda x, t: 2.0, level, w, 0.3, 0.0) == 0.0

    def test_static_nodes(self):
        """Zero node velocities give a zero derivative."""
        level = MeshLevel([0.0, 0.4, 1.0])
        w = NodeVelocities(np.zeros(3), 0.1)
        assert interp_time_derivative(lambda x, t: np.sin(x + t), level, w, 0.7, 0.2) == 0.0

    def test_affine_profile_balance(self):
        """For a fixed affine profile both parts cancel: the interpolant does not change."""
        level = MeshLevel([0.0, 0.4, 1.0])
        w = NodeVelocities([0.5, 0.5, 0.5], 0.1)
        phi = lambda x, t: 3.0 * np.asarray(x) - 1.0  # noqa: E731
        part = interp_time_derivative(phi, level, w, 0.7, 0.0)
        transport = interpolant_transport_part(
            lambda x, t: np.zeros_like(x), lambda x, t: np.full_like(x, 3.0), level, w, 0.7, 0.0
        )
        assert part == pytest.approx(-1.5)
        assert part + transport == pytest.approx(0.0, abs=1e-14)

    def test_out_of_hull(self):
        """Points outside the hull are rejected."""
        level = MeshLevel([0.0, 1.0])
        w = NodeVelocities([0.0, 0.0], 0.1)
        with pytest.raises(InvalidInputError) as exc:
            interp_time_derivative(lambda x, t: x, level, w, 1.5, 0.0)
        assert exc.value.code == "out-of-hull"
