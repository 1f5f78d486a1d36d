import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from malin.errors import ConvexityError, DomainError, PinchViolation
from malin.geometry import SectionSpec
from malin.potentials import (CofactorField, check_determinant_pinch, cofactor,
                              divergence_free_residual, estimate_hessian_integrability,
                              hessian_norm, make_potential)


class TestEval:
    def test_quadratic_closed_form(self, quadratic):
        val, grad, hess = quadratic.eval([1.0, 0.0])
        assert val == 0.5
        np.testing.assert_allclose(grad, [1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(hess, np.eye(2), atol=1e-15)

    def test_anisotropic_closed_form(self, aniso):
        val, grad, hess = aniso.eval([1.0, 1.0])
        assert val == 2.125
        np.testing.assert_allclose(grad, [4.0, 0.25], atol=1e-15)
        np.testing.assert_allclose(hess, np.diag([4.0, 0.25]), atol=1e-15)
        assert abs(np.linalg.det(hess) - 1.0) < 1e-15

    def test_zero_perturbation_matches_quadratic(self, quadratic):
        p0 = make_potential("PerturbedQuadratic", {"delta": 0.0, "freq": [1.0, 1.0]}, n=2)
        x = np.array([[0.3, -0.7], [1.1, 0.2], [-0.5, 0.9]])
        np.testing.assert_allclose(p0.value(x), quadratic.value(x), atol=1e-15)
        np.testing.assert_allclose(p0.gradient(x), quadratic.gradient(x), atol=1e-15)
        np.testing.assert_allclose(p0.hessian(x), quadratic.hessian(x), atol=1e-15)

    def test_domain_error_outside_box(self, perturbed):
        with pytest.raises(DomainError):
            perturbed.eval([100.0, 0.0])

    def test_domain_error_inside_excluded_ball(self, radial):
        with pytest.raises(DomainError):
            radial.eval([0.01, 0.0])


class TestCofactor:
    def test_identity(self):
        np.testing.assert_allclose(cofactor(np.eye(2)), np.eye(2), atol=1e-15)

    def test_diagonal_swap(self):
        np.testing.assert_allclose(cofactor(np.diag([2.0, 3.0])), np.diag([3.0, 2.0]),
                                   atol=1e-15)

    def test_offdiagonal_negation(self):
        H = np.array([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(cofactor(H), [[2.0, -1.0], [-1.0, 2.0]], atol=1e-15)

    def test_singular_input_is_total(self):
        H = np.array([[1.0, 1.0], [1.0, 1.0]])
        np.testing.assert_allclose(cofactor(H), [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.sampled_from([2, 3]))
    def test_adjugate_identity_random_symmetric(self, seed, n):
        r = np.random.default_rng(seed)
        A = r.normal(size=(n, n))
        H = 0.5 * (A + A.T)
        adj = cofactor(H)
        det = np.linalg.det(H)
        err = np.abs(adj @ H - det * np.eye(n)).max()
        assert err <= 1e-12 * (1.0 + np.sum(H * H))


class TestPinch:
    def test_quadratic_unit_determinant(self, quadratic):
        bounds = check_determinant_pinch(quadratic, [[-1, 1], [-1, 1]], resolution=50)
        assert bounds.lambda_ == pytest.approx(1.0, abs=1e-12)
        assert bounds.Lambda == pytest.approx(1.0, abs=1e-12)

    def test_anisotropic_product(self, aniso):
        bounds = check_determinant_pinch(aniso, [[-1, 1], [-1, 1]], resolution=50)
        assert bounds.lambda_ == pytest.approx(1.0, abs=1e-12)
        assert bounds.Lambda == pytest.approx(1.0, abs=1e-12)

    def test_perturbed_dense_oracle(self, perturbed):
        # oracle: dense 400x400 sampling of the closed-form determinant
        xs = np.linspace(-1, 1, 400)
        g = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
        dets = np.linalg.det(perturbed.hessian(g))
        lo_oracle, hi_oracle = dets.min(), dets.max()
        bounds = check_determinant_pinch(perturbed, [[-1, 1], [-1, 1]], resolution=50)
        assert lo_oracle - 1e-12 <= bounds.lambda_ <= lo_oracle + 0.01
        assert hi_oracle - 0.01 <= bounds.Lambda <= hi_oracle + 1e-12

    def test_nonconvex_sample_names_point(self):
        from malin.potentials import PinchBounds, Potential

        class Saddle(Potential):
            n = 2
            label = "saddle"
            pinch = PinchBounds(1e-6, 10.0)
            domain_box = np.array([[-1.0, 1.0], [-1.0, 1.0]])

            def _value(self, x):
                return 0.5 * (x[:, 0] ** 2 - x[:, 1] ** 2)

            def _gradient(self, x):
                return x * np.array([1.0, -1.0])

            def _hessian(self, x):
                return np.broadcast_to(np.diag([1.0, -1.0]),
                                       (x.shape[0], 2, 2)).copy()

        with pytest.raises(ConvexityError) as exc:
            check_determinant_pinch(Saddle(), resolution=10)
        assert "at [" in str(exc.value)

    def test_gershgorin_rejects_large_amplitude(self):
        with pytest.raises(ConvexityError):
            make_potential("PerturbedQuadratic", {"delta": 0.4, "freq": [2.0, 2.0]}, n=2)

    def test_declared_bounds_violation(self, perturbed):
        import copy

        tampered = copy.copy(perturbed)
        tampered.pinch = type(perturbed.pinch)(1.001, 1.002)
        with pytest.raises(PinchViolation):
            check_determinant_pinch(tampered, [[-1, 1], [-1, 1]], resolution=30)

    def test_resolution_precondition(self, quadratic):
        with pytest.raises(ValueError):
            check_determinant_pinch(quadratic, resolution=1)


class TestDivergenceFree:
    def test_constant_fields_exact_zero(self, quadratic, aniso):
        for pot in (quadratic, aniso):
            res = divergence_free_residual(CofactorField(pot), [0.4, -0.3], 1e-3)
            np.testing.assert_allclose(res, 0.0, atol=1e-14)

    def test_richardson_second_order(self, perturbed_uneven):
        field = CofactorField(perturbed_uneven)
        x = [0.3, 0.2]
        r_coarse = np.linalg.norm(divergence_free_residual(field, x, 1e-2))
        r_fine = np.linalg.norm(divergence_free_residual(field, x, 1e-3))
        assert 80.0 < r_coarse / r_fine < 125.0

    def test_richardson_radial(self, radial):
        field = CofactorField(radial)
        x = [1.2, 0.4]
        r_coarse = np.linalg.norm(divergence_free_residual(field, x, 1e-2))
        r_fine = np.linalg.norm(divergence_free_residual(field, x, 1e-3))
        assert 80.0 < r_coarse / r_fine < 125.0

    def test_equal_frequency_cancellation(self, perturbed):
        # symmetric frequencies cancel the central-difference stencil exactly
        res = divergence_free_residual(CofactorField(perturbed), [0.3, 0.2], 1e-3)
        assert np.linalg.norm(res) < 1e-11

    def test_step_must_be_positive(self, quadratic):
        with pytest.raises(ValueError):
            divergence_free_residual(CofactorField(quadratic), [0.0, 0.0], 0.0)


class TestEllipticityBounds:
    def test_lower_bound_lambda_over_trace(self, all_potentials):
        r = np.random.default_rng(7)
        for pot in all_potentials:
            x = r.uniform(0.5, 1.5, size=(200, 2)) * np.sign(r.normal(size=(200, 2)))
            x = x[pot.admissible(x)]
            H = pot.hessian(x)
            Phi = cofactor(H)
            eta = r.normal(size=(len(x), 2))
            eta /= np.linalg.norm(eta, axis=1, keepdims=True)
            quad = np.einsum("mi,mij,mj->m", eta, Phi, eta)
            trace = np.trace(H, axis1=1, axis2=2)
            assert np.all(quad >= pot.pinch.lambda_ / trace - 1e-12)

    def test_upper_bound_trace_power(self, all_potentials):
        r = np.random.default_rng(8)
        for pot in all_potentials:
            x = r.uniform(-1.5, 1.5, size=(200, 2))
            x = x[pot.admissible(x)]
            H = pot.hessian(x)
            Phi = cofactor(H)
            eigmax = np.linalg.eigvalsh(Phi).max(axis=1)
            trace = np.trace(H, axis1=1, axis2=2)
            assert np.all(eigmax <= trace ** (pot.n - 1) + 1e-12)


class TestHessianIntegrability:
    def test_quadratic_constant_integrand(self, quadratic):
        section = SectionSpec(quadratic, (0.0, 0.0), 0.5)  # unit disk
        rows = estimate_hessian_integrability(quadratic, section, [1.0], resolution=200)
        eps, integral, stable = rows[0]
        # ||I||_F^2 = 2 over the unit disk: integral 2 pi
        assert integral == pytest.approx(2.0 * np.pi, rel=0.01)
        assert stable

    def test_anisotropic_constant_integrand(self, quadratic, aniso):
        section = SectionSpec(quadratic, (0.0, 0.0), 0.5)
        rows = estimate_hessian_integrability(aniso, section, [0.0], resolution=200)
        _, integral, stable = rows[0]
        expected = np.sqrt(16.0 + 0.0625) * np.pi
        assert integral == pytest.approx(expected, rel=0.01)
        assert stable

    def test_perturbed_dense_quadrature_oracle(self, perturbed):
        section = SectionSpec(perturbed, (0.0, 0.0), 0.5)
        # oracle at 400 cells/axis, assertion at 100
        oracle = estimate_hessian_integrability(perturbed, section, [1.0], resolution=400)
        rows = estimate_hessian_integrability(perturbed, section, [1.0], resolution=100)
        assert rows[0][1] == pytest.approx(oracle[0][1], rel=0.01)

    def test_overflow_marks_divergent(self, aniso, quadratic):
        section = SectionSpec(quadratic, (0.0, 0.0), 0.5)
        rows = estimate_hessian_integrability(aniso, section, [2000.0], resolution=60)
        assert rows[0][1] == float("inf")
        assert rows[0][2] is False

    def test_nonpositive_exponent_rejected(self, quadratic):
        section = SectionSpec(quadratic, (0.0, 0.0), 0.5)
        with pytest.raises(ValueError):
            estimate_hessian_integrability(quadratic, section, [-0.5])

    def test_frobenius_convention(self, quadratic):
        assert hessian_norm(quadratic, np.array([[0.2, 0.1]]))[0] == pytest.approx(
            np.sqrt(2.0), abs=1e-14)
