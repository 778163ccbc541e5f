import numpy as np
import pytest

import fracneumann as fn
from fracneumann.problem import fprime_eval

from conftest import random_grid_function


def central_difference_derivative(spec, u, v, delta):
    """Independent oracle for the directional derivative of the energy."""
    return (fn.energy(spec, u + delta * v) - fn.energy(spec, u - delta * v)) \
        / (2.0 * delta)


class TestNonlinearityValues:
    def test_vanishes_on_negatives(self):
        nl = fn.power_nonlinearity(3.0)
        assert fn.f_eval(nl, -3.0) == 0.0
        assert fn.F_eval(nl, -3.0) == 0.0

    def test_cubic_values(self):
        nl = fn.power_nonlinearity(3.0)
        assert fn.f_eval(nl, 2.0) == pytest.approx(4.0)
        assert fn.F_eval(nl, 2.0) == pytest.approx(8.0 / 3.0)

    def test_growth_bound_sweep(self):
        nl = fn.power_nonlinearity(3.0)
        t = np.logspace(-6, 6, 10_000)
        assert np.all(np.abs(fn.f_eval(nl, t))
                      <= nl.eta * t + nl.c_eta * t ** (nl.p - 1.0))

    def test_primitive_consistency(self):
        # F' = f by quadrature on a few random intervals
        nl = fn.power_nonlinearity(2.7)
        for t in (0.3, 1.0, 4.2):
            d = 1e-6
            deriv = (fn.F_eval(nl, t + d) - fn.F_eval(nl, t - d)) / (2 * d)
            assert deriv == pytest.approx(fn.f_eval(nl, t), rel=1e-6)

    def test_table_model_matches_power_samples(self):
        knots = np.linspace(0.0, 10.0, 2001)
        table = fn.table_nonlinearity(knots, knots**2, p=3.0, theta=3.0)
        for t in (0.5, 2.0, 7.3):
            assert fn.f_eval(table, t) == pytest.approx(t**2, rel=1e-5)
            # F integrates the interpolant, so it only tracks t^3/3 to the
            # interpolation error of the table
            assert fn.F_eval(table, t) == pytest.approx(t**3 / 3.0, rel=2e-4)
        # beyond the table the power growth continues
        assert fn.f_eval(table, 20.0) == pytest.approx(400.0, rel=1e-5)

    def test_fprime(self):
        nl = fn.power_nonlinearity(3.0)
        assert fprime_eval(nl, 2.0) == pytest.approx(4.0)
        assert fprime_eval(nl, -1.0) == 0.0


class TestHypotheses:
    def test_cubic_passes(self):
        nl = fn.power_nonlinearity(3.0)
        report = fn.check_hypotheses(nl)
        assert report.ok
        assert report.fixed_points == pytest.approx([1.0], abs=1e-10)
        assert report.alpha == pytest.approx(1.0 / 6.0, rel=1e-10)

    def test_theta_equality_for_power(self):
        # theta = p gives theta F(t) = t f(t) exactly
        nl = fn.power_nonlinearity(3.0)
        t = np.linspace(0.1, 50.0, 100)
        np.testing.assert_allclose(nl.theta * fn.F_eval(nl, t),
                                   t * fn.f_eval(nl, t), rtol=1e-13)

    def test_shallow_power_passes(self):
        # slow superlinear growth still registers as superlinear
        report = fn.check_hypotheses(fn.power_nonlinearity(2.2))
        assert report.superlinear_ok
        assert report.ok

    def test_identity_map_rejected(self):
        # f(t) = t has every positive t fixed and zero energy gap
        knots = np.linspace(0.0, 1e8, 100)
        nl = fn.table_nonlinearity(knots, knots.copy(), p=3.0, theta=2.5)
        with pytest.raises(ValueError, match="constant-solution gap"):
            fn.check_hypotheses(nl)


class TestProblemSpec:
    def test_two_star(self, spec_1d):
        assert spec_1d.two_star == pytest.approx(4.0)

    def test_subcritical_exponent_enforced(self, mesh_1d, op_1d):
        with pytest.raises(ValueError, match="2 < p < 2"):
            fn.ProblemSpec(mesh_1d, op_1d, fn.power_nonlinearity(4.5))

    def test_constant_energy_value(self, spec_1d):
        # (1/2 - 1/3) * |domain| with the cubic model, any eps
        assert spec_1d.constant_energy(1.0) == pytest.approx(1.0 / 3.0, rel=1e-12)


class TestEnergy:
    def test_zero_function(self, spec_1d, mesh_1d):
        assert fn.energy(spec_1d, np.zeros(mesh_1d.n_total)) == 0.0

    def test_constant_function(self, spec_1d, mesh_1d):
        mu = 1.7
        u = np.full(mesh_1d.n_total, mu)
        want = (mu**2 / 2.0 - fn.F_eval(spec_1d.nonlinearity, mu)) \
            * mesh_1d.domain_measure()
        assert fn.energy(spec_1d, u) == pytest.approx(want, rel=1e-13)

    def test_decomposition_identity(self, spec_1d, mesh_1d):
        vol = mesh_1d.cell_volume
        ni = mesh_1d.n_interior
        for seed in range(5):
            u = random_grid_function(mesh_1d, 40 + seed)
            total = fn.energy(spec_1d, u)
            norm_part = 0.5 * fn.bilinear_form(spec_1d.op, u, u)
            f_part = vol * float(np.sum(fn.F_eval(spec_1d.nonlinearity, u[:ni])))
            assert total == pytest.approx(norm_part - f_part, rel=1e-12)


class TestGradient:
    def test_constant_solution_is_exactly_critical(self, spec_1d, mesh_1d):
        u = np.ones(mesh_1d.n_total)  # f(1) = 1 for the cubic model
        assert np.all(fn.energy_gradient(spec_1d, u) == 0.0)

    def test_central_difference_oracle(self, spec_1d, mesh_1d):
        rng = np.random.default_rng(77)
        for _ in range(50):
            u = rng.standard_normal(mesh_1d.n_total)
            v = rng.standard_normal(mesh_1d.n_total)
            delta = 1e-5 * (1.0 + np.max(np.abs(u))) / (1.0 + np.max(np.abs(v)))
            want = central_difference_derivative(spec_1d, u, v, delta)
            got = mesh_1d.cell_volume * float(fn.energy_gradient(spec_1d, u) @ v)
            assert got == pytest.approx(want, rel=1e-6)

    def test_euler_identity_power(self, spec_1d, mesh_1d):
        nl = spec_1d.nonlinearity
        vol = mesh_1d.cell_volume
        ni = mesh_1d.n_interior
        for seed in range(5):
            u = random_grid_function(mesh_1d, 60 + seed)
            lhs = vol * float(fn.energy_gradient(spec_1d, u) @ u)
            f_mass = vol * float(np.sum(fn.F_eval(nl, u[:ni])))
            rhs = fn.bilinear_form(spec_1d.op, u, u) - nl.p * f_mass
            assert lhs == pytest.approx(rhs, rel=1e-11)

    def test_negative_part_direction_vanishes(self, spec_1d, mesh_1d):
        u = np.abs(random_grid_function(mesh_1d, 9))
        u_minus = np.maximum(-u, 0.0)
        pairing = mesh_1d.cell_volume * float(fn.energy_gradient(spec_1d, u) @ u_minus)
        assert pairing == 0.0


class TestWeakResidual:
    def test_constant_solution(self, spec_1d, mesh_1d):
        assert fn.weak_residual(spec_1d, np.ones(mesh_1d.n_total)) <= 1e-12

    def test_zero_solution(self, spec_1d, mesh_1d):
        assert fn.weak_residual(spec_1d, np.zeros(mesh_1d.n_total)) == 0.0

    def test_is_sup_of_gradient(self, spec_1d, mesh_1d):
        u = random_grid_function(mesh_1d, 21)
        assert fn.weak_residual(spec_1d, u) == pytest.approx(
            np.max(np.abs(fn.energy_gradient(spec_1d, u))))
