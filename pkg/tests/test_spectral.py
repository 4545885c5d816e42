"""Sine-basis fields, diagonal operators, collocation, measured bounds."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from sobfrac.errors import DomainError
from sobfrac.spectral import (OperatorKind, SpectralField, apply_Bi, apply_operator,
                              collocation_grid, field_to_grid, grid_to_field,
                              measure_bounds, norm_q, project)

BASIS = math.sqrt(2.0 / math.pi)


def random_field(n=16, seed=0):
    return SpectralField(np.random.default_rng(seed).standard_normal(n))


class TestProjection:
    def test_basis_function_round_trip(self):
        got = project(lambda x: BASIS * math.sin(3 * x), 8)
        expect = np.zeros(8)
        expect[2] = 1.0
        assert np.max(np.abs(got.coeffs - expect)) <= 1e-8

    def test_zero(self):
        got = project(lambda x: 0.0, 6)
        assert np.all(got.coeffs == 0.0)

    def test_parabola_against_quadrature_oracle(self):
        f = lambda x: x * (math.pi - x)
        oracle = np.array([
            quad(lambda x: f(x) * BASIS * math.sin(n * x), 0.0, math.pi,
                 limit=200)[0]
            for n in range(1, 9)])
        got = project(f, 8)
        assert np.max(np.abs(got.coeffs - oracle)) <= 1e-6
        # oracle agrees with the odd-mode closed form 4 sqrt(2/pi) / n^3
        closed = np.array([4.0 * BASIS / n ** 3 if n % 2 else 0.0
                           for n in range(1, 9)])
        assert np.max(np.abs(oracle - closed)) <= 1e-10

    def test_domain(self):
        with pytest.raises(DomainError):
            project(lambda x: x, 0)


class TestOperators:
    def test_l_inverse_pair(self):
        u = random_field()
        round_trip = apply_operator(OperatorKind("L"),
                                    apply_operator(OperatorKind("L_inv"), u))
        assert np.max(np.abs(round_trip.coeffs - u.coeffs)) <= 1e-12

    def test_l_inv_on_mode_two(self):
        got = apply_operator(OperatorKind("L_inv"), SpectralField.unit(4, 2))
        assert abs(got.coeffs[1] - 0.2) <= 1e-15

    def test_semigroup_value(self):
        got = apply_operator(OperatorKind("Q", t=1.0), SpectralField.unit(4, 1))
        assert abs(got.coeffs[0] - math.exp(-0.5)) <= 1e-15

    def test_generator_consistency(self):
        u = random_field(seed=3)
        lhs = apply_operator(OperatorKind("E"), u)
        rhs = apply_operator(OperatorKind("L"), apply_operator(OperatorKind("A"), u))
        assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-12

    def test_semigroup_law(self):
        u = random_field(seed=4)
        lhs = apply_operator(OperatorKind("Q", t=0.3),
                             apply_operator(OperatorKind("Q", t=0.9), u))
        rhs = apply_operator(OperatorKind("Q", t=1.2), u)
        assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-12

    def test_fractional_power_composition(self):
        u = random_field(seed=5)
        lhs = apply_operator(OperatorKind("A_pow", q=0.3),
                             apply_operator(OperatorKind("A_pow", q=0.45), u))
        rhs = apply_operator(OperatorKind("A_pow", q=0.75), u)
        assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-12

    def test_semigroup_contraction_rate(self):
        u = random_field(seed=6)
        for t in (0.1, 0.5, 2.0):
            decayed = apply_operator(OperatorKind("Q", t=t), u)
            assert decayed.norm() <= math.exp(-t / 2.0) * u.norm() * (1 + 1e-12)

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            OperatorKind("bogus")
        with pytest.raises(DomainError):
            OperatorKind("Q", t=-1.0)
        with pytest.raises(DomainError):
            OperatorKind("A_pow", q=1.0)


class TestCollocation:
    def test_round_trip(self):
        u = random_field(seed=7)
        back = grid_to_field(field_to_grid(u), u.mode_count)
        assert np.max(np.abs(back.coeffs - u.coeffs)) <= 1e-8

    def test_first_derivative_of_mode_one(self):
        vals = apply_Bi(1, SpectralField.unit(4, 1))
        x = collocation_grid(16)
        assert np.max(np.abs(vals - BASIS * np.cos(x))) <= 1e-10

    def test_second_derivative_eigenrelation(self):
        vals = apply_Bi(2, SpectralField.unit(4, 3))
        x = collocation_grid(16)
        assert np.max(np.abs(vals + 9.0 * BASIS * np.sin(3 * x))) <= 1e-10

    def test_derivative_of_zero(self):
        assert np.all(apply_Bi(1, SpectralField.zero(4)) == 0.0)

    def test_order_above_r_max(self):
        with pytest.raises(DomainError):
            apply_Bi(3, SpectralField.unit(4, 1))


class TestBounds:
    def test_measured_constants(self):
        b = measure_bounds(16, np.linspace(0.0, 1.0, 9)[1:])
        assert b.C1 == 0.5
        assert b.C2 == 256.0
        assert b.M0 == 1.0
        # tight envelope constant q^q e^(-q) for the continuum of symbols
        assert abs(b.Mq - 0.25 ** 0.25 * math.exp(-0.25)) <= 1e-12

    def test_q_norm_definition(self):
        u = SpectralField.unit(4, 2)
        assert abs(norm_q(u, 0.25) - (4.0 / 5.0) ** 0.25) <= 1e-15

    def test_identity_at_zero(self):
        sym = apply_operator(OperatorKind("Q", t=0.0), SpectralField.unit(16, 7))
        assert sym.coeffs[6] == 1.0

    def test_norm_at_one(self):
        # mode 1 dominates: ||Q(1)|| = exp(-1/2)
        n = np.arange(1, 17)
        sym = np.exp(-n * n / (1.0 + n * n))
        assert abs(np.max(sym) - math.exp(-0.5)) <= 1e-15
