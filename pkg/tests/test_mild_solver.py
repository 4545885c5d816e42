"""Fixed-point solver tests: assembly, Picard convergence, dependence."""

import math

import numpy as np
import pytest

from sobfrac.errors import (DomainError, NonConvergenceError,
                            RejectedInstanceError)
from sobfrac.mild_solver import (Nonlinearity, ProblemSpec, Trajectory,
                                 ZERO_NONLINEARITY, apply_P, eval_f,
                                 initial_guess, nonlocal_bracket, picard_solve,
                                 sin_gradient)
from sobfrac.solution_ops import SolutionOperatorCache, s_multiplier
from sobfrac.specfun import FracOrder, gamma, mittag_leffler
from sobfrac.spectral import SpectralField, norm_q


def make_spec(alpha=0.8, n=16, m=512, u0=None, v0=None, **kw):
    u0 = u0 if u0 is not None else SpectralField(
        np.array([0.5, 0.2] + [0.0] * (n - 2)))
    v0 = v0 if v0 is not None else SpectralField.unit(n, 1)
    return ProblemSpec(FracOrder(alpha, q=0.25, p=2.0), 1.0, n, m, u0, v0, **kw)


def closed_form_mode(alpha, n, t, v0n, u0n):
    lam = n * n / (1.0 + n * n)
    bracket = v0n + t ** (1.0 - alpha) / gamma(2.0 - alpha) * u0n
    return (-(1.0 + n * n) / (n * n)
            * mittag_leffler(alpha, 1.0, -lam * t ** alpha) / (1 + n * n) * bracket)


@pytest.fixture(scope="module")
def cache16():
    return SolutionOperatorCache(FracOrder(0.8, q=0.25, p=2.0), 16)


class TestEvalF:
    def test_zero(self):
        spec = make_spec()
        out = eval_f(spec, 0.3, SpectralField(np.ones(16)))
        assert out.norm() == 0.0

    def test_sine_of_gradient_at_zero_field(self):
        spec = make_spec(nonlinearity=sin_gradient(0.5))
        out = eval_f(spec, 0.0, SpectralField.zero(16))
        assert out.norm() <= 1e-14

    def test_growth_bound(self):
        spec = make_spec(nonlinearity=sin_gradient(0.1))
        a_f = spec.nonlinearity.a_f
        rng = np.random.default_rng(0)
        for _ in range(100):
            u = SpectralField(rng.standard_normal(16))
            bound = a_f * (1.0 + len(spec.nonlinearity.b_orders) * norm_q(u, 0.25))
            assert eval_f(spec, 0.0, u).norm() <= bound * (1 + 1e-12)

    def test_custom_callable(self):
        custom = Nonlinearity("custom", b_orders=(1,),
                              fn=lambda t, grids: 0.0 * grids[0] + 1.0,
                              growth_gain=math.sqrt(math.pi))
        spec = make_spec(nonlinearity=custom)
        out = eval_f(spec, 0.0, SpectralField.zero(16))
        # discrete sine projection of the constant function: odd modes only
        assert out.coeffs[0] > 0.5
        assert abs(out.coeffs[1]) <= 1e-12


class TestNonlocalBracket:
    def test_reduces_to_v0(self):
        spec = make_spec(u0=SpectralField.zero(16))
        traj = Trajectory.zero(spec.grid, 16)
        for node in (0, 17, 512):
            out = nonlocal_bracket(spec, traj, node)
            assert (out - spec.v0).norm() <= 1e-14

    def test_kernel_closed_form(self):
        spec = make_spec(u0=SpectralField.unit(16, 1),
                         v0=SpectralField.zero(16))
        traj = Trajectory.zero(spec.grid, 16)
        alpha = 0.8
        for node in (1, 100, 512):
            t = node * spec.grid.dt
            out = nonlocal_bracket(spec, traj, node)
            expect = t ** (1 - alpha) / gamma(2 - alpha)
            assert abs(out.coeffs[0] - expect) <= 1e-10

    def test_single_term_adds_by_linearity(self):
        spec = make_spec(u0=SpectralField.zero(16),
                         v0=SpectralField.zero(16),
                         nonlocal_terms=((1.0, 0.5),))
        coeffs = np.zeros((513, 16))
        coeffs[256, 1] = 1.0  # w2 at the snapped node t = 0.5
        traj = Trajectory(spec.grid, coeffs)
        alpha = 0.8
        t = 300 * spec.grid.dt
        out = nonlocal_bracket(spec, traj, 300)
        assert abs(out.coeffs[1] - t ** (1 - alpha) / gamma(2 - alpha)) <= 1e-10

    def test_off_grid_time_warns(self):
        spec = make_spec(m=7, nonlocal_terms=((0.5, 0.33),))
        traj = Trajectory.zero(spec.grid, 16)
        with pytest.warns(UserWarning):
            nonlocal_bracket(spec, traj, 3)


class TestApplyP:
    def test_zero_data_gives_zero(self):
        spec = make_spec(u0=SpectralField.zero(16), v0=SpectralField.zero(16))
        cache = SolutionOperatorCache(spec.order, 16)
        out = apply_P(spec, cache, Trajectory.zero(spec.grid, 16))
        assert np.max(np.abs(out.coeffs)) == 0.0

    def test_mode_one_composition_symbol(self, cache16):
        # data smoothing composed with L has per-mode value -2 at n = 1
        spec = make_spec(u0=SpectralField.zero(16))
        out = apply_P(spec, cache16, Trajectory.zero(spec.grid, 16))
        for node in (0, 64, 512):
            t = node * spec.grid.dt
            expect = -2.0 * s_multiplier(cache16, t, 1)
            assert abs(out.coeffs[node, 0] - expect) <= 1e-12

    def test_fixed_point_residual(self, cache16):
        spec = make_spec(nonlocal_terms=((0.3, 0.5),),
                         nonlinearity=sin_gradient(0.1))
        traj, rep = picard_solve(spec, cache=cache16, tol=1e-8)
        again = apply_P(spec, cache16, traj)
        defect = max(
            norm_q(SpectralField(again.coeffs[m] - traj.coeffs[m]), 0.25)
            for m in range(spec.step_count + 1))
        assert defect <= 2e-8


class TestPicardSolve:
    def test_linear_instance_matches_oracle(self, cache16):
        spec = make_spec()
        traj, rep = picard_solve(spec, cache=cache16, tol=1e-10)
        assert rep.converged
        # constant map: one sweep plus the confirming sweep
        assert rep.iterations == 2
        assert rep.residual_history[-1] <= 1e-14
        ts = spec.grid.nodes()
        for n in (1, 2, 7, 16):
            for node in (0, 13, 256, 512):
                expect = closed_form_mode(0.8, n, ts[node],
                                          spec.v0.coeffs[n - 1],
                                          spec.u0.coeffs[n - 1])
                assert abs(traj.coeffs[node, n - 1] - expect) <= 1e-6

    def test_nonlinear_instance_converges(self, cache16):
        spec = make_spec(nonlocal_terms=((0.3, 0.5),),
                         nonlinearity=sin_gradient(0.1))
        traj, rep = picard_solve(spec, cache=cache16, tol=1e-8)
        assert rep.converged
        assert rep.contraction_ratio < 1.0
        hist = rep.residual_history
        assert all(b <= a for a, b in zip(hist, hist[1:]))
        # geometric decay over the last three steps
        for a, b in zip(hist[-3:], hist[-2:]):
            assert b / a < 1.0

    def test_continuous_dependence_linear_response(self, cache16):
        base = make_spec(nonlocal_terms=((0.3, 0.5),),
                         nonlinearity=sin_gradient(0.1))
        traj0, _ = picard_solve(base, cache=cache16, tol=1e-11)

        def perturbed(delta):
            u0 = SpectralField(base.u0.coeffs + np.eye(16)[0] * delta)
            spec = make_spec(u0=u0, nonlocal_terms=((0.3, 0.5),),
                             nonlinearity=sin_gradient(0.1))
            traj, _ = picard_solve(spec, cache=cache16, tol=1e-11)
            return max(norm_q(SpectralField(traj.coeffs[m] - traj0.coeffs[m]), 0.25)
                       for m in range(base.step_count + 1))

        delta = 1e-3
        d1 = perturbed(delta)
        d2 = perturbed(delta / 2.0)
        k1 = d1 / delta
        assert np.isfinite(k1) and k1 > 0.0
        assert abs(k1 / (d2 / (delta / 2.0)) - 1.0) <= 0.1

    def test_uniqueness_under_different_starts(self, cache16):
        spec = make_spec(nonlocal_terms=((0.3, 0.5),),
                         nonlinearity=sin_gradient(0.1))
        t1, _ = picard_solve(spec, cache=cache16, tol=1e-10)
        t2, _ = picard_solve(spec, cache=cache16, tol=1e-10,
                             initial=Trajectory.zero(spec.grid, 16))
        diff = max(norm_q(SpectralField(t1.coeffs[m] - t2.coeffs[m]), 0.25)
                   for m in range(spec.step_count + 1))
        assert diff <= 2e-10

    def test_non_contractive_instance_raises(self, cache16):
        spec = make_spec(nonlocal_terms=((50.0, 0.5),))
        with pytest.raises(NonConvergenceError) as err:
            picard_solve(spec, cache=cache16, tol=1e-8, max_iter=25)
        assert len(err.value.residual_history) == 25

    def test_exponent_precondition(self):
        with pytest.raises(RejectedInstanceError):
            spec = ProblemSpec(FracOrder(0.5, q=0.5, p=1.5), 1.0, 4, 8,
                               SpectralField.zero(4), SpectralField.zero(4),
                               control_count=1)
            picard_solve(spec)

    def test_forced_instance_first_order_refinement(self):
        # constant forcing exercises the discretized convolution; its error
        # against the two-parameter Mittag-Leffler closed form halves with dt
        forcing = Nonlinearity("custom", b_orders=(1,),
                               fn=lambda t, grids: 0.0 * grids[0] + 1.0,
                               growth_gain=math.sqrt(math.pi))
        errors = []
        for m in (128, 256):
            spec = make_spec(n=8, m=m, u0=SpectralField.zero(8),
                             v0=SpectralField.zero(8), nonlinearity=forcing)
            g = eval_f(spec, 0.0, SpectralField.zero(8)).coeffs
            traj, _ = picard_solve(spec, tol=1e-12)
            ts = spec.grid.nodes()
            worst = 0.0
            for n in range(1, 9):
                lam = n * n / (1.0 + n * n)
                ref = np.array([
                    g[n - 1] * t ** 0.8
                    * mittag_leffler(0.8, 1.8, -lam * t ** 0.8) / (1 + n * n)
                    for t in ts])
                worst = max(worst, np.max(np.abs(traj.coeffs[:, n - 1] - ref)))
            errors.append(worst)
        assert errors[0] / errors[1] >= 1.5

    def test_grid_consistency_checked(self, cache16):
        spec = make_spec()
        small_cache = SolutionOperatorCache(spec.order, 4)
        with pytest.raises(DomainError):
            picard_solve(spec, cache=small_cache)


class TestProblemSpecValidation:
    def test_nonlocal_ordering(self):
        with pytest.raises(DomainError):
            make_spec(nonlocal_terms=((0.3, 0.7), (0.2, 0.5)))
        with pytest.raises(DomainError):
            make_spec(nonlocal_terms=((-0.3, 0.5),))
        with pytest.raises(DomainError):
            make_spec(nonlocal_terms=((0.3, 1.5),))

    def test_mode_count_consistency(self):
        with pytest.raises(DomainError):
            ProblemSpec(FracOrder(0.8), 1.0, 8, 16,
                        SpectralField.zero(4), SpectralField.zero(8))

    def test_derivative_order_budget(self):
        bad = Nonlinearity("custom", b_orders=(3,), fn=lambda t, g: g[0])
        with pytest.raises(DomainError):
            make_spec(nonlinearity=bad)
