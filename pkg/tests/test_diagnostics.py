import math

import numpy as np
import pytest
from scipy.optimize import brentq

from frontforge import diagnostics as dg
from frontforge import measure, nonlinearity as nlm, solver
from frontforge.errors import (DivergentMoment, TailTooHeavy,
                               UnboundedSupport, WrongClass)
from frontforge.operators import Grid, Profile

UNIFORM = measure.uniform(1.0)
CUBIC = nlm.cubic_bistable(0.3)
GRID = Grid(20.0, 801)


@pytest.fixture(scope="module")
def uniform_front():
    return solver.newton_solve(UNIFORM, CUBIC, GRID)


@pytest.fixture(scope="module")
def ignition_front():
    g = Grid(40.0, 1601)
    rep = solver.continue_in_epsilon(measure.fractional(s=0.75),
                                     nlm.ignition(0.3), g)
    sol = rep.solutions[-1]
    m_eps = measure.truncate_small(measure.fractional(s=0.75), sol.epsilon)
    return sol, m_eps


class TestIdentityChecks:
    def test_energy_identity_and_inequalities(self, uniform_front):
        rep = dg.identity_checks(uniform_front, UNIFORM, CUBIC)
        assert rep.relative_residual1 <= 1e-2
        assert rep.slack2 == 0.0
        assert rep.slack3 == 0.0
        assert rep.slack4 == 0.0

    def test_well_balanced_energy_near_zero(self):
        sol = solver.newton_solve(UNIFORM, nlm.cubic_bistable(0.5), GRID)
        rep = dg.identity_checks(sol, UNIFORM, nlm.cubic_bistable(0.5))
        assert abs(rep.energy_lhs) <= 1e-4

    def test_needs_finite_mass(self, uniform_front):
        with pytest.raises(UnboundedSupport):
            dg.identity_checks(uniform_front, measure.fractional(s=0.75),
                               CUBIC)


class TestDispersionRoot:
    def test_uniform_oracle(self):
        rep = dg.dispersion_root(UNIFORM, -0.3)
        oracle = brentq(lambda r: 2.0 * (math.sinh(r) / r - 1.0) - 0.15,
                        0.1, 2.0, xtol=1e-14)
        assert rep.rate == pytest.approx(oracle, abs=1e-10)
        assert rep.rate == pytest.approx(0.664, abs=1e-3)
        assert rep.residual <= 1e-12

    def test_bracket_is_sign_changing(self):
        rep = dg.dispersion_root(UNIFORM, -0.3)
        a, b = rep.bracket
        assert a < rep.rate < b

    def test_root_shrinks_with_slope(self):
        rates = [dg.dispersion_root(UNIFORM, s).rate
                 for s in (-0.3, -0.1, -0.03, -0.01)]
        assert all(r1 > r2 for r1, r2 in zip(rates, rates[1:]))

    def test_amplitude_increase_decreases_root(self):
        heavy = measure.density(lambda z: 2.0 * np.ones_like(z),
                                support_radius=1.0)
        assert dg.dispersion_root(heavy, -0.3).rate < \
            dg.dispersion_root(UNIFORM, -0.3).rate

    def test_unbounded_support_rejected(self):
        with pytest.raises(UnboundedSupport):
            dg.dispersion_root(measure.fractional(s=0.75), -0.3)


class TestTailRateFit:
    def test_exact_exponential(self):
        g = Grid(20.0, 2001)
        vals = np.minimum(1.0, np.exp(-2.0 * g.nodes))
        p = Profile(g, vals, 1.0, 0.0)
        sol = solver.FrontSolution(speed=0.1, profile=p, residual_norm=0.0,
                                   iterations=0, converged=True,
                                   monotone=True, epsilon=0.0,
                                   phase_level=0.5)
        fit = dg.tail_rate_fit(sol)
        assert fit.rate == pytest.approx(2.0, abs=1e-6)
        assert fit.exponential

    def test_algebraic_tail_flagged(self):
        g = Grid(12000.0, 4001)
        vals = (1.0 + np.maximum(g.nodes, 0.0)) ** -2
        p = Profile(g, vals, 1.0, 0.0)
        sol = solver.FrontSolution(speed=0.1, profile=p, residual_norm=0.0,
                                   iterations=0, converged=True,
                                   monotone=True, epsilon=0.0,
                                   phase_level=0.5)
        fit = dg.tail_rate_fit(sol)
        assert not fit.exponential

    def test_solved_front_beats_supersolution_rate(self, uniform_front):
        rate_theory = dg.dispersion_root(UNIFORM, -0.3).rate
        fit = dg.tail_rate_fit(uniform_front)
        assert fit.exponential
        assert fit.rate >= 0.95 * rate_theory


class TestChenConstants:
    def test_synthetic_arithmetic(self):
        # theta = 0.3, window moment 1, reaction floor 0.1
        sigma0 = (math.sqrt(0.3 ** 2 + 2.0 * 1.0 * 0.1) - 0.3) / 2.0
        assert sigma0 == pytest.approx(0.11926, abs=1e-5)
        assert 1.0 * sigma0 ** 2 + 0.3 * sigma0 == pytest.approx(0.05,
                                                                 abs=1e-12)

    def test_fixture_constants(self, uniform_front):
        cc = dg.chen_upper_bound(UNIFORM, CUBIC)
        assert cc.identity_defect() <= 1e-12
        assert cc.rho == pytest.approx(0.3 / 8.0)
        assert cc.reaction_floor > 0.0
        assert cc.c_bar > 0.0
        assert uniform_front.speed <= cc.c_bar

    def test_wrong_class(self):
        with pytest.raises(WrongClass):
            dg.chen_upper_bound(UNIFORM, nlm.allee_monostable(2.0))

    def test_supersolution_audit_nonnegative(self):
        cc = dg.chen_upper_bound(UNIFORM, CUBIC)
        audit = dg.supersolution_audit(UNIFORM, CUBIC, cc)
        assert audit.min_slack >= -1e-6


class TestTruncatedLowerBound:
    def test_bound_below_full_speed(self, uniform_front):
        tb = dg.truncated_lower_bound(UNIFORM, CUBIC, GRID, r=0.97)
        assert tb.solution.converged
        assert tb.gamma == pytest.approx(0.9, abs=1e-9)
        assert tb.c_low <= uniform_front.speed

    def test_full_radius_recovers_speed(self, uniform_front):
        tb = dg.truncated_lower_bound(UNIFORM, CUBIC, GRID, r=1.0)
        assert abs(tb.c_low - uniform_front.speed) <= 1e-6

    def test_monotone_in_radius(self):
        lows = [dg.truncated_lower_bound(UNIFORM, CUBIC, GRID, r=r).c_low
                for r in (0.97, 0.985, 1.0)]
        assert all(a <= b + 1e-10 for a, b in zip(lows, lows[1:]))

    def test_tail_too_heavy(self):
        with pytest.raises(TailTooHeavy):
            dg.truncated_lower_bound(UNIFORM, CUBIC, GRID, r=0.9)


class TestIgnitionIdentity:
    def test_fixture_residual_and_routes(self, ignition_front):
        sol, m_eps = ignition_front
        ident = dg.ignition_identity(sol, m_eps)
        assert ident.relative_residual <= 2e-2
        assert ident.routes_gap <= 1e-3 * abs(ident.lhs)

    def test_even_bump_flux_vanishes(self):
        g = Grid(20.0, 801)
        vals = np.exp(-g.nodes ** 2)
        p = Profile(g, vals, 0.0, 0.0)
        sol = solver.FrontSolution(speed=0.0, profile=p, residual_norm=0.0,
                                   iterations=0, converged=True,
                                   monotone=False, epsilon=0.0,
                                   phase_level=1.0)
        ident = dg.ignition_identity(sol, UNIFORM)
        assert ident.lhs == 0.0
        assert abs(ident.transcribed) <= 1e-12
        assert abs(ident.direct) <= 1e-12

    def test_divergent_moment_guard(self, uniform_front):
        with pytest.raises(DivergentMoment):
            dg.ignition_identity(uniform_front, measure.fractional(s=0.4))


class TestAntiderivativeCheck:
    def test_cumulative_integration_of_exponential(self):
        x = np.linspace(0.0, 30.0, 90001)
        h = x[1] - x[0]
        vals = np.exp(-x)
        v = dg._cumulative_from_right(vals, h)
        assert np.max(np.abs(v - (np.exp(-x) - np.exp(-30.0)))) <= 1e-8

    def test_fixture_structure(self, uniform_front):
        rep = dg.antiderivative_check(uniform_front, UNIFORM, CUBIC)
        assert rep.w_convex
        assert rep.min_second_difference >= -1e-9
        assert rep.first_order_residual <= 5e-3 * rep.sup_v
        assert rep.second_order_residual <= 5e-3 * rep.sup_w

    def test_needs_bounded_support(self, uniform_front):
        with pytest.raises(UnboundedSupport):
            dg.antiderivative_check(uniform_front,
                                    measure.fractional(s=0.75), CUBIC)
