import math

import numpy as np
import pytest

from frontforge import measure, operators
from frontforge.errors import GridTooCoarse, UnboundedSupport
from frontforge.operators import Grid, Profile, profile_from_function

UNIFORM = measure.uniform(radius=1.0)
FRACTIONAL = measure.fractional(s=0.75)


def brute_force_apply(m, fn, xs, left, right, delta, half_length,
                      n_quad=200000):
    """Oracle: dense midpoint-rule evaluation of the symmetrized jump
    integral on an exactly evaluable function, independent of the assembly.
    Beyond [-half_length, half_length] the function is continued by its
    far-field constants, matching the profile extension contract."""
    zmax = min(m.support_radius, 4.0 * half_length)
    lo = max(m.epsilon, delta)
    near_moment = 0.0
    if lo == 0.0 and isinstance(m.kind, measure.FractionalKind):
        # midpoint rule cannot resolve the singular origin; use the series
        # pair(z) ~ z^2 f''(x) below z0 with the exact second moment
        lo = 1e-2
        near_moment = 2.0 * measure._half_moment(m, 2, 0.0, lo)
    z = np.linspace(lo, zmax, n_quad + 1)
    zm = 0.5 * (z[1:] + z[:-1])
    dz = np.diff(z)
    k = m.kind
    if isinstance(k, measure.FractionalKind):
        w = k.amplitude * zm ** (-1.0 - 2.0 * k.s) * dz
    else:
        w = k.density(zm) * dz
        w[zm > k.support_radius] = 0.0

    def ext(y):
        vals = np.asarray(fn(np.clip(y, -half_length, half_length)))
        vals = np.where(y < -half_length, left, vals)
        return np.where(y > half_length, right, vals)

    out = np.empty(len(xs))
    tail = measure._half_moment(m, 0, max(zmax, lo), math.inf)
    for i, x in enumerate(xs):
        fx = float(fn(np.asarray(x)))
        out[i] = np.sum((ext(x + zm) + ext(x - zm) - 2.0 * fx) * w)
        out[i] += tail * (left + right - 2.0 * fx)
        if near_moment:
            d = 1e-4
            fpp = (float(fn(np.asarray(x + d))) + float(fn(np.asarray(x - d)))
                   - 2.0 * fx) / d ** 2
            out[i] += 0.5 * near_moment * fpp
    return out


class TestAnnihilationOfConstants:
    @pytest.mark.parametrize("m", [UNIFORM, FRACTIONAL,
                                   measure.fractional(s=0.25),
                                   measure.truncate_small(FRACTIONAL, 0.05)])
    @pytest.mark.parametrize("delta", [0.0, 0.1])
    def test_constant_profile(self, m, delta):
        g = Grid(10.0, 401)
        p = Profile(g, np.full(401, 0.7), 0.7, 0.7)
        out = operators.apply(m, p, delta)
        assert np.max(np.abs(out)) <= 1e-12 * 0.7


class TestLinearAndQuadratic:
    def test_linear_window_annihilated(self):
        g = Grid(6.0, 241)
        p = profile_from_function(g, lambda x: np.clip(x, -4.0, 4.0))
        out = operators.apply(UNIFORM, p)
        interior = np.abs(g.nodes) <= 2.9  # >= 1 away from the window edges
        assert np.max(np.abs(out[interior])) <= 1e-12

    @pytest.mark.parametrize("m,expected", [
        (UNIFORM, 2.0 / 3.0),                       # integral of z^2 on [-1,1]
        (measure.restrict(FRACTIONAL, 1.0), 4.0),   # 2 * integral z^(-1/2)
    ])
    def test_quadratic_window_gives_second_moment(self, m, expected):
        # the quotient interpolation is exact on quadratics at any spacing
        g = Grid(3.0, 301)
        x = g.nodes
        p = Profile(g, np.minimum(x ** 2, 4.0), 4.0, 4.0)
        out = operators.apply(m, p)
        sl = np.abs(x) <= 0.9
        assert np.max(np.abs(out[sl] - expected)) <= 1e-8 * expected


class TestAgainstBruteForce:
    @pytest.mark.parametrize("m,delta,tol", [
        (UNIFORM, 0.0, 5e-4),
        (measure.truncate_small(FRACTIONAL, 0.1), 0.0, 5e-4),
        (FRACTIONAL, 0.0, 2e-3),
        (UNIFORM, 0.15, 5e-4),
    ])
    def test_front_like_profile(self, m, delta, tol):
        def logistic(x):
            return 1.0 / (1.0 + np.exp(1.2 * np.asarray(x, dtype=float)))

        errs = []
        probe = np.linspace(-6.0, 6.0, 13)
        for N in (601, 1201):
            g = Grid(12.0, N)
            p = profile_from_function(g, logistic, 1.0, 0.0)
            got = operators.apply(m, p, delta)
            idx = np.searchsorted(g.nodes, probe)
            oracle = brute_force_apply(m, logistic, g.nodes[idx], 1.0, 0.0,
                                       delta, g.half_length)
            errs.append(np.max(np.abs(got[idx] - oracle)))
        assert errs[0] <= tol
        assert errs[1] <= 0.35 * errs[0] + 1e-9


class TestAffineDecomposition:
    def test_matrix_action_matches_apply(self):
        g = Grid(8.0, 201)
        A, w_left, w_right = operators.jacobian(UNIFORM, g)
        rng = np.random.default_rng(7)
        vals = np.clip(np.linspace(1, 0, 201) + 0.05 * rng.standard_normal(201),
                       0.0, 1.0)
        p = Profile(g, vals, 1.0, 0.0)
        direct = operators.apply(UNIFORM, p)
        via_matrix = A @ vals + w_left * 1.0 + w_right * 0.0
        assert np.max(np.abs(direct - via_matrix)) <= 1e-13

    def test_row_sums_vanish_with_farfield(self):
        g = Grid(8.0, 201)
        for m in (UNIFORM, measure.truncate_small(FRACTIONAL, 0.05)):
            A, w_left, w_right = operators.jacobian(m, g)
            resid = A.sum(axis=1) + w_left + w_right
            assert np.max(np.abs(resid)) <= 1e-12 * operators.get_assembly(
                m, g).total_seen_mass()

    def test_matrix_symmetric_for_restricted_measure(self):
        g = Grid(8.0, 201)
        m = measure.restrict(UNIFORM, 1.0)
        A, _, _ = operators.jacobian(m, g)
        assert np.max(np.abs(A - A.T)) == 0.0


class TestAdjointDefect:
    @staticmethod
    def random_compact(g, seed, margin=2.0):
        rng = np.random.default_rng(seed)
        x = g.nodes
        envelope = np.clip((g.half_length - margin - np.abs(x)) /
                           (g.half_length - margin), 0.0, 1.0) ** 2
        vals = envelope * rng.standard_normal(g.node_count)
        return Profile(g, vals, 0.0, 0.0)

    def test_defect_is_roundoff(self):
        g = Grid(8.0, 401)
        h = g.spacing
        for seed in range(5):
            phi = self.random_compact(g, seed)
            psi = self.random_compact(g, 100 + seed)
            defect = operators.adjoint_defect(UNIFORM, phi, psi, 0.1)
            nphi = math.sqrt(h * np.sum(phi.values ** 2))
            npsi = math.sqrt(h * np.sum(psi.values ** 2))
            assert defect <= 1e-10 * nphi * npsi

    def test_constant_psi(self):
        g = Grid(8.0, 401)
        phi = self.random_compact(g, 3)
        psi = Profile(g, np.full(g.node_count, 0.4), 0.4, 0.4)
        defect = operators.adjoint_defect(UNIFORM, phi, psi, 0.1)
        assert defect <= 1e-12

    def test_zero_phi(self):
        g = Grid(8.0, 401)
        phi = Profile(g, np.zeros(g.node_count), 0.0, 0.0)
        psi = self.random_compact(g, 9)
        assert operators.adjoint_defect(UNIFORM, phi, psi, 0.1) == 0.0

    def test_unbounded_support_rejected(self):
        g = Grid(8.0, 401)
        phi = self.random_compact(g, 1)
        with pytest.raises(UnboundedSupport):
            operators.adjoint_defect(measure.fractional(s=0.75), phi, phi, 0.0)

    def test_defect_shrinks_under_refinement(self):
        defects = []
        for N in (201, 401):
            g = Grid(8.0, N)
            phi = self.random_compact(g, 11)
            psi = self.random_compact(g, 12)
            defects.append(operators.adjoint_defect(UNIFORM, phi, psi, 0.1))
        assert defects[1] <= 0.6 * defects[0] or max(defects) <= 1e-12


class TestMinimumPrinciple:
    def test_nonnegative_at_interior_global_minimum(self):
        g = Grid(10.0, 401)
        rng = np.random.default_rng(42)
        for m in (UNIFORM, measure.truncate_small(FRACTIONAL, 0.05)):
            for _ in range(10):
                vals = 0.5 + 0.3 * np.sin(g.nodes * rng.uniform(0.3, 2.0)) \
                    + 0.1 * rng.standard_normal(g.node_count)
                i = rng.integers(50, 350)
                vals[i] = vals.min() - 0.2
                p = Profile(g, vals, 1.0, 1.0)  # far-field above the minimum
                out = operators.apply(m, p, 0.0)
                assert out[i] >= -1e-12

    def test_grid_too_coarse_guard(self):
        g = Grid(10.0, 101)
        with pytest.raises(GridTooCoarse):
            operators.get_assembly(measure.fractional(s=0.95), g, 0.0)


class TestConvergence:
    def test_second_order_on_smooth_bump(self):
        def bump(x):
            return np.maximum(0.0, 1.0 - (x / 3.0) ** 2) ** 4

        m = FRACTIONAL
        results = []
        for N in (201, 401, 801, 1601):
            g = Grid(10.0, N)
            p = profile_from_function(g, bump, 0.0, 0.0)
            out = operators.apply(m, p, 0.0)
            results.append((g, out))
        errs = []
        for (gc, oc), (gf, of) in zip(results, results[1:]):
            errs.append(np.max(np.abs(oc - of[::2])))
        orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(orders) >= 1.7
