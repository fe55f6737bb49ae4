"""Bound functionals against closed forms and a primal grid-search oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nminus.functionals import (
    annulus_area,
    averaged_orlicz_norm,
    disk_square_area,
    graph_lambda,
    graph_m,
    luxemburg_norm,
    mu_sequence,
    mv_functional,
    mz94_functional,
    orlicz_a,
    orlicz_a_inv,
    orlicz_b,
    shargorodsky_functional,
    weak_l1,
    zeta_sequence,
)
from nminus.potentials import (
    EdgePotentialField,
    EffectivePotential1D,
    LatticePotential,
    edge_origin_distance,
    lift_lattice,
    make_family,
)


def a_inv_bisect(y, lo=0.0, hi=64.0, steps=200):
    """Independent bisection oracle for the inverse of exp(t) - t - 1."""
    while orlicz_a(hi) < y:
        hi *= 2
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if orlicz_a(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def newton_a_inv(y):
    t = np.sqrt(2.0 * np.asarray(y, dtype=float))  # A(t) >= t^2/2, so t0 >= root
    for _ in range(60):
        f = np.expm1(t) - t - y
        t = t - f / np.maximum(np.expm1(t), 1e-300)
    return t


def brute_force_averaged_norm(values, measures, domain, rounds=24, pts=13):
    """Primal grid-zoom maximizer of sum(m v g) on the budget surface.

    The last coordinate is eliminated through the budget, the rest are
    searched on a shrinking grid; independent of the dual formula.
    """
    v = np.asarray(values, float)
    m = np.asarray(measures, float)
    k = v.size
    if k == 0:
        return 0.0
    if k == 1:
        return float(m[0] * v[0] * a_inv_bisect(domain / m[0]))
    caps = np.array([a_inv_bisect(domain / mi) for mi in m[:-1]])
    lo = np.zeros(k - 1)
    hi = caps.copy()
    best = 0.0
    for _ in range(rounds):
        axes = [np.linspace(lo[i], hi[i], pts) for i in range(k - 1)]
        grids = np.meshgrid(*axes, indexing="ij")
        g_free = np.stack([g.reshape(-1) for g in grids], axis=-1)
        spent = g_free @ (m[:-1] * 0.0)  # placeholder, replaced below
        spent = np.sum(m[:-1] * (np.expm1(g_free) - g_free), axis=-1)
        rem = (domain - spent) / m[-1]
        feasible = rem >= 0
        g_last = np.zeros_like(rem)
        g_last[feasible] = newton_a_inv(rem[feasible])
        val = np.sum(m[:-1] * v[:-1] * g_free, axis=-1) + m[-1] * v[-1] * g_last
        val[~feasible] = -np.inf
        arg = int(np.argmax(val))
        best = max(best, float(val[arg]))
        center = g_free[arg]
        width = (hi - lo) * (2.0 / (pts - 1))
        lo = np.maximum(center - width, 0.0)
        hi = np.minimum(center + width, caps)
    return best


class TestOrlicz:
    def test_complementarity_spot_check(self):
        s = np.linspace(0.0, 4.0, 41)
        t = np.linspace(0.0, 4.0, 41)
        ss, tt = np.meshgrid(s, t)
        assert np.all(ss * tt <= orlicz_a(ss) + orlicz_b(tt) + 1e-12)

    def test_pair_object_and_convexity(self):
        from nminus.functionals import OrliczPair

        pair = OrliczPair()
        assert pair.a(0.0) == pair.b(0.0) == 0.0
        assert pair.a_inv(pair.a(1.7)) == pytest.approx(1.7, abs=1e-12)
        t = np.linspace(0.0, 6.0, 200)
        for f in (pair.a, pair.b):
            vals = f(t)
            # midpoint convexity on the grid
            assert np.all(vals[1:-1] <= (vals[:-2] + vals[2:]) / 2 + 1e-12)

    def test_vanish_to_second_order(self):
        for f in (orlicz_a, orlicz_b):
            assert f(0.0) == 0.0
            assert f(1e-8) < 1e-15

    def test_a_inv(self):
        for y in (0.5, 1.0, 10.0, 123.4):
            assert orlicz_a_inv(y) == pytest.approx(a_inv_bisect(y), abs=1e-12)

    def test_unit_square_in_measure_ten(self):
        r = averaged_orlicz_norm([1.0], [1.0], 10.0)
        assert abs(r.value - a_inv_bisect(10.0)) < 1e-8
        assert r.residual <= 1e-9

    def test_constant_function(self):
        c, e = 2.5, 7.0
        r = averaged_orlicz_norm([c], [e], e)
        assert r.value == pytest.approx(c * e * orlicz_a_inv(1.0), rel=1e-12)

    def test_zero(self):
        assert averaged_orlicz_norm([0.0], [1.0], 5.0).value == 0.0
        assert averaged_orlicz_norm([], [], 5.0).value == 0.0

    @pytest.mark.parametrize("pieces", [2, 3, 5])
    def test_dual_matches_brute_force(self, pieces):
        rng = np.random.default_rng(pieces)
        for _ in range(3):
            v = rng.uniform(0.2, 5.0, size=pieces)
            m = rng.uniform(0.2, 2.0, size=pieces)
            domain = float(np.sum(m) * rng.uniform(1.0, 3.0))
            got = averaged_orlicz_norm(v, m, domain).value
            want = brute_force_averaged_norm(v, m, domain)
            assert got == pytest.approx(want, abs=1e-6 * max(got, 1.0))

    def test_dual_feasibility_residual(self):
        rng = np.random.default_rng(9)
        v = rng.uniform(0.1, 8.0, size=6)
        m = rng.uniform(0.1, 3.0, size=6)
        r = averaged_orlicz_norm(v, m, float(np.sum(m) * 1.7))
        assert r.residual <= 1e-9

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.25, 4.0))
    def test_homogeneity(self, seed, c):
        rng = np.random.default_rng(seed)
        v = rng.uniform(0.1, 5.0, size=4)
        m = rng.uniform(0.1, 2.0, size=4)
        e = float(np.sum(m) * 2)
        base = averaged_orlicz_norm(v, m, e).value
        scaled = averaged_orlicz_norm(c * v, m, e).value
        assert scaled == pytest.approx(c * base, rel=1e-10)

    def test_luxemburg_equivalent_scale(self):
        # equivalent norms: ratio bounded on a spread of inputs
        rng = np.random.default_rng(4)
        for _ in range(5):
            v = rng.uniform(0.1, 5.0, size=3)
            m = rng.uniform(0.1, 2.0, size=3)
            e = float(np.sum(m))
            av = averaged_orlicz_norm(v, m, e).value
            lux = luxemburg_norm(v, m)
            assert 0.1 < av / (lux * e) < 10.0


class TestSequences:
    def test_zeta_unit_center(self):
        g = EffectivePotential1D(
            np.array([-1.0, 1.0]), np.array([1.0, 1.0]), "jacobian", 0.0
        )
        z = zeta_sequence(g)
        assert z.values[0] == pytest.approx(2.0, abs=1e-14)
        assert np.all(z.values[1:] == 0.0)

    def test_zeta_unit_on_1_e(self):
        e = math.e
        eps = 1e-12
        g = EffectivePotential1D(
            np.array([-4.0, 1.0 - eps, 1.0, e, e + eps, 4.0]),
            np.array([0.0, 0.0, 1.0, 1.0, 0.0, 0.0]),
            "jacobian",
            0.0,
        )
        z = zeta_sequence(g)
        oracle, _ = quad(lambda t: t, 1.0, e)
        assert z.values[1] == pytest.approx(oracle, rel=1e-9)
        assert z.values[1] == pytest.approx((e * e - 1) / 2, rel=1e-9)

    def test_zeta_zero(self):
        g = EffectivePotential1D(
            np.array([-2.0, 2.0]), np.array([0.0, 0.0]), "jacobian", 0.0
        )
        assert np.all(zeta_sequence(g).values == 0.0)

    def test_weak_l1_examples(self):
        # sup over an s-grid agrees with the rearrangement formula
        for seq, want in [((3, 1, 1), 3.0), ((2, 2), 4.0), ((), 0.0)]:
            a = np.asarray(seq, float)
            got = weak_l1(a)
            s_grid = np.linspace(1e-3, 5.0, 20_001)
            sup = max((s * np.sum(a > s) for s in s_grid), default=0.0)
            assert got == want
            assert sup <= got + 1e-3

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.0, 100.0), max_size=12))
    def test_weak_l1_below_l1(self, seq):
        assert weak_l1(seq) <= sum(seq) + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0.0, 9.0), max_size=8), st.floats(0.1, 7.0))
    def test_weak_l1_homogeneous(self, seq, c):
        assert weak_l1([c * x for x in seq]) == pytest.approx(
            c * weak_l1(seq), rel=1e-12
        )


class TestMuSequence:
    def test_constant_on_middle_annulus(self):
        v = make_family("annulus", {"r_inner": 1.0, "r_outer": 2.0})
        mu = mu_sequence(v)
        assert mu.values[1] == pytest.approx(3 * math.pi * orlicz_a_inv(1.0), rel=1e-9)
        assert mu.values[0] == 0.0
        assert all(x == 0.0 for x in mu.values[2:])

    def test_zero_potential(self):
        v = make_family("radial-indicator", {"radius": 1.0, "value": 0.0})
        assert np.all(mu_sequence(v).values == 0.0)

    def test_lift_single_site_support(self):
        mu = mu_sequence(lift_lattice(LatticePotential({(0, 0): 1.0})))
        assert mu.values[0] > 0 and mu.values[1] > 0
        assert all(x == 0.0 for x in mu.values[2:])

    def test_annuli_cover_support_once(self):
        # clipped square areas over all annuli add to the full square
        for square in [(0, 0), (2, 1), (-3, 1)]:
            total = sum(
                disk_square_area(2.0**k, *square)
                - disk_square_area(2.0 ** (k - 1) if k else 0.0, *square)
                for k in range(6)
            )
            assert total == pytest.approx(1.0, abs=1e-9)
        assert annulus_area(0) == pytest.approx(math.pi)
        assert annulus_area(3) == pytest.approx(math.pi * (64 - 16))


class TestWeightedFunctionals:
    def test_mv(self):
        assert mv_functional(LatticePotential({(0, 0): 7.0})) == pytest.approx(
            7 * math.log(2)
        )
        assert mv_functional(LatticePotential({(3, 4): 1.0})) == pytest.approx(
            math.log(7)
        )
        assert mv_functional(LatticePotential({})) == 0.0

    def test_mz94_log_integral_annulus(self):
        v = make_family("annulus", {"r_inner": 1.0, "r_outer": 2.0})
        t = mz94_functional(v)
        oracle = 2 * math.pi * quad(lambda r: math.log(r) * r, 1.0, 2.0)[0]
        assert t.log_integral == pytest.approx(oracle, rel=1e-10)
        assert t.log_integral == pytest.approx(
            2 * math.pi * (2 * math.log(2) - 0.75), rel=1e-10
        )

    def test_mz94_log_integral_indicator(self):
        v = make_family("radial-indicator", {"radius": 1.0})
        t = mz94_functional(v)
        assert t.log_integral == pytest.approx(math.pi / 2, rel=1e-10)

    def test_mz94_zero(self):
        v = make_family("radial-indicator", {"radius": 1.0, "value": 0.0})
        t = mz94_functional(v)
        assert t.mu_l1 == 0.0 and t.log_integral == 0.0

    def test_mz94_lift_against_2d_quadrature(self):
        from scipy.integrate import dblquad

        v0 = LatticePotential({(0, 0): 2.0, (3, 4): 1.5})
        got = mz94_functional(lift_lattice(v0)).log_integral
        f = lambda y, x: abs(math.log(math.hypot(x, y)))
        want = 2.0 * dblquad(f, 0, 1, 0, 1)[0] + 1.5 * dblquad(f, 3, 4, 4, 5)[0]
        assert got == pytest.approx(want, rel=1e-6)

    def test_sharg_radial(self):
        v = make_family("radial-indicator", {"radius": 1.0})
        t = shargorodsky_functional(v)
        assert t.x_norm_term == 0.0
        assert t.weak_l1_term > 0

    def test_sharg_zero(self):
        v = make_family("radial-indicator", {"radius": 1.0, "value": 0.0})
        t = shargorodsky_functional(v)
        assert (t.weak_l1_term, t.x_norm_term) == (0.0, 0.0)

    def test_sharg_homogeneous(self):
        v1 = make_family("radial-indicator", {"radius": 1.0, "value": 1.0})
        v3 = make_family("radial-indicator", {"radius": 1.0, "value": 3.0})
        t1, t3 = shargorodsky_functional(v1), shargorodsky_functional(v3)
        assert t3.weak_l1_term == pytest.approx(3 * t1.weak_l1_term, rel=1e-10)
        lift1 = lift_lattice(LatticePotential({(0, 0): 1.0, (1, 1): 2.0}))
        lift2 = lift_lattice(LatticePotential({(0, 0): 2.0, (1, 1): 4.0}))
        s1, s2 = shargorodsky_functional(lift1), shargorodsky_functional(lift2)
        assert s2.x_norm_term == pytest.approx(2 * s1.x_norm_term, rel=1e-9)
        assert s2.weak_l1_term == pytest.approx(2 * s1.weak_l1_term, rel=1e-9)

    def test_sharg_luxemburg_alternative(self):
        lift = lift_lattice(LatticePotential({(0, 0): 1.0}))
        av = shargorodsky_functional(lift, circle_norm="averaged")
        lux = shargorodsky_functional(lift, circle_norm="luxemburg")
        assert av.x_norm_term > 0 and lux.x_norm_term > 0

    def test_sharg_half_disk_closed_form(self):
        # v = c on the upper half plane inside r <= R: the non-radial part has
        # magnitude c/2 on every circle, so the per-circle norm is constant,
        # (c/2) * 2pi * Ainv(1), and the x-norm integrates it against r dr
        import numpy as np
        from nminus.potentials import PlanePotential, PolarGrid

        c, R = 3.0, 2.0
        n_r, n_th = 2048, 512
        t = np.linspace(np.log(1e-8 * R), np.log(R), n_r)
        theta = np.arange(n_th) * (2 * np.pi / n_th)
        vals = np.where(theta[None, :] < np.pi, c, 0.0) * np.ones((n_r, 1))
        v = PlanePotential(
            "polar-grid", {}, support_radius=R, grid=PolarGrid(t, theta, vals)
        )
        got = shargorodsky_functional(v).x_norm_term
        want = (c / 2) * 2 * math.pi * orlicz_a_inv(1.0) * R * R / 2
        assert got == pytest.approx(want, rel=1e-3)

    def test_mz94_polar_grid_path_matches_analytic(self):
        import numpy as np
        from nminus.potentials import PlanePotential, PolarGrid, sample_polar

        analytic = make_family("annulus", {"r_inner": 1.0, "r_outer": 2.0})
        g = sample_polar(analytic, n_radial=4096, n_angular=16)
        sampled = PlanePotential("polar-grid", {}, support_radius=2.0, grid=g)
        got = mz94_functional(sampled).log_integral
        want = mz94_functional(analytic).log_integral
        assert got == pytest.approx(want, rel=2e-3)
        mu_s = mu_sequence(sampled).values
        mu_a = mu_sequence(analytic).values
        assert mu_s[1] == pytest.approx(mu_a[1], rel=2e-3)


class TestGraphFunctionals:
    def test_lambda_examples(self):
        assert graph_lambda(
            EdgePotentialField({((0, 0), (1, 0)): 1.0})
        ) == pytest.approx(math.log(2))
        assert graph_lambda(
            EdgePotentialField({((3, 0), (4, 0)): 1.0})
        ) == pytest.approx(math.log(5))
        assert graph_lambda(EdgePotentialField({})) == 0.0

    def test_m_closed_form(self):
        v = EdgePotentialField({((3, 0), (4, 0)): 1.0})
        want = 6 * math.log(6) - 5 * math.log(5) - 1
        assert graph_m(v) == pytest.approx(want, rel=1e-12)
        assert graph_m(EdgePotentialField({})) == 0.0

    def test_ordering_lambda_m_upper(self):
        for seed in range(8):
            v = make_family("edge-random", {"half_width": 3, "count": 5}, seed=seed)
            lam, m_val = graph_lambda(v), graph_m(v)
            upper = sum(
                mass * math.log(4.0 + edge_origin_distance(e))
                for e, mass in v.masses.items()
            )
            assert lam <= m_val <= upper

    def test_homogeneity(self):
        v = make_family("edge-random", {"half_width": 2, "count": 3}, seed=1)
        assert graph_lambda(v.scaled(2.0)) == pytest.approx(2 * graph_lambda(v))
        assert graph_m(v.scaled(2.0)) == pytest.approx(2 * graph_m(v))
