import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coexbandit.coexistence import (
    DEFAULT_INTERVAL,
    CoexistenceParams,
    MacParams,
    ParamCache,
    airtime_corrections,
    analytic_gradient,
    cost,
    cost_from_throughputs,
    lte_throughput,
    optimal_ztilde,
    optimum,
    toff_to_ztilde,
    wifi_baseline_rate,
    wifi_throughput,
    ztilde_to_toff,
)
from coexbandit.learner import DecisionInterval
from tests.oracles import mp_cost, mp_derivative, random_params, relative_error


def simple(n=1, t_on=0.05, c1=0.0, c2=0.0, r=1.0, s=1.0):
    return CoexistenceParams(n=n, t_on=t_on, r=r, s=(s,) * n, c1=c1, c2=c2)


class TestThroughputs:
    def test_wifi_half_share(self):
        assert wifi_throughput(simple(s=50e6), 0.05) == pytest.approx(25e6)

    def test_wifi_long_off_limit(self):
        assert wifi_throughput(simple(s=50e6), 1e9) == pytest.approx(50e6, rel=1e-9)

    def test_wifi_zero_airtime(self):
        assert wifi_throughput(simple(s=50e6, c1=0.0005), 0.0005) == 0.0

    def test_wifi_rejects_below_c1(self):
        with pytest.raises(ValueError):
            wifi_throughput(simple(c1=0.001), 0.0005)

    def test_lte_half_share(self):
        assert lte_throughput(simple(r=75e6), 0.05) == pytest.approx(37.5e6)

    def test_lte_full_occupancy(self):
        p = simple(r=75e6, c2=0.01)
        assert lte_throughput(p, 0.0) == pytest.approx(75e6 * 0.04 / 0.05)

    def test_lte_all_on_time_lost(self):
        # c2 == t_on is excluded by the parameter invariants, so approach it from below
        p = simple(r=75e6, c2=0.05 - 1e-15)
        assert lte_throughput(p, 0.3) == pytest.approx(0.0, abs=1e-3)

    @given(st.floats(0.001, 10), st.floats(0.001, 10))
    def test_monotone(self, a, b):
        p = simple(r=75e6, s=30e6, c1=0.0005, c2=0.001)
        a, b = sorted((a, b))
        if a < b:
            assert wifi_throughput(p, a) < wifi_throughput(p, b)
            assert lte_throughput(p, a) > lte_throughput(p, b)


class TestCost:
    def test_known_value(self):
        expected = 2 * math.log(1.05) - math.log(0.05)
        assert cost(simple(), 0.0) == pytest.approx(expected, abs=1e-12)
        assert cost(simple(), 0.0) == pytest.approx(3.0933126, abs=1e-7)

    def test_matches_throughput_path(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            p = random_params(rng)
            z = float(rng.uniform(-6.9, 0.0))
            assert cost(p, z) == pytest.approx(cost_from_throughputs(p, z), rel=1e-12, abs=1e-12)

    def test_matches_extended_precision(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            p = random_params(rng)
            z = float(rng.uniform(-6.9, 0.0))
            assert cost(p, z) == pytest.approx(float(mp_cost(p, z)), rel=1e-12, abs=1e-11)

    def test_vectorized(self):
        p = ParamCache()(5)
        zs = np.linspace(-6.9, 0, 7)
        np.testing.assert_allclose(cost(p, zs), [cost(p, float(z)) for z in zs], rtol=1e-14)

    def test_midpoint_convexity(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            p = random_params(rng)
            a, b = rng.uniform(-10, 3, (2, 20))
            assert np.all(cost(p, (a + b) / 2) <= (cost(p, a) + cost(p, b)) / 2 + 1e-9)

    def test_scaling_shifts_by_constant(self):
        p = ParamCache()(7)
        q = p.scaled(3.0)
        zs = np.linspace(-6.9, 0, 11)
        shift = cost(p, zs) - cost(q, zs)
        np.testing.assert_allclose(shift, (p.n + 1) * math.log(3.0), rtol=1e-12)
        np.testing.assert_allclose(analytic_gradient(p, zs), analytic_gradient(q, zs), rtol=1e-14)
        assert optimal_ztilde(p) == optimal_ztilde(q)


class TestGradient:
    def test_known_value(self):
        assert analytic_gradient(simple(), 0.0) == pytest.approx(2 / 1.05 - 1, abs=1e-12)

    def test_left_limit(self):
        assert analytic_gradient(simple(n=4), -50.0) == pytest.approx(-4.0, abs=1e-12)

    def test_zero_at_optimum(self):
        p = simple(n=3, c1=0.002)
        assert analytic_gradient(p, math.log(3 * 0.052)) == pytest.approx(0.0, abs=1e-14)

    def test_matches_extended_precision_derivative(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = random_params(rng)
            z = float(rng.uniform(-6.9, 0.0))
            assert relative_error(analytic_gradient(p, z), mp_derivative(p, z)) < 1e-9

    def test_nondecreasing(self):
        p = ParamCache()(10)
        g = analytic_gradient(p, np.linspace(-10, 2, 10_000))
        assert np.all(np.diff(g) >= 0)


class TestOptimum:
    @pytest.mark.parametrize("n,c1,expected", [(10, 0.0, -0.693147), (1, 0.0, -2.995732), (5, 0.001, -1.366492)])
    def test_examples(self, n, c1, expected):
        p = simple(n=n, c1=c1)
        assert optimal_ztilde(p) == pytest.approx(expected, abs=1e-6)

    def test_toff_for_ten_stations(self):
        assert optimum(simple(n=10)).toff == pytest.approx(0.5)

    def test_clamped_to_interval(self):
        p = simple(n=30, t_on=0.1)  # unconstrained optimum log(3) > 0
        assert optimal_ztilde(p) == 0.0
        assert optimal_ztilde(p, DecisionInterval(-1, 2)) == pytest.approx(math.log(3.0))

    def test_local_minimality(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            p = random_params(rng)
            z = optimal_ztilde(p)
            if DEFAULT_INTERVAL.lower < z < DEFAULT_INTERVAL.upper:
                assert cost(p, z - 1e-3) >= cost(p, z) and cost(p, z + 1e-3) >= cost(p, z)

    def test_optimum_record(self):
        p = ParamCache()(5)
        o = optimum(p)
        assert o.toff == pytest.approx(math.exp(o.ztilde) + p.c1)
        assert o.s_lte == pytest.approx(lte_throughput(p, o.toff))
        assert o.cost == pytest.approx(cost(p, o.ztilde))


class TestCorrections:
    def test_example(self):
        assert airtime_corrections(2e-3, 0.5, 1e-3) == pytest.approx((0.5e-3, 0.5e-3))

    def test_no_collisions(self):
        assert airtime_corrections(2e-3, 0.0, 1e-3) == (0.0, 0.0)

    def test_ceiling(self):
        assert airtime_corrections(3e-3, 1.0, 1e-3)[1] == pytest.approx(2e-3)

    @given(st.floats(1e-5, 1e-2), st.floats(0, 1), st.floats(1e-4, 1e-2))
    def test_bounds(self, t_fra, p, gamma):
        c1, c2 = airtime_corrections(t_fra, p, gamma)
        assert 0 <= c1 <= t_fra / 2
        assert 0 <= c2 <= t_fra / 2 + gamma + 1e-18

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            airtime_corrections(1e-3, 1.5, 1e-3)


class TestTransforms:
    def test_log_one(self):
        assert toff_to_ztilde(1.0 + 0.003, 0.003) == pytest.approx(0.0, abs=1e-15)

    def test_round_trip(self):
        assert toff_to_ztilde(ztilde_to_toff(-3.0, 0.001), 0.001) == pytest.approx(-3.0, abs=1e-12)

    def test_interval_ends(self):
        assert ztilde_to_toff(-6.9, 0.0) == pytest.approx(1.00779e-3, rel=1e-5)
        assert ztilde_to_toff(0.0, 0.002) == pytest.approx(1.002)

    def test_rejects_at_c1(self):
        with pytest.raises(ValueError):
            toff_to_ztilde(0.001, 0.001)

    @settings(max_examples=200)
    @given(st.floats(-7, 1), st.floats(0, 0.01))
    def test_inverse(self, z, c1):
        assert toff_to_ztilde(ztilde_to_toff(z, c1), c1) == pytest.approx(z, abs=1e-12)


class TestBaselineRate:
    def test_single_always_transmitting(self):
        assert wifi_baseline_rate(1.0, 9e-6, 2e-3, 2e-3, 60000, 1) == pytest.approx(60000 / 2e-3)

    def test_small_tau(self):
        rates = [wifi_baseline_rate(t, 9e-6, 2e-3, 2e-3, 60000, 3) for t in (1e-3, 1e-6, 1e-9, 1e-12)]
        assert rates == sorted(rates, reverse=True)
        assert rates[-1] < 0.01

    def test_two_stations(self):
        denom = 0.81 * 9e-6 + 0.19 * 2e-3
        assert denom == pytest.approx(3.8729e-4)
        assert wifi_baseline_rate(0.1, 9e-6, 2e-3, 2e-3, 60000, 2) == pytest.approx(0.09 * 60000 / denom)
        assert wifi_baseline_rate(0.1, 9e-6, 2e-3, 2e-3, 60000, 2) == pytest.approx(13.94e6, rel=1e-3)

    @pytest.mark.parametrize("tau", [0.0, -0.1, 1.5])
    def test_rejects_tau(self, tau):
        with pytest.raises(ValueError):
            wifi_baseline_rate(tau, 9e-6, 2e-3, 2e-3, 60000, 2)


class TestParams:
    def test_invariants(self):
        with pytest.raises(ValueError):
            CoexistenceParams(n=2, t_on=0.05, r=1.0, s=(1.0,))
        with pytest.raises(ValueError):
            CoexistenceParams(n=1, t_on=0.001, r=1.0, s=(1.0,), c2=0.002)
        with pytest.raises(ValueError):
            CoexistenceParams(n=1, t_on=0.05, r=-1.0, s=(1.0,))

    def test_default_pack(self):
        mac = MacParams()
        assert mac.t_fra == pytest.approx(60000 / 65e6 + 100e-6)
        p = CoexistenceParams.from_mac(10, mac)
        p_txa = 1 - (15 / 16) ** 10
        assert p.p_txa == pytest.approx(p_txa)
        assert p.c1 == pytest.approx(mac.t_fra / 2 * p_txa)
        assert p.c2 == pytest.approx(1e-3 * p_txa)

    def test_cache(self):
        cache = ParamCache()
        assert cache(3) is cache(3)
