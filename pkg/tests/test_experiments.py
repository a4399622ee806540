import math
from dataclasses import replace

import numpy as np
import pytest

from coexbandit.coexistence import analytic_gradient
from coexbandit.experiments import (
    DynamicsEvent,
    EnvConfig,
    ExperimentPlan,
    LearnerConfig,
    AnalyticEnvironment,
    TrajectoryRecord,
    aggregate,
    bound_check_plan,
    bound_report,
    convergence_time,
    preset,
    round_losses,
    run_plan,
)


def small(**kw):
    base = dict(scenario="omega_sweep", iterations=30, replications=3)
    base.update(kw)
    return ExperimentPlan(**base)


class TestPlan:
    def test_seed_list(self):
        assert small(seed=5).seed_list() == [5, 6, 7]
        assert small(seeds=[9, 2]).seed_list() == [9, 2]

    @pytest.mark.parametrize("kw", [
        {"scenario": "bogus"},
        {"seeds": [1, 1]},
        {"switch": "sometimes"},
        {"dynamics": [DynamicsEvent(10, 3), DynamicsEvent(10, 4)]},
        {"dynamics": [DynamicsEvent(20, 3), DynamicsEvent(10, 4)]},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            small(**kw)

    def test_initial_n(self):
        plan = small(environment=EnvConfig(n=7), dynamics=[DynamicsEvent(0, 2), DynamicsEvent(5, 3)])
        assert plan.initial_n() == 2
        assert plan.n_values() == [2, 3]


class TestRun:
    def test_empty(self):
        recs = run_plan(small(iterations=0))
        assert len(recs) == 3 and all(len(r) == 0 for r in recs)

    def test_deterministic(self):
        plan = small()
        a, b = run_plan(plan), run_plan(plan)
        assert [r.rows for r in a] == [r.rows for r in b]

    def test_seed_permutation(self):
        a = run_plan(small(seeds=[4, 8]))
        b = run_plan(small(seeds=[8, 4]))
        assert a[0].rows == b[1].rows and a[1].rows == b[0].rows

    def test_parallel_matches_serial(self):
        plan = small(iterations=10)
        assert [r.rows for r in run_plan(plan, workers=2)] == [r.rows for r in run_plan(plan)]

    def test_row_bookkeeping(self):
        rec = run_plan(small(iterations=5, replications=1))[0]
        assert [r.k for r in rec.rows] == [1, 2, 3, 4, 5]
        assert [r.t for r in rec.rows] == [2, 4, 6, 8, 10]
        assert [e.t for e in rec.events] == list(range(1, 11))
        for r in rec.rows:
            assert r.toff == pytest.approx(math.exp(r.y) + (r.toff_opt - math.exp(r.z_opt)))

    def test_converges_for_ten_stations(self):
        plan = small(iterations=50, replications=5, environment=EnvConfig(n=10))
        for rec in run_plan(plan):
            last = rec.rows[-1]
            assert last.toff_opt == pytest.approx(0.5, abs=0.01)  # c1 is small next to 0.5 s
            assert abs(last.toff - last.toff_opt) < 0.02

    def test_optimum_fields_are_stationary(self):
        plan = small(dynamics=[DynamicsEvent(10, 3), DynamicsEvent(20, 1)])
        env = AnalyticEnvironment(plan.environment, plan.learner.interval)
        for r in run_plan(plan)[0].rows:
            p = env.params(r.n)
            K = plan.learner.interval
            if K.lower < r.z_opt < K.upper:
                assert abs(analytic_gradient(p, r.z_opt)) < 1e-9

    def test_switch_mid_iteration(self):
        plan = small(iterations=4, replications=1, environment=EnvConfig(n=5),
                     dynamics=[DynamicsEvent(2, 8)])
        rec = run_plan(plan)[0]
        assert [e.n for e in rec.events] == [5, 5, 5, 5, 5, 8, 8, 8]
        assert [r.n for r in rec.rows] == [5, 5, 8, 8]
        assert rec.rows[2].toff_opt != rec.rows[1].toff_opt

    def test_switch_at_update(self):
        plan = small(iterations=4, replications=1, environment=EnvConfig(n=5),
                     dynamics=[DynamicsEvent(2, 8)], switch="update")
        rec = run_plan(plan)[0]
        assert [e.n for e in rec.events] == [5, 5, 5, 5, 5, 5, 8, 8]
        assert [r.n for r in rec.rows] == [5, 5, 8, 8]
        assert round_losses(plan) == [e.n for e in rec.events]
        assert round_losses(replace(plan, switch="mid")) == [5, 5, 5, 5, 5, 8, 8, 8]

    def test_regret_column(self):
        rec = run_plan(small(iterations=20, replications=1))[0]
        reg = rec.column("regret")
        assert np.all(np.isfinite(reg))
        assert reg[-1] > 0
        assert not any(math.isnan(x) for x in reg)
        plain = run_plan(small(iterations=5, replications=1, track_regret=False))[0]
        assert all(math.isnan(x) for x in plain.column("regret"))

    def test_simulated_environment(self):
        plan = small(iterations=3, replications=1, learner=LearnerConfig(omega=1.0),
                     environment=EnvConfig(kind="sim", n=2, batch=20.0), track_regret=False)
        rec = run_plan(plan)[0]
        assert all(e.cost != e.observed for e in rec.events)
        assert all(abs(e.cost - e.observed) < 0.5 for e in rec.events)


def constant_record(value, k=4):
    from coexbandit.experiments import IterationRow

    rows = [IterationRow(k=i + 1, t=2 * i + 2, y=value, x_plus=value, x_minus=value, toff=value,
                         gradient=0.0, raw_gradient=0.0, truncated=False, n=1, s_lte=value, s_wifi_mean=value,
                         z_opt=0.0, toff_opt=0.0, s_lte_opt=1.0, s_wifi_opt=1.0, cost_gap=0.0, regret=value)
            for i in range(k)]
    return TrajectoryRecord(0, 0, rows, [])


class TestAggregate:
    def test_single(self):
        s = aggregate([constant_record(2.0)])
        np.testing.assert_array_equal(s.stats["y"]["mean"], 2.0)
        np.testing.assert_array_equal(s.stats["y"]["std"], 0.0)

    def test_two_constants(self):
        s = aggregate([constant_record(1.0), constant_record(3.0)])
        np.testing.assert_array_equal(s.stats["toff"]["mean"], 2.0)
        np.testing.assert_array_equal(s.stats["toff"]["min"], 1.0)
        np.testing.assert_array_equal(s.stats["toff"]["max"], 3.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_convergence_time(self):
        rec = constant_record(0.0, k=5)
        for r, v in zip(rec.rows, [0.5, 0.01, 0.3, 0.01, 0.0]):
            r.toff = v
        assert convergence_time(rec, 0.02) == 4
        rec.rows[-1].toff = 1.0
        assert convergence_time(rec, 0.02) is None

    def test_default_plan_converges_within_fifty(self):
        s = aggregate(run_plan(small(iterations=60, replications=25)), tolerance=0.02)
        assert all(c is not None and c <= 50 for c in s.convergence)


class TestPresets:
    def test_slow_dynamics_timeline(self):
        plan = preset("slow_dynamics")
        assert plan.initial_n() == 1
        assert [e.n for e in plan.dynamics] == [2, 3, 4, 5, 4, 3, 2, 1]
        assert [e.iteration for e in plan.dynamics] == list(range(50, 401, 50))
        assert plan.iterations == 450

    def test_noisy_sim(self):
        plan = preset("noisy_sim")
        assert plan.environment.kind == "sim" and plan.learner.omega == 1.0

    def test_overrides(self):
        assert preset("fast_dynamics", replications=2).replications == 2

    def test_unknown(self):
        with pytest.raises(ValueError):
            preset("nope")

    def test_bound_check_plan(self):
        plan = bound_check_plan(horizon=200)
        assert plan.learner.constant and not plan.learner.truncate
        assert plan.iterations == 100
        ns = round_losses(plan)
        assert ns[100] == 5 and ns[101] == 10  # rounds 101 and 102 straddle the switch


class TestBoundReport:
    def test_requires_constant(self):
        with pytest.raises(ValueError):
            bound_report(small(), [1.0], [1.0])

    def test_fixed_loss_has_no_deviation(self):
        plan = replace(bound_check_plan(horizon=200), dynamics=[])
        rep = bound_report(plan, [1.0, 2.0], [0.5, 0.5])
        assert rep.L == 0.0 and rep.T == 200
        assert rep.mean_regret == 1.5 and rep.stderr == pytest.approx(0.5)
        assert not rep.sublinear  # 1.5/200 = 0.0075 is not below 0.5/100 = 0.005

    def test_measured_regret_below_bound(self):
        plan = replace(bound_check_plan(horizon=400), replications=5)
        recs = run_plan(plan)
        rep = bound_report(plan, [r.rows[-1].regret for r in recs], [r.rows[99].regret for r in recs])
        assert rep.L > 0
        assert rep.mean_regret <= rep.theorem1
        assert rep.theorem1 > 0 and rep.corollary > 0
