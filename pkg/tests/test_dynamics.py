import math

import numpy as np
import pytest

from conftest import CFG, task
from hedonic_tasks.dynamics import (
    apply_churn,
    churn_event_count,
    coalition_hash,
    polling_discrete_event_sim,
    run_dynamic,
    simulate_coalition,
    step_mobility,
)
from hedonic_tasks.model import DynamicsConfig, PlayerId, ScenarioConfig
from hedonic_tasks.polling import STANDARD, UnstableCoalitionError, profile_from_rates, weighted_mean_wait
from hedonic_tasks.scenario import generate_scenario
from hedonic_tasks.value import CoalitionValuer

BOUNDS = (-2000.0, 2000.0, -2000.0, 2000.0)


class TestMobility:
    def test_static(self, rng):
        ts = (task(0, 1, 2), task(1, -5, 7))
        assert step_mobility(ts, 60, 0.0, rng, BOUNDS) == ts

    def test_displacement(self, rng):
        ts = tuple(task(j, 0, 0) for j in range(20))
        moved = step_mobility(ts, 60, 10 / 3.6, rng, BOUNDS)
        for t in moved:
            assert math.hypot(*t.position) == pytest.approx(166.67, abs=0.01)

    def test_reflection(self, rng):
        ts = tuple(task(j, 1990, 1990) for j in range(50))
        for t in step_mobility(ts, 60, 50 / 3.6, rng, BOUNDS):
            assert -2000 <= t.position.x <= 2000 and -2000 <= t.position.y <= 2000

    def test_negative_speed(self, rng):
        with pytest.raises(ValueError):
            step_mobility((), 1, -1, rng, BOUNDS)


class TestChurn:
    def test_counts(self, rng):
        assert churn_event_count(0, 60, rng) == 0
        assert churn_event_count(2, 60, rng) == 2
        draws = [churn_event_count(1, 30, rng) for _ in range(4000)]
        assert set(draws) == {0, 1} and np.mean(draws) == pytest.approx(0.5, abs=0.03)

    def test_arrivals_and_departures(self, rng):
        sc = generate_scenario(ScenarioConfig(task_count=10, seed=1))
        tasks, log, nxt = apply_churn(sc.tasks, 40, 60, CFG.class_table, sc, rng, 10)
        arr = sum(e.kind == "arrival" for e in log)
        dep = sum(e.kind == "departure" for e in log)
        assert len(log) == 40 and len(tasks) == 10 + arr - dep and nxt == 10 + arr
        assert len({t.id for t in tasks}) == len(tasks)

    def test_departure_from_empty_is_skipped(self, rng):
        sc = generate_scenario(ScenarioConfig(seed=1))
        tasks, log, _ = apply_churn((), 600, 60, ((125.0, 1.0),), sc, np.random.default_rng(7), 0)
        assert any(e.kind == "skipped" for e in log) or len(tasks) == sum(e.kind == "arrival" for e in log)


class TestEpochLoop:
    def _cfg(self, **kw):
        dyn = dict(psi=10.0, speed=0.0, churn_rate=0.0, horizon=120.0)
        dyn.update(kw)
        return ScenarioConfig(task_count=12, seed=5, dynamics=DynamicsConfig(**dyn))

    def test_static_partition_persists(self):
        res = run_dynamic(self._cfg())
        assert res.metrics.switches == 0 and res.metrics.initial_switches > 0
        parts = [p for _, p in res.partitions]
        assert all(p == parts[0] for p in parts)
        assert res.metrics.switch_frequency == 0

    def test_lifespan_accounting(self):
        res = run_dynamic(self._cfg(speed=50 / 3.6))
        m = res.metrics
        assert all(0 <= x <= 120 for x in m.lifespans)
        births = sum(e.kind == "birth" for e in res.events)
        assert len(m.lifespans) == births
        # total existence time equals the sum over snapshots of alive coalitions times the epoch gaps
        times = [t for t, _ in res.partitions] + [120.0]
        exist = sum((times[k + 1] - times[k]) * sum(len(c) > 1 for c in p)
                    for k, (_, p) in enumerate(res.partitions))
        assert sum(m.lifespans) == pytest.approx(exist)

    def test_churn_down_to_few_tasks_does_not_crash(self):
        cfg = ScenarioConfig(agent_count=5, task_count=6, seed=2,
                             dynamics=DynamicsConfig(psi=10, speed=1.0, churn_rate=30, horizon=200))
        res = run_dynamic(cfg)
        assert res.metrics.switch_frequency >= 0

    def test_requires_schedule_and_slow_tasks(self):
        with pytest.raises(ValueError):
            run_dynamic(ScenarioConfig())
        with pytest.raises(ValueError):
            run_dynamic(self._cfg(speed=100.0))

    def test_csv_deterministic(self):
        a = run_dynamic(self._cfg(speed=3.0, churn_rate=2.0)).to_csv()
        b = run_dynamic(self._cfg(speed=3.0, churn_rate=2.0)).to_csv()
        assert a == b and a.startswith("timestamp,event,coalition,size,payoff\r\n")

    def test_coalition_hash_stable(self):
        s = frozenset([PlayerId.agent(1), PlayerId.task(3)])
        assert coalition_hash(s) == coalition_hash(frozenset(reversed(sorted(s)))) and len(coalition_hash(s)) == 12


class TestPollingSimulator:
    def test_md1_single_queue(self):
        lam, mu = 1500.0, 3000.0
        r = polling_discrete_event_sim([lam], mu, [0.0], np.random.default_rng(3), min_packets=100_000,
                                       method="packet")
        expected = lam / (2 * mu * (mu - lam)) * (lam / mu)
        assert abs(r.estimate - expected) <= max(3 * r.ci_halfwidth, 0.03 * expected)
        assert r.packets >= 100_000

    @pytest.mark.parametrize("method", ["aggregate", "packet"])
    def test_two_symmetric_queues(self, method):
        legs = [30.0, 30.0]
        want = weighted_mean_wait(profile_from_rates([125, 125], 3000, 60.0), STANDARD)
        r = polling_discrete_event_sim([125, 125], 3000, legs, np.random.default_rng(1), min_packets=100_000,
                                       min_cycles=60, method=method)
        assert r.estimate == pytest.approx(want, rel=0.05)

    def test_zero_rates(self):
        r = polling_discrete_event_sim([0.0, 0.0], 3000, [1.0, 1.0], np.random.default_rng(0), min_packets=0)
        assert r.estimate == 0 and r.packets == 0

    def test_unstable(self):
        with pytest.raises(UnstableCoalitionError):
            polling_discrete_event_sim([3000.0], 3000, [1.0], np.random.default_rng(0))

    def test_ci_shrinks_with_horizon(self):
        args = ([500, 500, 125], 3000, [1.0, 2.0, 3.0])
        w = [np.mean([polling_discrete_event_sim(*args, np.random.default_rng(s), min_packets=0, min_cycles=n,
                                                 warmup_cycles=20).ci_halfwidth for s in range(5)])
             for n in (200, 3200)]
        assert w[1] < w[0]

    def test_simulate_coalition(self):
        sc = generate_scenario(ScenarioConfig(agent_count=2, task_count=4, seed=8))
        v = CoalitionValuer(sc, STANDARD)
        members = frozenset(sc.players)
        r = simulate_coalition(v, members, np.random.default_rng(0), min_packets=100_000)
        assert r.estimate == pytest.approx(v.breakdown(members).delay, rel=0.05)
