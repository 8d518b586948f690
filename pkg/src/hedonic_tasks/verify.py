"""Runnable self-checks, each reporting failures with the seed that reproduces them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import polling_discrete_event_sim
from .engine import (
    MEMBERSHIP,
    FormationDefect,
    brute_force_stable_set,
    is_nash_stable,
    run_formation,
)
from .model import HistoryBook, Position, ScenarioConfig
from .polling import AS_PRINTED, STANDARD, profile_from_rates, weighted_mean_wait
from .routing import nearest_neighbor_route, optimal_route_length
from .scenario import draw_task, generate_scenario
from .value import CoalitionValuer


@dataclass
class VerifyReport:
    name: str
    checked: int = 0
    failures: list = field(default_factory=list)  # (seed, message)
    lines: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and not self.failures

    def render(self) -> str:
        head = f"{self.name}: {'PASS' if self.passed else 'FAIL'} ({self.checked} checked, {len(self.failures)} failed)"
        body = [f"  seed {s}: {m}" for s, m in self.failures] + [f"  {ln}" for ln in self.lines]
        return "\n".join([head] + body)


def _rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, k]))


def verify_stability(count: int = 200, seed: int = 0, eq4_form: str = AS_PRINTED,
                     agents=(2, 6), tasks=(3, 15)) -> VerifyReport:
    """Random instances: formation must converge to a Nash-stable partition without revisits."""
    rep = VerifyReport("stability")
    for k in range(count):
        rng = _rng(seed, k)
        m = int(rng.integers(agents[0], agents[1] + 1))
        t = int(rng.integers(max(tasks[0], m + 1), tasks[1] + 1))
        sc = generate_scenario(ScenarioConfig(agent_count=m, task_count=t), rng)
        valuer = CoalitionValuer(sc, eq4_form)
        rep.checked += 1
        try:
            part, log, hist = run_formation(valuer, rng=rng, hist=HistoryBook(), history=MEMBERSHIP)
        except FormationDefect as exc:
            rep.failures.append((k, f"M={m} T={t}: {exc}"))
            continue
        if log.revisits:
            rep.failures.append((k, f"M={m} T={t}: partition revisited at turns {log.revisits[:5]}"))
        ok, dev = is_nash_stable(part, hist, valuer)
        if not ok:
            rep.failures.append((k, f"M={m} T={t}: {dev.player!r} prefers {sorted(dev.target or [])}"))
    return rep


def verify_oracle(count: int = 50, seed: int = 0, eq4_form: str = AS_PRINTED, max_players: int = 6) -> VerifyReport:
    """Tiny instances: deviation check and a non-empty brute-force stable set."""
    rep = VerifyReport("oracle")
    empty_sets = 0
    for k in range(count):
        rng = _rng(seed, k)
        m = int(rng.integers(1, (max_players - 1) // 2 + 1))
        t = int(rng.integers(m + 1, max_players - m + 1))
        sc = generate_scenario(ScenarioConfig(agent_count=m, task_count=t), rng)
        valuer = CoalitionValuer(sc, eq4_form)
        rep.checked += 1
        part, log, hist = run_formation(valuer, rng=rng, hist=HistoryBook())
        ok, dev = is_nash_stable(part, hist, valuer)
        if not ok:
            rep.failures.append((k, f"M={m} T={t}: deviation by {dev.player!r}"))
        positive = any(valuer.value(c) > 0 for c in part)
        if positive:
            stable = brute_force_stable_set(sc.players, valuer)
            if not stable:
                rep.failures.append((k, f"M={m} T={t}: no Nash-stable partition under empty histories"))
        else:
            empty_sets += 1
    rep.lines.append(f"{empty_sets} instances ended with zero value everywhere")
    return rep


def random_polling_case(rng: np.random.Generator, cfg: ScenarioConfig = None, collectors=(1, 3), tasks=(2, 5)):
    """Rates, capacity and travel legs of a random stable coalition."""
    cfg = cfg or ScenarioConfig()
    while True:
        k = int(rng.integers(collectors[0], collectors[1] + 1))
        n = int(rng.integers(tasks[0], tasks[1] + 1))
        ts = [draw_task(j, cfg, rng) for j in range(n)]
        cap = k * cfg.agent_capacity
        rates = [t.arrival_rate for t in ts]
        if sum(rates) / cap >= 1.0:
            continue
        route = nearest_neighbor_route(ts)
        pos = {t.id: t.position for t in ts}
        legs = [d / cfg.velocity for d in route.legs(pos)]
        order = {t.id: t.arrival_rate for t in ts}
        return [order[i] for i in route.order], cap, legs


def verify_polling(count: int = 20, seed: int = 0, tolerance: float = 0.05, min_packets: int = 100_000
                   ) -> VerifyReport:
    """Closed-form delay (standard form) against the polling simulator."""
    rep = VerifyReport("polling")
    for k in range(count):
        rng = _rng(seed, k)
        rates, cap, legs = random_polling_case(rng)
        prof = profile_from_rates(rates, cap, sum(legs))
        std = weighted_mean_wait(prof, STANDARD)
        printed = weighted_mean_wait(prof, AS_PRINTED)
        sim = polling_discrete_event_sim(rates, cap, legs, rng, min_packets=min_packets)
        err = abs(sim.estimate - std) / std
        rep.checked += 1
        rep.lines.append(f"case {k}: n={len(rates)} mu={cap:.0f} theta={sum(legs):.1f}s sim={sim.estimate:.6g}"
                         f"+-{sim.ci_halfwidth:.2g} standard={std:.6g} ({err:.2%}) as-printed={printed:.6g}")
        if not err <= tolerance:
            rep.failures.append((k, f"relative error {err:.2%} > {tolerance:.0%}"))
    return rep


def verify_tsp(count: int = 100, seed: int = 0, n_tasks: int = 6) -> VerifyReport:
    """Nearest-neighbour cycles are never shorter than the brute-force optimum."""
    rep = VerifyReport("tsp")
    cfg = ScenarioConfig()
    worst = 1.0
    for k in range(count):
        rng = _rng(seed, k)
        ts = [draw_task(j, cfg, rng) for j in range(n_tasks)]
        nn = nearest_neighbor_route(ts).cycle_length
        opt = optimal_route_length([Position(*t.position) for t in ts])
        rep.checked += 1
        if nn < opt * (1 - 1e-12):
            rep.failures.append((k, f"NN {nn:.3f} < optimum {opt:.3f}"))
        if opt > 0:
            worst = max(worst, nn / opt)
    rep.lines.append(f"worst NN/optimal ratio {worst:.4f}")
    return rep


CHECKS = {
    "stability": verify_stability,
    "oracle": verify_oracle,
    "polling": verify_polling,
    "tsp": verify_tsp,
}
