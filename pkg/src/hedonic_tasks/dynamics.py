"""Dynamic environments and a discrete-event polling simulator.

The epoch loop alternates re-formation (with cleared histories) and a period
``psi`` of data collection during which tasks move, arrive and leave.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .engine import MEMBERSHIP, FormationDefect, run_formation
from .model import DynamicsConfig, HistoryBook, Partition, PlayerId, Position, ScenarioConfig, TaskSpec
from .polling import AS_PRINTED, UnstableCoalitionError
from .scenario import Scenario, draw_task, generate_scenario
from .value import CoalitionValuer


# --------------------------------------------------------------------------
# environment changes

def _reflect(v: float, lo: float, hi: float) -> tuple[float, bool]:
    flipped = False
    span = hi - lo
    while v < lo or v > hi:
        if v < lo:
            v = 2 * lo - v
        else:
            v = 2 * hi - v
        flipped = not flipped
        if span <= 0:
            return lo, flipped
    return v, flipped


def step_mobility(tasks: Sequence[TaskSpec], dt: float, speed: float, rng: np.random.Generator,
                  bounds: tuple) -> tuple:
    """Random-direction motion: one uniform heading per task, reflected at the walls."""
    if speed < 0:
        raise ValueError("speed must be non-negative")
    if speed == 0 or dt == 0:
        return tuple(tasks)
    x0, x1, y0, y1 = bounds
    headings = rng.uniform(0.0, 2.0 * math.pi, size=len(tasks))
    moved = []
    for t, h in zip(tasks, headings):
        x = t.position.x + speed * dt * math.cos(h)
        y = t.position.y + speed * dt * math.sin(h)
        x, _ = _reflect(x, x0, x1)
        y, _ = _reflect(y, y0, y1)
        moved.append(TaskSpec(t.id, t.arrival_rate, t.class_tag, Position(x, y)))
    return tuple(moved)


@dataclass(frozen=True)
class ChurnEvent:
    kind: str  # arrival | departure | skipped
    task: Optional[PlayerId]


def churn_event_count(rate: float, dt: float, rng: np.random.Generator) -> int:
    """Whole events per ``dt`` at ``rate`` per minute; a fractional part is a coin flip."""
    if rate < 0:
        raise ValueError("rate must be non-negative")
    expected = rate * dt / 60.0
    whole = math.floor(expected + 1e-12)
    frac = expected - whole
    if frac > 1e-12 and rng.random() < frac:
        whole += 1
    return int(whole)


def apply_churn(tasks: Sequence[TaskSpec], rate: float, dt: float, class_table, scenario: Scenario,
                rng: np.random.Generator, next_index: int) -> tuple[tuple, list, int]:
    """Arrivals and departures with equal probability.

    Returns the new task tuple, the change log and the next free task index.
    """
    tasks = list(tasks)
    log = []
    for _ in range(churn_event_count(rate, dt, rng)):
        if rng.random() < 0.5:
            t = draw_task(next_index, scenario, rng, table=class_table)
            next_index += 1
            tasks.append(t)
            log.append(ChurnEvent("arrival", t.id))
        elif tasks:
            k = int(rng.integers(len(tasks)))
            log.append(ChurnEvent("departure", tasks.pop(k).id))
        else:
            log.append(ChurnEvent("skipped", None))
    return tuple(tasks), log, next_index


# --------------------------------------------------------------------------
# epoch loop

@dataclass(frozen=True)
class Event:
    time: float
    kind: str  # switch | birth | death | arrival | departure
    coalition: frozenset
    payoff: float


@dataclass
class TimeSeriesMetrics:
    switch_frequency: float = 0.0  # switches / minute / player, after the first formation
    lifespans: list = field(default_factory=list)  # seconds
    size_samples: list = field(default_factory=list)  # (time, mean coalition size)
    switches: int = 0
    initial_switches: int = 0
    non_converged: int = 0

    @property
    def mean_lifespan(self) -> float:
        return float(np.mean(self.lifespans)) if self.lifespans else 0.0


@dataclass
class DynamicResult:
    metrics: TimeSeriesMetrics
    partitions: list  # (time, Partition) after each formation
    events: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["timestamp", "event", "coalition", "size", "payoff"])
        for e in self.events:
            w.writerow([repr(float(e.time)), e.kind, coalition_hash(e.coalition), len(e.coalition),
                        repr(float(e.payoff))])
        return buf.getvalue()


def coalition_hash(members: frozenset) -> str:
    """Stable short id for a member-set (independent of Python's hash seed)."""
    import hashlib

    text = ",".join(repr(p) for p in sorted(members))
    return hashlib.blake2b(text.encode(), digest_size=6).hexdigest()


def _formed(members: frozenset) -> bool:
    return len(members) > 1


def run_dynamic(cfg: ScenarioConfig, rng: Optional[np.random.Generator] = None, eq4_form: str = AS_PRINTED,
                history: str = MEMBERSHIP, max_switches: Optional[int] = None,
                scenario: Optional[Scenario] = None) -> DynamicResult:
    """Re-form every ``psi`` seconds while tasks move and churn.

    Histories are cleared before a re-formation only if the task set changed
    during the interval; otherwise the previous histories are kept, which
    leaves a converged partition untouched.
    Lifespans are tracked for coalitions with two or more members, from the
    formation that creates a member-set until the first formation that
    changes it; coalitions alive at the horizon are cut off there.
    """
    sched = cfg.dynamics
    if sched is None:
        raise ValueError("scenario has no dynamics schedule")
    if not sched.speed < cfg.velocity:
        raise ValueError("task speed must be below the agent velocity")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if scenario is None:
        scenario = generate_scenario(cfg, rng)
    next_index = max((t.id.index for t in scenario.tasks), default=-1) + 1

    metrics = TimeSeriesMetrics()
    events: list = []
    trace: list = []
    alive: dict = {}
    player_counts = []

    hist = HistoryBook()

    def form(t: float, initial: Optional[Partition]) -> Partition:
        valuer = CoalitionValuer(scenario, eq4_form)
        try:
            part, log, _ = run_formation(valuer, initial=initial, rng=rng, hist=hist,
                                         max_switches=max_switches, history=history)
        except FormationDefect as exc:
            metrics.non_converged += 1
            log = exc.log
            part = exc.partition
        for r in log.records:
            events.append(Event(t, "switch", r.to_members, valuer.payoff(r.to_members)))
        if t == 0:
            metrics.initial_switches += log.n_switches
        else:
            metrics.switches += log.n_switches
        current = {c for c in part if _formed(c)}
        for c in list(alive):
            if c not in current:
                metrics.lifespans.append(t - alive.pop(c))
                events.append(Event(t, "death", c, 0.0))
        for c in sorted(current - set(alive), key=lambda c: sorted(c)):
            alive[c] = t
            events.append(Event(t, "birth", c, valuer.payoff(c)))
        metrics.size_samples.append((t, float(np.mean([len(c) for c in part]))))
        trace.append((t, part.copy()))
        player_counts.append(len(part.players))
        return part

    part = form(0.0, None)
    bounds = scenario.bounds
    t = 0.0
    while True:
        dt = min(sched.psi, sched.horizon - t)
        if dt <= 0:
            break
        tasks = step_mobility(scenario.tasks, dt, sched.speed, rng, bounds)
        tasks, changes, next_index = apply_churn(tasks, sched.churn_rate, dt, cfg.class_table, scenario, rng,
                                                 next_index)
        for ch in changes:
            if ch.kind == "departure":
                part.remove_player(ch.task)
                events.append(Event(t + dt, "departure", frozenset([ch.task]), 0.0))
            elif ch.kind == "arrival":
                part.add_singleton(ch.task)
                events.append(Event(t + dt, "arrival", frozenset([ch.task]), 0.0))
        if tasks != scenario.tasks:
            hist.clear()
            scenario = scenario.replace(tasks=tasks)
        t += dt
        if t >= sched.horizon:
            break
        part = form(t, part)

    for c, born in alive.items():
        metrics.lifespans.append(sched.horizon - born)
    minutes = sched.horizon / 60.0
    players = float(np.mean(player_counts)) if player_counts else 1.0
    metrics.switch_frequency = metrics.switches / minutes / players if minutes > 0 else 0.0
    return DynamicResult(metrics, trace, events)


# --------------------------------------------------------------------------
# discrete-event polling simulation

@dataclass(frozen=True)
class PollingSimResult:
    estimate: float  # sum_i rho_i * mean wait_i
    ci_halfwidth: float  # 95 %
    mean_waits: tuple
    packets: int
    cycles: int


class _ArrivalStream:
    def __init__(self, rate: float, rng: np.random.Generator, chunk: int = 4096):
        self.rate = rate
        self.rng = rng
        self.chunk = chunk
        self.buf = np.empty(0)
        self.pos = 0
        self.last = 0.0

    def peek(self) -> float:
        if self.rate <= 0:
            return math.inf
        if self.pos >= len(self.buf):
            gaps = self.rng.exponential(1.0 / self.rate, size=self.chunk)
            self.buf = self.last + np.cumsum(gaps)
            self.last = float(self.buf[-1])
            self.pos = 0
        return float(self.buf[self.pos])

    def pop(self) -> float:
        v = self.peek()
        self.pos += 1
        return v


def polling_discrete_event_sim(rates: Sequence[float], capacity: float, legs: Sequence[float],
                               rng: np.random.Generator, min_packets: int = 100_000, min_cycles: int = 400,
                               warmup_cycles: int = 50, batches: int = 20, method: str = "aggregate",
                               max_cycles: int = 10_000_000) -> PollingSimResult:
    """Exhaustive cyclic polling with Poisson arrivals and deterministic service/travel.

    ``legs[i]`` is the travel time from queue ``i`` to queue ``i+1`` (the last
    leg closes the cycle). ``method="packet"`` follows every packet;
    ``method="aggregate"`` draws arrivals per busy-period generation: within
    a visit packets start back to back, so only arrival counts and their
    interval midpoints are needed for the mean wait. Aggregate mode needs a
    positive total switchover and falls back to packet mode otherwise.
    """
    rates = [float(r) for r in rates]
    n = len(rates)
    if n == 0 or len(legs) != n:
        raise ValueError("need one leg per queue")
    if not capacity > 0:
        raise ValueError("capacity must be positive")
    if sum(rates) / capacity >= 1.0:
        raise UnstableCoalitionError("offered load >= 1")
    if method not in ("aggregate", "packet"):
        raise ValueError(f"unknown method {method!r}")
    if method == "aggregate" and sum(legs) <= 0:
        method = "packet"
    b = 1.0 / capacity

    total_cycles = warmup_cycles + max(min_cycles, batches)
    wait_sum = np.zeros((0, n))
    count = np.zeros((0, n))
    rows_w, rows_c = [], []
    packets = 0
    cycle = 0

    if method == "aggregate":
        last_dep = [0.0] * n
        clock = 0.0
        while True:
            cw = [0.0] * n
            cc = [0] * n
            for i in range(n):
                a = clock
                lam = rates[i]
                span = a - last_dep[i]
                k = int(rng.poisson(lam * span)) if lam > 0 and span > 0 else 0
                sum_t = k * (last_dep[i] + span / 2.0)
                served = 0
                x = a
                while k > 0:
                    served += k
                    dur = k * b
                    k_next = int(rng.poisson(lam * dur)) if lam > 0 else 0
                    sum_t += k_next * (x + dur / 2.0)
                    x += dur
                    k = k_next
                cw[i] = served * a + b * served * (served - 1) / 2.0 - sum_t
                cc[i] = served
                last_dep[i] = x
                clock = x + legs[i]
            cycle += 1
            if cycle > warmup_cycles:
                rows_w.append(cw)
                rows_c.append(cc)
                packets += sum(cc)
            if (cycle >= total_cycles and packets >= min_packets) or cycle >= max_cycles:
                break
    else:
        streams = [_ArrivalStream(r, rng) for r in rates]
        clock = 0.0
        theta = float(sum(legs))
        while True:
            cw = [0.0] * n
            cc = [0] * n
            for i in range(n):
                s = streams[i]
                while s.peek() <= clock:
                    cw[i] += clock - s.pop()
                    cc[i] += 1
                    clock += b
                clock += legs[i]
            if theta == 0.0 and sum(cc) == 0:
                clock = min(s.peek() for s in streams)
                continue
            cycle += 1
            if cycle > warmup_cycles:
                rows_w.append(cw)
                rows_c.append(cc)
                packets += sum(cc)
            if (cycle >= total_cycles and packets >= min_packets) or cycle >= max_cycles:
                break

    wait_sum = np.asarray(rows_w, dtype=float)
    count = np.asarray(rows_c, dtype=float)
    rho = np.asarray(rates) / capacity
    tot_c = count.sum(axis=0)
    mean_waits = np.divide(wait_sum.sum(axis=0), tot_c, out=np.zeros(n), where=tot_c > 0)
    estimate = float(np.dot(rho, mean_waits))

    # batch means over consecutive cycles
    m = len(rows_w)
    nb = min(batches, m)
    ests = []
    for idx in np.array_split(np.arange(m), nb):
        bw = wait_sum[idx].sum(axis=0)
        bc = count[idx].sum(axis=0)
        ests.append(float(np.dot(rho, np.divide(bw, bc, out=np.zeros(n), where=bc > 0))))
    if nb > 1:
        half = float(stats.t.ppf(0.975, nb - 1) * np.std(ests, ddof=1) / math.sqrt(nb))
    else:
        half = math.inf
    return PollingSimResult(estimate, half, tuple(float(w) for w in mean_waits), int(packets), cycle)


def simulate_coalition(valuer: CoalitionValuer, members: frozenset, rng: np.random.Generator,
                       **kw) -> PollingSimResult:
    """Run the polling simulator for a coalition's best role assignment and route."""
    b = valuer.breakdown(members)
    if b.roles is None:
        raise UnstableCoalitionError("coalition has no stable role assignment")
    sc = valuer.scenario
    amap, tmap = sc.agent_map, sc.task_map
    collectors = [amap[c] for c in b.roles.collectors]
    velocity = min(a.velocity for a in collectors)
    positions = {t: tmap[t].position for t in b.route.order}
    legs = [d / velocity for d in b.route.legs(positions)]
    rates = [tmap[t].arrival_rate for t in b.route.order]
    return polling_discrete_event_sim(rates, b.profile.capacity, legs, rng, **kw)
