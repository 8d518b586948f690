"""Coalition utility: effective throughput over delay, with role search."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from . import channel
from .model import ChannelParams, PlayerId, Position, TaskSpec
from .polling import (
    AS_PRINTED,
    EQ4_FORMS,
    PollingProfile,
    utilization_profile,
    weighted_mean_wait,
)
from .routing import Route, nearest_neighbor_route, total_switchover
from .scenario import Scenario


@dataclass(frozen=True)
class RoleAssignment:
    collectors: frozenset
    relay_count: int


@dataclass(frozen=True)
class ValueBreakdown:
    value: float
    throughput: float = 0.0
    delay: float = 0.0
    roles: Optional[RoleAssignment] = None
    route: Optional[Route] = None
    profile: Optional[PollingProfile] = None


ZERO = ValueBreakdown(0.0)


@dataclass(frozen=True)
class Coalition:
    """A member-set with the structure that maximizes its value."""

    members: frozenset
    collectors: frozenset
    relay_count: int
    route: Optional[Route]
    cached_value: float

    @property
    def agents(self) -> frozenset:
        return frozenset(p for p in self.members if p.is_agent)

    @property
    def tasks(self) -> frozenset:
        return frozenset(p for p in self.members if p.is_task)


def effective_throughput(
    tasks: Sequence[TaskSpec],
    receiver: Position,
    roles: RoleAssignment,
    ch: ChannelParams,
    tx_power: float,
) -> float:
    total = 0.0
    for t in tasks:
        path = channel.relay_hop_path(t.position, receiver, roles.relay_count)
        total += t.arrival_rate * channel.packet_success_prob(path, ch, tx_power)
    return total


def power_value(throughput: float, delay: float, delta: float, beta: float) -> float:
    if delay <= 0.0:
        return math.inf if throughput > 0 else 0.0
    return delta * throughput ** beta / delay ** (1.0 - beta)


def _homogeneous(agents) -> bool:
    first = agents[0]
    return all(
        (a.capacity, a.velocity, a.tx_power) == (first.capacity, first.velocity, first.tx_power)
        for a in agents
    )


def _collector_sets(agents):
    """Candidate collector sets: more collectors first, then lexicographic ids."""
    ids = [a.id for a in agents]
    if _homogeneous(agents):
        for k in range(len(ids), 0, -1):
            yield ids[:k]
    else:
        for k in range(len(ids), 0, -1):
            yield from itertools.combinations(ids, k)


def coalition_value(members, scenario: Scenario, eq4_form: str = AS_PRINTED) -> ValueBreakdown:
    """Best value of ``members`` over every collector/relay split.

    Zero for singletons, agent-only or task-only sets, and when no split
    keeps the polling system stable.
    """
    if eq4_form not in EQ4_FORMS:
        raise ValueError(f"unknown eq4 form {eq4_form!r}")
    members = frozenset(members)
    if len(members) <= 1:
        return ZERO
    amap, tmap = scenario.agent_map, scenario.task_map
    agents = sorted((amap[p] for p in members if p.is_agent), key=lambda a: a.id)
    tasks = sorted((tmap[p] for p in members if p.is_task), key=lambda t: t.id)
    if not agents or not tasks:
        return ZERO
    return _best_split(agents, tasks, scenario, eq4_form)


def _best_split(agents, tasks, scenario: Scenario, eq4_form: str) -> ValueBreakdown:
    route = nearest_neighbor_route(tasks)
    amap = {a.id: a for a in agents}
    lam_total = sum(t.arrival_rate for t in tasks)
    tx_power = agents[0].tx_power
    throughput_by_relays: dict[int, float] = {}
    best: Optional[ValueBreakdown] = None
    for collectors in _collector_sets(agents):
        chosen = [amap[c] for c in collectors]
        capacity = sum(a.capacity for a in chosen)
        if lam_total / capacity >= 1.0:
            continue
        theta = total_switchover(route, min(a.velocity for a in chosen))
        profile = utilization_profile(tasks, capacity, theta)
        delay = weighted_mean_wait(profile, eq4_form)
        relays = len(agents) - len(chosen)
        if relays not in throughput_by_relays:
            roles0 = RoleAssignment(frozenset(), relays)
            throughput_by_relays[relays] = effective_throughput(
                tasks, scenario.receiver, roles0, scenario.channel, tx_power
            )
        lthr = throughput_by_relays[relays]
        v = power_value(lthr, delay, scenario.delta, scenario.beta)
        if best is None or v > best.value:
            best = ValueBreakdown(v, lthr, delay, RoleAssignment(frozenset(collectors), relays), route, profile)
    return best if best is not None else ZERO


def player_payoff(v: ValueBreakdown, members, player: PlayerId) -> float:
    """Equal split of the coalition value."""
    if player not in members:
        raise ValueError(f"{player!r} is not a member of the coalition")
    return v.value / len(members)


class CoalitionValuer:
    """Memoized coalition values for one scenario snapshot."""

    def __init__(self, scenario: Scenario, eq4_form: str = AS_PRINTED):
        if eq4_form not in EQ4_FORMS:
            raise ValueError(f"unknown eq4 form {eq4_form!r}")
        self.scenario = scenario
        self.eq4_form = eq4_form
        self._cache: dict[frozenset, ValueBreakdown] = {}

    def breakdown(self, members: frozenset) -> ValueBreakdown:
        b = self._cache.get(members)
        if b is None:
            b = coalition_value(members, self.scenario, self.eq4_form)
            self._cache[members] = b
        return b

    def value(self, members: frozenset) -> float:
        return self.breakdown(members).value

    def payoff(self, members: frozenset) -> float:
        return self.breakdown(members).value / len(members)

    def coalition(self, members: frozenset) -> Coalition:
        b = self.breakdown(members)
        roles = b.roles
        # zero-value coalitions: every agent idles as a collector
        return Coalition(
            members=members,
            collectors=roles.collectors if roles else frozenset(p for p in members if p.is_agent),
            relay_count=roles.relay_count if roles else 0,
            route=b.route,
            cached_value=b.value,
        )

    def __len__(self) -> int:
        return len(self._cache)
