"""Hedonic coalition formation between agents and tasks.

Preference values are plain floats; ``math.inf`` marks the pinned case where
an agent is the only agent serving a group of tasks.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .model import HistoryBook, Partition, PlayerId, distance
from .scenario import Scenario
from .value import CoalitionValuer

INFINITE = math.inf


class FormationDefect(RuntimeError):
    """The formation loop exceeded its switch budget.

    ``log`` and ``partition`` hold the state reached when the budget ran out.
    """

    def __init__(self, message: str, log=None, partition=None):
        super().__init__(message)
        self.log = log
        self.partition = partition


# --------------------------------------------------------------------------
# preferences

def _agent_pinned(agent: PlayerId, members: frozenset) -> bool:
    has_task = False
    for p in members:
        if p.is_agent and p != agent:
            return False
        if p.is_task:
            has_task = True
    return has_task


def agent_preference(agent: PlayerId, members: frozenset, current: Partition, hist: HistoryBook,
                     valuer: CoalitionValuer) -> float:
    if agent not in members:
        raise ValueError(f"{agent!r} not in candidate coalition")
    # a pinned agent needs at least one task to guard; a lone agent is free to move
    if members == current.coalition_of(agent) and _agent_pinned(agent, members):
        return INFINITE
    if hist.contains(agent, members):
        return 0.0
    return valuer.payoff(members)


def task_preference(task: PlayerId, members: frozenset, hist: HistoryBook, valuer: CoalitionValuer) -> float:
    if task not in members:
        raise ValueError(f"{task!r} not in candidate coalition")
    if hist.contains(task, members):
        return 0.0
    return valuer.payoff(members)


def preference(player: PlayerId, members: frozenset, current: Partition, hist: HistoryBook,
               valuer: CoalitionValuer) -> float:
    if player.is_agent:
        return agent_preference(player, members, current, hist, valuer)
    return task_preference(player, members, hist, valuer)


# --------------------------------------------------------------------------
# switch rule

@dataclass(frozen=True)
class Switch:
    target: Optional[frozenset]  # None: leave to act alone
    gain: float


def _candidates(player: PlayerId, partition: Partition, restrict_tasks: bool) -> Iterator[Optional[frozenset]]:
    own = partition.lookup[player]
    for k, members in enumerate(partition.coalitions):
        if k == own:
            continue
        if restrict_tasks and player.is_task and not any(p.is_agent for p in members):
            continue
        yield members
    yield None


def find_best_switch(player: PlayerId, partition: Partition, hist: HistoryBook,
                     valuer: CoalitionValuer, restrict_tasks: bool = True) -> Optional[Switch]:
    """Most preferred strictly-improving move for ``player``, if any.

    Tasks only consider coalitions holding an agent (and acting alone) unless
    ``restrict_tasks`` is false; task-only targets are worth zero anyway.
    """
    current = partition.coalition_of(player)
    here = preference(player, current, partition, hist, valuer)
    if here == INFINITE:
        return None
    best: Optional[Switch] = None
    best_pref = here
    for target in _candidates(player, partition, restrict_tasks):
        joined = frozenset([player]) if target is None else target | {player}
        pref = preference(player, joined, partition, hist, valuer)
        if pref > best_pref:
            best_pref = pref
            best = Switch(target, pref - here)
    return best


MEMBERSHIP = "membership"
DEPARTURES = "departures"
HISTORY_MODES = (MEMBERSHIP, DEPARTURES)


def apply_switch(partition: Partition, hist: HistoryBook, player: PlayerId,
                 target: Optional[frozenset], history: str = MEMBERSHIP) -> tuple[frozenset, frozenset]:
    """Move ``player`` and update histories.

    ``history="departures"`` stores only the coalition the mover left.
    ``history="membership"`` also stores, for every other member of the two
    affected coalitions, the coalition it was part of before the move; a
    partition can then never be re-entered.
    """
    if history not in HISTORY_MODES:
        raise ValueError(f"unknown history mode {history!r}")
    old = partition.coalition_of(player)
    hist.record(player, old)
    if history == MEMBERSHIP:
        for q in old:
            hist.record(q, old)
        if target is not None:
            for q in target:
                hist.record(q, target)
    return partition.move(player, target)


# --------------------------------------------------------------------------
# formation loop

@dataclass(frozen=True)
class SwitchRecord:
    turn: int
    player: PlayerId
    from_members: frozenset
    to_members: frozenset
    gain: float


@dataclass
class FormationLog:
    records: list = field(default_factory=list)
    turns: int = 0
    rounds: int = 0
    converged: bool = False
    revisits: list = field(default_factory=list)  # turns that re-entered an earlier partition

    @property
    def n_switches(self) -> int:
        return len(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["turn", "player_kind", "player_index", "from_size", "to_size", "gain"])
        for r in self.records:
            w.writerow([r.turn, "agent" if r.player.is_agent else "task", r.player.index,
                        len(r.from_members), len(r.to_members), repr(float(r.gain))])
        return buf.getvalue()


OrderPolicy = Union[str, Callable[[int, Sequence[PlayerId], np.random.Generator], Sequence[PlayerId]]]


def bell_number(n: int) -> int:
    """Bell numbers via the Bell triangle."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def default_switch_cap(n_players: int) -> int:
    return min(bell_number(n_players), 200_000)


def _round_order(policy: OrderPolicy, rnd: int, players: list, rng: Optional[np.random.Generator]) -> Sequence:
    if callable(policy):
        return policy(rnd, players, rng)
    if policy == "random":
        if rng is None:
            raise ValueError("random order of play needs an rng")
        return [players[i] for i in rng.permutation(len(players))]
    if policy == "fixed":
        return players
    raise ValueError(f"unknown order policy {policy!r}")


def run_formation(valuer: CoalitionValuer, initial: Optional[Partition] = None,
                  order_policy: OrderPolicy = "random", rng: Optional[np.random.Generator] = None,
                  hist: Optional[HistoryBook] = None, max_switches: Optional[int] = None,
                  history: str = MEMBERSHIP) -> tuple[Partition, FormationLog, HistoryBook]:
    """Sequential best-switch dynamics until a full round makes no switch.

    Returns the final partition, the log and the players' histories.
    """
    scenario = valuer.scenario
    partition = (initial.copy() if initial is not None else Partition.singletons(scenario.players))
    hist = hist if hist is not None else HistoryBook()
    players = sorted(partition.players)
    cap = max_switches if max_switches is not None else default_switch_cap(len(players))
    log = FormationLog()
    seen = {hash(partition.key())}
    turn = 0
    while True:
        moved = False
        for player in _round_order(order_policy, log.rounds, players, rng):
            turn += 1
            sw = find_best_switch(player, partition, hist, valuer)
            if sw is None:
                continue
            old, new = apply_switch(partition, hist, player, sw.target, history)
            log.records.append(SwitchRecord(turn, player, old, new, sw.gain))
            key = hash(partition.key())
            if key in seen:
                log.revisits.append(turn)
            seen.add(key)
            moved = True
            if len(log.records) > cap:
                log.turns = turn
                raise FormationDefect(f"more than {cap} switches without convergence", log, partition)
        log.rounds += 1
        if not moved:
            break
    log.turns = turn
    log.converged = True
    return partition, log, hist


# --------------------------------------------------------------------------
# stability

@dataclass(frozen=True)
class Deviation:
    player: PlayerId
    target: Optional[frozenset]
    current_pref: float
    target_pref: float


def is_nash_stable(partition: Partition, hist: HistoryBook, valuer: CoalitionValuer
                   ) -> tuple[bool, Optional[Deviation]]:
    """Check every player against every coalition in the partition and acting alone."""
    for player in sorted(partition.players):
        current = partition.coalition_of(player)
        here = preference(player, current, partition, hist, valuer)
        if here == INFINITE:
            continue
        for target in _candidates(player, partition, restrict_tasks=False):
            joined = frozenset([player]) if target is None else target | {player}
            pref = preference(player, joined, partition, hist, valuer)
            if pref > here:
                return False, Deviation(player, target, here, pref)
    return True, None


def is_individually_stable(partition: Partition, hist: HistoryBook, valuer: CoalitionValuer) -> bool:
    for player in sorted(partition.players):
        current = partition.coalition_of(player)
        here = preference(player, current, partition, hist, valuer)
        if here == INFINITE:
            continue
        for target in _candidates(player, partition, restrict_tasks=False):
            joined = frozenset([player]) if target is None else target | {player}
            if not preference(player, joined, partition, hist, valuer) > here:
                continue
            if target is None:
                return False
            if all(preference(j, joined, partition, hist, valuer) >= preference(j, target, partition, hist, valuer)
                   for j in target):
                return False
    return True


def set_partitions(items: Sequence) -> Iterator[list]:
    """All set partitions of ``items`` via restricted growth strings."""
    items = list(items)
    n = len(items)
    if n == 0:
        yield []
        return
    codes = [0] * n
    maxes = [0] * n

    while True:
        blocks: list[list] = [[] for _ in range(max(codes) + 1)]
        for item, c in zip(items, codes):
            blocks[c].append(item)
        yield blocks
        # next restricted growth string
        i = n - 1
        while i > 0 and codes[i] == maxes[i - 1] + 1:
            i -= 1
        if i == 0:
            return
        codes[i] += 1
        for j in range(i + 1, n):
            codes[j] = 0
        for j in range(i, n):
            maxes[j] = max(maxes[j - 1], codes[j])


MAX_BRUTE_FORCE = 10


def brute_force_stable_set(players: Iterable[PlayerId], valuer: CoalitionValuer) -> list:
    """Every Nash-stable partition under empty histories."""
    players = sorted(players)
    if len(players) > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE} players")
    empty = HistoryBook()
    stable = []
    for blocks in set_partitions(players):
        p = Partition(blocks)
        if is_nash_stable(p, empty, valuer)[0]:
            stable.append(p)
    return stable


# --------------------------------------------------------------------------
# baseline

def equal_allocation_partition(scenario: Scenario) -> Partition:
    """Give every agent an (almost) equal share of nearby tasks.

    Agents pick in round-robin; each takes the unassigned task nearest to the
    centroid of its current tasks (its own position before the first pick).
    """
    agents = sorted(scenario.agents, key=lambda a: a.id)
    if not agents:
        return Partition.singletons(scenario.players)
    unassigned = {t.id: t for t in scenario.tasks}
    groups: dict = {a.id: [] for a in agents}
    while unassigned:
        for a in agents:
            if not unassigned:
                break
            mine = groups[a.id]
            if mine:
                cx = sum(t.position[0] for t in mine) / len(mine)
                cy = sum(t.position[1] for t in mine) / len(mine)
                anchor = (cx, cy)
            else:
                anchor = a.position
            pick = min(unassigned.values(), key=lambda t: (distance(anchor, t.position), t.id))
            mine.append(pick)
            del unassigned[pick.id]
    return Partition([a.id] + [t.id for t in groups[a.id]] for a in agents)
