"""Task-visit ordering inside a coalition and its switchover time."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .model import Position, TaskSpec


@dataclass(frozen=True)
class Route:
    order: tuple  # task ids, cyclic
    cycle_length: float  # m

    def legs(self, positions: dict) -> list[float]:
        """Length of each leg, the closing leg last."""
        n = len(self.order)
        if n < 2:
            return [0.0] * n
        pts = [positions[t] for t in self.order]
        return [math.dist(pts[h], pts[(h + 1) % n]) for h in range(n)]


def _cycle_length(points: Sequence[Position], order: Sequence[int]) -> float:
    n = len(order)
    if n < 2:
        return 0.0
    return sum(math.dist(points[order[h]], points[order[(h + 1) % n]]) for h in range(n))


def _nn_from(start: int, dmat: list, n: int) -> tuple[list, float]:
    order = [start]
    unvisited = set(range(n))
    unvisited.discard(start)
    length = 0.0
    cur = start
    while unvisited:
        row = dmat[cur]
        # ties resolve to the lower index
        nxt = min(unvisited, key=lambda j: (row[j], j))
        length += row[nxt]
        unvisited.discard(nxt)
        order.append(nxt)
        cur = nxt
    length += dmat[cur][start]
    return order, length


def nearest_neighbor_route(tasks: Sequence[TaskSpec]) -> Route:
    """Best nearest-neighbour tour over all possible start tasks.

    Tasks are processed in ascending id order so the result does not depend
    on the input order; ties go to the lower task index.
    """
    if not tasks:
        raise ValueError("cannot route an empty task list")
    tasks = sorted(tasks, key=lambda t: t.id)
    n = len(tasks)
    if n == 1:
        return Route((tasks[0].id,), 0.0)
    pts = [t.position for t in tasks]
    dmat = [[math.dist(p, q) for q in pts] for p in pts]
    best = None
    for s in range(n):
        order, length = _nn_from(s, dmat, n)
        if best is None or length < best[1]:
            best = (order, length)
    order, length = best
    return Route(tuple(tasks[i].id for i in order), length)


def optimal_route_length(points: Sequence[Position]) -> float:
    """Exact shortest closed tour by enumeration (small inputs only)."""
    n = len(points)
    if n > 10:
        raise ValueError("brute force limited to 10 points")
    if n < 2:
        return 0.0
    best = math.inf
    for perm in itertools.permutations(range(1, n)):
        best = min(best, _cycle_length(points, (0,) + perm))
    return best


def total_switchover(route: Route, velocity: float) -> float:
    if not velocity > 0:
        raise ValueError("velocity must be positive")
    return route.cycle_length / velocity
