"""Queueing side of a coalition: its collectors form one polling server.

The server visits the coalition's tasks cyclically with exhaustive service,
deterministic service time ``1/capacity`` and deterministic switchover.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import AgentSpec, TaskSpec

AS_PRINTED = "as-printed"
STANDARD = "standard"
EQ4_FORMS = (AS_PRINTED, STANDARD)


class UnstableCoalitionError(ValueError):
    """Total utilization is >= 1; the mean delay is infinite."""


@dataclass(frozen=True)
class PollingProfile:
    rho_per_task: tuple
    rho_total: float
    capacity: float
    switchover_total: float


def aggregate_capacity(collectors: Iterable[AgentSpec]) -> float:
    caps = [a.capacity for a in collectors]
    if not caps:
        raise ValueError("collector set is empty")
    return float(sum(caps))


def utilization_profile(tasks: Sequence[TaskSpec], capacity: float, switchover_total: float = 0.0) -> PollingProfile:
    if not capacity > 0:
        raise ValueError("capacity must be positive")
    rho = tuple(t.arrival_rate / capacity for t in tasks)
    return PollingProfile(rho, sum(rho), float(capacity), float(switchover_total))


def profile_from_rates(rates: Sequence[float], capacity: float, switchover_total: float = 0.0) -> PollingProfile:
    if not capacity > 0:
        raise ValueError("capacity must be positive")
    rho = tuple(r / capacity for r in rates)
    return PollingProfile(rho, sum(rho), float(capacity), float(switchover_total))


def is_stable(profile: PollingProfile) -> bool:
    return profile.rho_total < 1.0


def min_collectors(tasks: Sequence[TaskSpec], capacity: float) -> float:
    """Lower bound on the collector count for homogeneous agents.

    A stable coalition needs strictly more collectors than the returned value.
    """
    if not capacity > 0:
        raise ValueError("capacity must be positive")
    return sum(t.arrival_rate for t in tasks) / capacity


def weighted_mean_wait(profile: PollingProfile, form: str = AS_PRINTED) -> float:
    """Utilization-weighted sum of mean waits, ``sum_i rho_i * W_i``.

    ``form="as-printed"`` uses a switchover term ``rho_S * theta**2 / 2``;
    ``form="standard"`` uses ``rho_S * theta / 2``, the value of the classical
    pseudo-conservation law for a deterministic total switchover ``theta``.
    """
    if form not in EQ4_FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {EQ4_FORMS}")
    if not profile.capacity > 0:
        raise ValueError("capacity must be positive")
    rs = profile.rho_total
    if not rs < 1.0:
        raise UnstableCoalitionError(f"rho_S = {rs:.6g} >= 1")
    theta = profile.switchover_total
    sum_rho = rs
    sum_sq = sum(r * r for r in profile.rho_per_task)
    service = rs * (sum_rho / profile.capacity) / (2.0 * (1.0 - rs))
    if form == AS_PRINTED:
        middle = rs * theta * theta / 2.0
    else:
        middle = rs * theta / 2.0
    cross = theta * (rs * rs - sum_sq) / (2.0 * (1.0 - rs))
    return service + middle + cross
