"""Concrete problem instances and their random generation."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    AgentSpec,
    ChannelParams,
    PlayerId,
    Position,
    ScenarioConfig,
    TaskSpec,
)


@dataclass(frozen=True)
class Scenario:
    """Agents, tasks and the physical/economic constants of one instance."""

    agents: tuple
    tasks: tuple
    receiver: Position
    channel: ChannelParams
    delta: float = 1.0
    beta: float = 0.7
    area_side: float = 4000.0

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "receiver", Position(*self.receiver))

    @property
    def players(self) -> list:
        return [a.id for a in self.agents] + [t.id for t in self.tasks]

    @property
    def agent_map(self) -> dict:
        return {a.id: a for a in self.agents}

    @property
    def task_map(self) -> dict:
        return {t.id: t for t in self.tasks}

    @property
    def bounds(self) -> tuple:
        h = self.area_side / 2.0
        rx, ry = self.receiver
        return (rx - h, rx + h, ry - h, ry + h)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


def draw_task(index: int, cfg_or_scenario, rng: np.random.Generator, table=None) -> TaskSpec:
    """One task uniform over the area with a class drawn from ``table``."""
    x0, x1, y0, y1 = _bounds(cfg_or_scenario)
    table = table if table is not None else cfg_or_scenario.class_table
    probs = np.array([p for _, p in table], dtype=float)
    k = int(rng.choice(len(table), p=probs / probs.sum()))
    pos = Position(float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
    return TaskSpec(PlayerId.task(index), table[k][0], f"class{k}", pos)


def _bounds(obj) -> tuple:
    h = obj.area_side / 2.0
    rx, ry = obj.receiver
    return (rx - h, rx + h, ry - h, ry + h)


def generate_scenario(cfg: ScenarioConfig, rng: Optional[np.random.Generator] = None) -> Scenario:
    """Draw tasks (uniform positions, classes from the class table) and agents.

    Agents are also placed uniformly; their positions do not enter the value
    model.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    x0, x1, y0, y1 = _bounds(cfg)
    tasks = [draw_task(j, cfg, rng) for j in range(cfg.task_count)]
    agents = []
    for i in range(cfg.agent_count):
        pos = Position(float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
        agents.append(AgentSpec(PlayerId.agent(i), cfg.agent_capacity, cfg.tx_power, cfg.velocity, pos))
    return Scenario(
        agents=tuple(agents),
        tasks=tuple(tasks),
        receiver=cfg.receiver,
        channel=cfg.channel,
        delta=cfg.delta,
        beta=cfg.beta,
        area_side=cfg.area_side,
    )
