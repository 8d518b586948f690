import numpy as np
import pytest

from hedonic_tasks.model import AgentSpec, PlayerId, Position, ScenarioConfig, TaskSpec
from hedonic_tasks.scenario import Scenario, generate_scenario

CFG = ScenarioConfig()


def agent(i, x=0.0, y=0.0, capacity=3000.0, velocity=CFG.velocity):
    return AgentSpec(PlayerId.agent(i), capacity, CFG.tx_power, velocity, Position(x, y))


def task(j, x, y, rate=125.0):
    return TaskSpec(PlayerId.task(j), rate, "voice" if rate == 125.0 else "video", Position(x, y))


def make_scenario(agents, tasks, beta=0.7):
    return Scenario(agents=agents, tasks=tasks, receiver=CFG.receiver, channel=CFG.channel, beta=beta)


@pytest.fixture
def small_scenario():
    return generate_scenario(ScenarioConfig(agent_count=3, task_count=7, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
