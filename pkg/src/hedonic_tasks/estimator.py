"""Estimator-style wrappers: formation as clustering of players into coalitions."""
from __future__ import annotations

import numbers
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted, check_scalar

from .engine import HISTORY_MODES, MEMBERSHIP, equal_allocation_partition, run_formation
from .model import ConfigError, HistoryBook, Partition, ScenarioConfig, validate_partition
from .polling import AS_PRINTED, EQ4_FORMS
from .scenario import Scenario, generate_scenario
from .value import CoalitionValuer


def check_scenario(X) -> Scenario:
    """Return a concrete scenario; a ``ScenarioConfig`` is drawn from its own seed."""
    if isinstance(X, ScenarioConfig):
        return generate_scenario(X, np.random.default_rng(X.seed))
    if not isinstance(X, Scenario):
        raise TypeError(f"expected a Scenario or ScenarioConfig, got {type(X).__name__}")
    ids = X.players
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate player ids in scenario")
    if any(not p.is_agent for p in (a.id for a in X.agents)) or any(not p.is_task for p in (t.id for t in X.tasks)):
        raise ValueError("agent/task ids carry the wrong kind")
    return X


def check_choice(name: str, value, options) -> None:
    if value not in options:
        raise ValueError(f"{name} must be one of {sorted(options)}, got {value!r}")


def _rng(random_state) -> np.random.Generator:
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, numbers.Integral):
        return np.random.default_rng(random_state)
    return np.random.default_rng(check_random_state(random_state).randint(2**32))


class _PartitionResult(ClusterMixin, BaseEstimator):
    def _store(self, scenario: Scenario, partition: Partition, valuer: CoalitionValuer):
        players = sorted(scenario.players)
        problem = validate_partition(partition, players)
        if problem is not None:
            raise RuntimeError(f"invalid partition: {problem}")
        self.players_ = players
        self.partition_ = partition
        self.valuer_ = valuer
        self.labels_ = np.array(partition.labels(players), dtype=int)
        self.payoffs_ = np.array([valuer.payoff(partition.coalition_of(p)) for p in players], dtype=float)
        self.n_coalitions_ = len(partition)

    def score(self, X=None, y=None) -> float:
        """Average player payoff of the fitted partition."""
        check_is_fitted(self, "partition_")
        return float(self.payoffs_.mean()) if len(self.payoffs_) else 0.0

    def coalition_sizes(self) -> np.ndarray:
        check_is_fitted(self, "partition_")
        return np.array([len(c) for c in self.partition_], dtype=int)


class HedonicCoalitionFormation(_PartitionResult):
    """Switch-rule coalition formation between agents and tasks.

    Parameters
    ----------
    eq4_form : {"as-printed", "standard"}
        Which delay expression the coalition value uses.
    order : {"random", "fixed"} or callable
        Order in which players get their turn in each round.
    history : {"membership", "departures"}
        What is remembered after a switch (see ``apply_switch``).
    max_switches : int or None
        Switch budget; ``None`` uses a Bell-number based cap.
    random_state : int, Generator or None

    Attributes
    ----------
    partition_ : Partition
    labels_ : ndarray of shape (n_players,)
        Coalition index of every player, players in sorted id order.
    payoffs_ : ndarray of shape (n_players,)
    log_ : FormationLog
    history_ : HistoryBook
    converged_ : bool
    """

    def __init__(self, eq4_form: str = AS_PRINTED, order="random", history: str = MEMBERSHIP,
                 max_switches: Optional[int] = None, random_state=None):
        self.eq4_form = eq4_form
        self.order = order
        self.history = history
        self.max_switches = max_switches
        self.random_state = random_state

    def _validate_params(self):
        check_choice("eq4_form", self.eq4_form, EQ4_FORMS)
        check_choice("history", self.history, HISTORY_MODES)
        if not callable(self.order):
            check_choice("order", self.order, ("random", "fixed"))
        if self.max_switches is not None:
            check_scalar(self.max_switches, "max_switches", numbers.Integral, min_val=0)

    def fit(self, X, y=None, initial: Optional[Partition] = None):
        self._validate_params()
        rng = _rng(self.random_state)
        scenario = check_scenario(X)
        valuer = CoalitionValuer(scenario, self.eq4_form)
        partition, log, hist = run_formation(valuer, initial=initial, order_policy=self.order, rng=rng,
                                             hist=HistoryBook(), max_switches=self.max_switches,
                                             history=self.history)
        self.log_ = log
        self.history_ = hist
        self.converged_ = log.converged
        self._store(scenario, partition, valuer)
        return self


class EqualAllocation(_PartitionResult):
    """Baseline: tasks dealt out to agents in near-equal nearby groups."""

    def __init__(self, eq4_form: str = AS_PRINTED):
        self.eq4_form = eq4_form

    def fit(self, X, y=None):
        check_choice("eq4_form", self.eq4_form, EQ4_FORMS)
        scenario = check_scenario(X)
        valuer = CoalitionValuer(scenario, self.eq4_form)
        self._store(scenario, equal_allocation_partition(scenario), valuer)
        return self


__all__ = ["HedonicCoalitionFormation", "EqualAllocation", "check_scenario", "check_choice", "ConfigError"]
