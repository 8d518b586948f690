"""Domain types, geometry, units and partition bookkeeping."""
from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional


class ConfigError(ValueError):
    """Raised for malformed scenario or plan documents."""


class Kind(enum.IntEnum):
    AGENT = 0
    TASK = 1


class PlayerId(NamedTuple):
    kind: Kind
    index: int

    @classmethod
    def agent(cls, index: int) -> "PlayerId":
        return cls(Kind.AGENT, index)

    @classmethod
    def task(cls, index: int) -> "PlayerId":
        return cls(Kind.TASK, index)

    @property
    def is_agent(self) -> bool:
        return self.kind is Kind.AGENT

    @property
    def is_task(self) -> bool:
        return self.kind is Kind.TASK

    def __repr__(self) -> str:
        return f"{'A' if self.kind is Kind.AGENT else 'T'}{self.index}"


class Position(NamedTuple):
    x: float
    y: float


def distance(a: Position, b: Position) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class AgentSpec:
    id: PlayerId
    capacity: float  # packets/s
    tx_power: float  # W
    velocity: float  # m/s
    position: Position

    def __post_init__(self):
        if not self.id.is_agent:
            raise ValueError(f"{self.id!r} is not an agent id")
        if not (self.capacity > 0 and self.tx_power > 0 and self.velocity > 0):
            raise ValueError("agent capacity, tx_power and velocity must be positive")


@dataclass(frozen=True)
class TaskSpec:
    id: PlayerId
    arrival_rate: float  # packets/s
    class_tag: str
    position: Position

    def __post_init__(self):
        if not self.id.is_task:
            raise ValueError(f"{self.id!r} is not a task id")
        if not self.arrival_rate > 0:
            raise ValueError("task arrival_rate must be positive")


# --------------------------------------------------------------------------
# units

_SCALE_PAIRS = {
    ("bps", "kbps"): 1e-3,
    ("kbps", "bps"): 1e3,
    ("mW", "W"): 1e-3,
    ("W", "mW"): 1e3,
    ("km/h", "m/s"): 1000.0 / 3600.0,
    ("m/s", "km/h"): 3600.0 / 1000.0,
    ("km", "m"): 1e3,
    ("m", "km"): 1e-3,
    ("min", "s"): 60.0,
    ("s", "min"): 1.0 / 60.0,
}


def convert_units(value: float, from_unit: str, to_unit: str, packet_bits: Optional[int] = None) -> float:
    """Convert ``value`` between the supported unit pairs.

    Rates in kbps/bps convert to packets/s ("pps") through ``packet_bits``.
    Logarithmic units: dBm <-> W, dB <-> linear.
    """
    if from_unit == to_unit:
        return float(value)
    pair = (from_unit, to_unit)
    if pair in _SCALE_PAIRS:
        return value * _SCALE_PAIRS[pair]
    if pair == ("dBm", "W"):
        return 10.0 ** (value / 10.0) * 1e-3
    if pair == ("W", "dBm"):
        return 10.0 * math.log10(value / 1e-3)
    if pair == ("dB", "linear"):
        return 10.0 ** (value / 10.0)
    if pair == ("linear", "dB"):
        return 10.0 * math.log10(value)
    if "pps" in pair and {from_unit, to_unit} & {"kbps", "bps"}:
        if packet_bits is None or packet_bits < 1:
            raise ValueError("packet_bits is required to convert bit rates to packets/s")
        bits_per_unit = 1e3 if "kbps" in pair else 1.0
        if to_unit == "pps":
            return value * bits_per_unit / packet_bits
        return value * packet_bits / bits_per_unit
    raise ValueError(f"unsupported unit pair {from_unit!r} -> {to_unit!r}")


# --------------------------------------------------------------------------
# partitions

MemberSet = frozenset  # frozenset[PlayerId]


class PartitionError(ValueError):
    pass


class Partition:
    """A disjoint cover of the player set.

    Coalitions are stored as member-sets in a stable order; ``lookup`` maps a
    player to the index of its coalition.
    """

    def __init__(self, coalitions: Iterable[Iterable[PlayerId]]):
        self.coalitions: list[frozenset] = [frozenset(c) for c in coalitions]
        self.lookup: dict[PlayerId, int] = {}
        self._reindex()

    def _reindex(self):
        self.lookup = {}
        for k, members in enumerate(self.coalitions):
            for p in members:
                self.lookup[p] = k

    @classmethod
    def singletons(cls, players: Iterable[PlayerId]) -> "Partition":
        return cls([p] for p in players)

    @property
    def players(self) -> set:
        return set(self.lookup)

    def coalition_of(self, player: PlayerId) -> frozenset:
        return self.coalitions[self.lookup[player]]

    def copy(self) -> "Partition":
        new = Partition.__new__(Partition)
        new.coalitions = list(self.coalitions)
        new.lookup = dict(self.lookup)
        return new

    def move(self, player: PlayerId, target: Optional[frozenset]) -> tuple[frozenset, frozenset]:
        """Move ``player`` into ``target`` (``None`` means a new singleton).

        Returns the (old, new) member-sets of the player's coalition.
        """
        src = self.lookup[player]
        old = self.coalitions[src]
        if target is None:
            new = frozenset([player])
            dst = None
        else:
            dst = self.coalitions.index(target)
            new = target | {player}
        remaining = old - {player}
        if dst is None:
            self.coalitions.append(new)
        else:
            self.coalitions[dst] = new
        if remaining:
            self.coalitions[src] = remaining
        else:
            del self.coalitions[src]
        self._reindex()
        return old, new

    def remove_player(self, player: PlayerId) -> None:
        k = self.lookup[player]
        rest = self.coalitions[k] - {player}
        if rest:
            self.coalitions[k] = rest
        else:
            del self.coalitions[k]
        self._reindex()

    def add_singleton(self, player: PlayerId) -> None:
        if player in self.lookup:
            raise PartitionError(f"{player!r} already present")
        self.coalitions.append(frozenset([player]))
        self.lookup[player] = len(self.coalitions) - 1

    def key(self) -> frozenset:
        """Order-free identity of the partition."""
        return frozenset(self.coalitions)

    def labels(self, players: Iterable[PlayerId]) -> list[int]:
        return [self.lookup[p] for p in players]

    def __len__(self) -> int:
        return len(self.coalitions)

    def __iter__(self):
        return iter(self.coalitions)

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self) -> str:
        parts = ", ".join("{" + ",".join(map(repr, sorted(c))) + "}" for c in self.coalitions)
        return f"Partition([{parts}])"


@dataclass(frozen=True)
class Violation:
    kind: str  # duplicate | missing | unknown | empty | lookup
    players: tuple

    def __str__(self) -> str:
        return f"{self.kind}: {', '.join(map(repr, self.players))}"


def validate_partition(p: Partition, players: Iterable[PlayerId]) -> Optional[Violation]:
    """Return ``None`` if ``p`` is a valid partition of ``players``, else the first violation."""
    players = set(players)
    seen: dict[PlayerId, int] = {}
    for k, members in enumerate(p.coalitions):
        if not members:
            return Violation("empty", (k,))
        for m in sorted(members):
            if m in seen:
                return Violation("duplicate", (m,))
            seen[m] = k
    unknown = sorted(set(seen) - players)
    if unknown:
        return Violation("unknown", tuple(unknown))
    missing = sorted(players - set(seen))
    if missing:
        return Violation("missing", tuple(missing))
    bad = sorted(q for q in players if p.lookup.get(q) != seen[q])
    if bad or len(p.lookup) != len(seen):
        return Violation("lookup", tuple(bad))
    return None


class HistoryBook:
    """Per-player record of the coalitions (member-sets) a player has left."""

    def __init__(self):
        self._h: dict[PlayerId, set] = {}

    def record(self, player: PlayerId, members: frozenset) -> None:
        if player not in members:
            raise ValueError(f"{player!r} not in the recorded coalition")
        self._h.setdefault(player, set()).add(members)

    def contains(self, player: PlayerId, members: frozenset) -> bool:
        h = self._h.get(player)
        return h is not None and members in h

    def of(self, player: PlayerId) -> frozenset:
        return frozenset(self._h.get(player, ()))

    def clear(self) -> None:
        self._h.clear()

    def copy(self) -> "HistoryBook":
        new = HistoryBook()
        new._h = {k: set(v) for k, v in self._h.items()}
        return new

    def __len__(self) -> int:
        return sum(len(v) for v in self._h.values())


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ChannelParams:
    noise_var: float  # W
    path_loss_const: float
    path_loss_exp: float
    target_snr: float  # linear
    packet_bits: int

    def __post_init__(self):
        if not (self.noise_var > 0 and self.path_loss_const > 0 and self.target_snr > 0):
            raise ValueError("noise_var, path_loss_const and target_snr must be positive")
        if not self.path_loss_exp >= 2:
            raise ValueError("path_loss_exp must be >= 2")
        if int(self.packet_bits) != self.packet_bits or self.packet_bits < 1:
            raise ValueError("packet_bits must be a positive integer")


@dataclass(frozen=True)
class DynamicsConfig:
    psi: float  # s between re-formations
    speed: float  # task speed, m/s
    churn_rate: float  # tasks/minute
    horizon: float  # s

    def __post_init__(self):
        if not self.psi > 0:
            raise ValueError("psi must be positive")
        if self.speed < 0 or self.churn_rate < 0 or self.horizon < 0:
            raise ValueError("speed, churn_rate and horizon must be non-negative")


def _default_channel() -> ChannelParams:
    return ChannelParams(
        noise_var=convert_units(-120.0, "dBm", "W"),
        path_loss_const=1.0,
        path_loss_exp=3.0,
        target_snr=convert_units(10.0, "dB", "linear"),
        packet_bits=256,
    )


def _default_classes() -> tuple:
    return (
        (convert_units(32.0, "kbps", "pps", packet_bits=256), 0.5),
        (convert_units(128.0, "kbps", "pps", packet_bits=256), 0.5),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario generation parameters in internal units (m, s, W, packets/s).

    The area is a square of side ``area_side`` centred on ``receiver``.
    """

    area_side: float = 4000.0
    receiver: Position = Position(0.0, 0.0)
    channel: ChannelParams = field(default_factory=_default_channel)
    delta: float = 1.0
    beta: float = 0.7
    agent_count: int = 5
    task_count: int = 10
    class_table: tuple = field(default_factory=_default_classes)
    agent_capacity: float = 3000.0  # 768 kbps / 256 bits
    tx_power: float = 0.1
    velocity: float = 60.0 * 1000.0 / 3600.0
    dynamics: Optional[DynamicsConfig] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "receiver", Position(*self.receiver))
        object.__setattr__(self, "class_table", tuple((float(l), float(p)) for l, p in self.class_table))
        if not self.area_side > 0:
            raise ConfigError("area_side must be positive")
        if not 0 < self.beta < 1:
            raise ConfigError("beta must lie in (0, 1)")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.agent_count < 1:
            raise ConfigError("agent_count must be >= 1")
        if not self.task_count > self.agent_count:
            raise ConfigError("task_count must exceed agent_count")
        if not self.class_table:
            raise ConfigError("class_table must be non-empty")
        if any(l <= 0 or p < 0 for l, p in self.class_table):
            raise ConfigError("class rates must be positive and probabilities non-negative")
        if not math.isclose(sum(p for _, p in self.class_table), 1.0, rel_tol=1e-9):
            raise ConfigError("class probabilities must sum to 1")
        if not (self.agent_capacity > 0 and self.tx_power > 0 and self.velocity > 0):
            raise ConfigError("agent_capacity, tx_power and velocity must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    # JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["receiver"] = list(self.receiver)
        d["class_table"] = [list(row) for row in self.class_table]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("scenario document must be a JSON object")
        _reject_unknown(data, cls, "scenario")
        kw = dict(data)
        try:
            if "channel" in kw:
                _reject_unknown(kw["channel"], ChannelParams, "channel")
                kw["channel"] = ChannelParams(**kw["channel"])
            if kw.get("dynamics") is not None:
                _reject_unknown(kw["dynamics"], DynamicsConfig, "dynamics")
                kw["dynamics"] = DynamicsConfig(**kw["dynamics"])
            if "receiver" in kw:
                kw["receiver"] = Position(*kw["receiver"])
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def _reject_unknown(data, cls, what: str) -> None:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{what} must be a JSON object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown {what} field(s): {', '.join(unknown)}")
