"""Rayleigh-fading packet success over direct and relayed paths."""
from __future__ import annotations

import math
from typing import Sequence

from .model import ChannelParams, Position, distance

HopPath = Sequence[float]


def _bit_exponent(d: float, ch: ChannelParams, tx_power: float) -> float:
    return ch.noise_var * ch.target_snr * d ** ch.path_loss_exp / (ch.path_loss_const * tx_power)


def bit_success_prob(d: float, ch: ChannelParams, tx_power: float) -> float:
    """Probability that one bit sent over distance ``d`` keeps the SNR above target."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    return math.exp(-_bit_exponent(d, ch, tx_power))


def log_packet_success(path: HopPath, ch: ChannelParams, tx_power: float) -> float:
    if len(path) == 0:
        raise ValueError("hop path must contain at least one hop")
    return -ch.packet_bits * sum(_bit_exponent(d, ch, tx_power) for d in path)


def packet_success_prob(path: HopPath, ch: ChannelParams, tx_power: float) -> float:
    """Success probability of a ``B``-bit packet across every hop of ``path``."""
    return math.exp(log_packet_success(path, ch, tx_power))


def relay_hop_path(task: Position, receiver: Position, n_relays: int) -> list[float]:
    """Hops from ``task`` to ``receiver`` with relays at equal spacing on the line."""
    if n_relays < 0:
        raise ValueError("n_relays must be >= 0")
    hop = distance(task, receiver) / (n_relays + 1)
    return [hop] * (n_relays + 1)
