"""Medium access and lossy broadcast channel.

Time is divided into MPC steps of ``Ts`` seconds, each holding ``Nips``
ADMM rounds of ``dT = Ts / Nips`` seconds. Under TDMA agent ``a`` owns the
sub-slot starting at ``a * dT / V`` of every round; under FDMA all agents
transmit at the round start on disjoint bands (full duplex). ``SYNC`` is the
idealized reference exchange: simultaneous, bidirectional and reliable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "Scheme",
    "MacConfig",
    "ChannelEvent",
    "schedule",
    "broadcast",
    "detect_loss",
    "data_rate",
]


class Scheme(str, enum.Enum):
    TDMA = "tdma"
    FDMA = "fdma"
    SYNC = "sync"


@dataclass(frozen=True)
class MacConfig:
    scheme: Scheme = Scheme.TDMA
    V: int = 4
    Ts: float = 8.0
    Nips: int = 3
    loss_prob: float = 0.0
    prop_delay: float = 0.02
    overhead: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.V < 2:
            raise ConfigError(f"V must be >= 2, got {self.V}")
        if self.Nips < 1:
            raise ConfigError(f"Nips must be >= 1, got {self.Nips}")
        if not self.Ts > 0:
            raise ConfigError(f"Ts must be positive, got {self.Ts}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError(f"loss_prob must be in [0, 1], got {self.loss_prob}")
        if self.prop_delay < 0 or self.overhead < 0:
            raise ConfigError("prop_delay and overhead must be non-negative")
        if self.scheme is not Scheme.SYNC and self.prop_delay + self.overhead >= self.allowed_time:
            raise ConfigError(
                f"{self.scheme.value}: prop_delay + overhead = "
                f"{self.prop_delay + self.overhead} s does not fit the allowed "
                f"{self.allowed_time} s per transmission"
            )

    @property
    def dT(self) -> float:
        return self.Ts / self.Nips

    @property
    def allowed_time(self) -> float:
        """Time budget per transmission: ``dT / V`` under TDMA, ``dT`` otherwise."""
        return self.dT / self.V if self.scheme is Scheme.TDMA else self.dT


@dataclass
class ChannelEvent:
    sender: int
    payload: str
    send_time: float
    deliveries: dict[int, tuple[bool, float]] = field(default_factory=dict)

    def delivered_to(self, receiver: int) -> bool:
        ok, _ = self.deliveries.get(receiver, (False, np.inf))
        return ok


def schedule(config: MacConfig, mpc_step: int, iteration: int) -> list[tuple[int, float]]:
    """Transmit times of round ``iteration`` of MPC step ``mpc_step``."""
    if not 0 <= iteration < config.Nips:
        raise ConfigError(f"iteration {iteration} outside [0, {config.Nips})")
    start = mpc_step * config.Ts + iteration * config.dT
    if config.scheme is Scheme.TDMA:
        slot = config.dT / config.V
        return [(a, start + a * slot) for a in range(config.V)]
    return [(a, start) for a in range(config.V)]


def broadcast(
    sender: int, payload: str, send_time: float, config: MacConfig, rng: np.random.Generator
) -> ChannelEvent:
    """Deliver a packet to every other agent with independent Bernoulli losses.

    One uniform draw per receiver, in ascending receiver order.
    """
    event = ChannelEvent(sender, payload, send_time)
    arrival = send_time + config.prop_delay
    for receiver in range(config.V):
        if receiver == sender:
            continue
        ok = bool(rng.random() >= config.loss_prob)
        event.deliveries[receiver] = (ok, arrival if ok else np.inf)
    return event


def detect_loss(
    expected: list[tuple[int, float]],
    received: list[ChannelEvent],
    now: float,
    receiver: int,
    window: float,
) -> list[int]:
    """Senders whose expected packet did not reach ``receiver`` in time.

    A packet from a sender expected at ``slot_time`` counts as received only
    if it arrived no later than ``slot_time + window`` and no later than
    ``now``; late packets are discarded.
    """
    lost = []
    for sender, slot_time in expected:
        if sender == receiver:
            continue
        deadline = min(slot_time + window, now)
        ok = False
        for ev in received:
            if ev.sender != sender or abs(ev.send_time - slot_time) > 1e-9:
                continue
            delivered, arrival = ev.deliveries.get(receiver, (False, np.inf))
            if delivered and arrival <= deadline + 1e-12:
                ok = True
                break
        if not ok:
            lost.append(sender)
    return lost


def data_rate(n_pk: int, Nips: int, Ts: float) -> float:
    """Per-agent rate ``N_pk * Nips / Ts`` in bit/s."""
    if Nips < 1:
        raise ConfigError("Nips must be >= 1")
    return n_pk * Nips / Ts
