"""VMS display controllers and the driver compliance model.

Messages are ordered Route1Strong < Route1Moderate < NoDisplay <
Route2Moderate < Route2Strong, which is also the left-to-right order of the
threshold bins used by the linear rule.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .history import StateHistory
from .network import Network

DEFAULT_THRESHOLDS = (-2.0, -0.5, 0.5, 2.0)
DEFAULT_BANDS = (10.0, 30.0)


class ConfigurationError(ValueError):
    """Controller dimensions do not match the network or history."""


class VmsMessage(enum.IntEnum):
    ROUTE1_STRONG = 0
    ROUTE1_MODERATE = 1
    NO_DISPLAY = 2
    ROUTE2_MODERATE = 3
    ROUTE2_STRONG = 4

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> VmsMessage:
        for m, text in _LABELS.items():
            if text == label:
                return m
        raise ValueError(f"unknown message {label!r}")

    def mirror(self) -> VmsMessage:
        return VmsMessage(4 - int(self))

    @property
    def recommends(self) -> int:
        """1 or 2 for the route the message points to, 0 for no display."""
        return (1, 1, 0, 2, 2)[self]


_LABELS = {
    VmsMessage.ROUTE1_STRONG: "Route1Strong",
    VmsMessage.ROUTE1_MODERATE: "Route1Moderate",
    VmsMessage.NO_DISPLAY: "NoDisplay",
    VmsMessage.ROUTE2_MODERATE: "Route2Moderate",
    VmsMessage.ROUTE2_STRONG: "Route2Strong",
}


@dataclass(frozen=True)
class ComplianceProfile:
    """Route-1 choice probability for each message, in message order.

    ``route1_share[0]`` belongs to Route1Strong and is the largest entry.
    """

    route1_share: tuple[float, float, float, float, float]

    def __post_init__(self) -> None:
        c = tuple(float(v) for v in self.route1_share)
        if len(c) != 5:
            raise ValueError("compliance profile needs exactly 5 entries")
        if any(not 0.0 < v < 1.0 for v in c):
            raise ValueError(f"compliance rates must lie in (0, 1): {c}")
        if any(a < b for a, b in zip(c, c[1:])):
            raise ValueError(f"compliance must not increase from Route1Strong to Route2Strong: {c}")
        object.__setattr__(self, "route1_share", c)

    @classmethod
    def parse(cls, values: Sequence[float]) -> ComplianceProfile:
        """Accept a monotone 5-vector in either direction.

        Published profiles are usually listed ascending, e.g.
        (0.1, 0.3, 0.5, 0.7, 0.9); the largest share is always bound to
        Route1Strong.
        """
        vals = [float(v) for v in values]
        if len(vals) != 5:
            raise ValueError("compliance profile needs exactly 5 entries")
        if all(a <= b for a, b in zip(vals, vals[1:])):
            vals.reverse()
        return cls(tuple(vals))

    def share(self, message: VmsMessage) -> float:
        return self.route1_share[int(message)]

    def tag(self) -> str:
        """Ascending comma list, the notation used on the command line."""
        return ",".join(f"{v:g}" for v in reversed(self.route1_share))


@dataclass(frozen=True)
class LdrVmsPolicy:
    coefficients: np.ndarray
    history_depth: int
    thresholds: tuple[float, float, float, float] = DEFAULT_THRESHOLDS

    def __post_init__(self) -> None:
        a = np.asarray(self.coefficients, dtype=float).ravel()
        object.__setattr__(self, "coefficients", a)
        m = tuple(float(v) for v in self.thresholds)
        object.__setattr__(self, "thresholds", m)
        if self.history_depth < 1:
            raise ConfigurationError("history depth must be >= 1")
        if a.size % self.history_depth:
            raise ConfigurationError(f"{a.size} coefficients not divisible by delta={self.history_depth}")
        if len(m) != 4 or any(not x < y for x, y in zip(m, m[1:])):
            raise ConfigurationError(f"thresholds must be 4 strictly increasing values: {m}")

    @property
    def link_count(self) -> int:
        return self.coefficients.size // self.history_depth

    @classmethod
    def zero(cls, link_count: int, delta: int = 1) -> LdrVmsPolicy:
        return cls(np.zeros(link_count * delta), delta)


def ldr_score(policy: LdrVmsPolicy, history: StateHistory) -> float:
    """mu = A . [q(t-1); ...; q(t-delta)] on normalized occupancies."""
    if history.link_count != policy.link_count:
        raise ConfigurationError(f"policy expects {policy.link_count} links, history has {history.link_count}")
    return float(policy.coefficients @ history.stacked(policy.history_depth))


def project(mu: float, thresholds: Sequence[float]) -> VmsMessage:
    """Half-open bins (-inf, m1], (m1, m2], (m2, m3], (m3, m4], (m4, inf)."""
    m1, m2, m3, m4 = thresholds
    if mu <= m1:
        return VmsMessage.ROUTE1_STRONG
    if mu <= m2:
        return VmsMessage.ROUTE1_MODERATE
    if mu <= m3:
        return VmsMessage.NO_DISPLAY
    if mu <= m4:
        return VmsMessage.ROUTE2_MODERATE
    return VmsMessage.ROUTE2_STRONG


def route_volumes(network: Network, occupancy) -> tuple[float, float]:
    """Vehicles currently on the two choice routes."""
    out = []
    for rid in network.vms.choice_routes:
        out.append(float(sum(occupancy[network.link_index(lid)] for lid in network.route(rid).links)))
    return out[0], out[1]


def genuine_message(volume_difference: float, bands: Sequence[float] = DEFAULT_BANDS) -> VmsMessage:
    """Truthful display for d = V_route1 - V_route2.

    |d| <= inner band shows nothing; beyond it the emptier route is
    recommended, strongly once |d| exceeds the outer band.
    """
    inner, outer = bands
    d = volume_difference
    if d > outer:
        return VmsMessage.ROUTE2_STRONG
    if d > inner:
        return VmsMessage.ROUTE2_MODERATE
    if d < -outer:
        return VmsMessage.ROUTE1_STRONG
    if d < -inner:
        return VmsMessage.ROUTE1_MODERATE
    return VmsMessage.NO_DISPLAY


def choose_route(message: VmsMessage, profile: ComplianceProfile, rng: random.Random) -> int:
    """Return 1 or 2; consumes exactly one draw."""
    return 1 if rng.random() < profile.share(message) else 2


class VmsController:
    """Base class; subclasses decide one message per step."""

    history_depth = 1

    def check(self, network: Network) -> None:
        pass

    def reset(self) -> None:
        pass

    def decide(self, history: StateHistory) -> VmsMessage:
        raise NotImplementedError


class ConstantVms(VmsController):
    def __init__(self, message: VmsMessage = VmsMessage.NO_DISPLAY):
        self.message = message

    def decide(self, history: StateHistory) -> VmsMessage:
        return self.message


class SequenceVms(VmsController):
    """Open-loop display: message k is shown at step k + 1."""

    def __init__(self, messages: Sequence[VmsMessage]):
        self.messages = tuple(VmsMessage(m) for m in messages)
        self._step = 0

    def reset(self) -> None:
        self._step = 0

    def decide(self, history: StateHistory) -> VmsMessage:
        m = self.messages[min(self._step, len(self.messages) - 1)]
        self._step += 1
        return m


class LdrVms(VmsController):
    def __init__(self, policy: LdrVmsPolicy):
        self.policy = policy
        self.history_depth = policy.history_depth

    def check(self, network: Network) -> None:
        if network.link_count != self.policy.link_count:
            raise ConfigurationError(
                f"VMS policy built for {self.policy.link_count} links, network has {network.link_count}")

    def decide(self, history: StateHistory) -> VmsMessage:
        return project(ldr_score(self.policy, history), self.policy.thresholds)


class GenuineVms(VmsController):
    def __init__(self, network: Network, bands: Sequence[float] = DEFAULT_BANDS):
        self.bands = tuple(bands)
        self._routes = [
            np.array([network.link_index(lid) for lid in network.route(rid).links])
            for rid in network.vms.choice_routes
        ]

    def decide(self, history: StateHistory) -> VmsMessage:
        q = history.raw(1)
        d = q[self._routes[0]].sum() - q[self._routes[1]].sum()
        return genuine_message(float(d), self.bands)
