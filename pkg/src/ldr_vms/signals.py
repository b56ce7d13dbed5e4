"""Signal split controllers: equal-split default and a linear responsive rule.

Green fractions scale the per-step discharge capacity of the links a phase
serves; there is no explicit phase switching inside a step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .history import StateHistory
from .network import Intersection, Network
from .vms import ConfigurationError

DEFAULT_G_MIN = 0.1


def default_plan(intersection: Intersection | int) -> np.ndarray:
    n = intersection if isinstance(intersection, int) else intersection.phase_count
    return np.full(n, 1.0 / n)


def project_splits(scores: np.ndarray, g_min: float) -> np.ndarray:
    """Map raw phase scores onto {g >= g_min, sum(g) = 1}.

    Scores are shifted so the smallest becomes 1, normalized, then blended
    with the minimum green.
    """
    s = np.asarray(scores, dtype=float)
    n = s.size
    if not np.all(np.isfinite(s)):
        return np.full(n, 1.0 / n)
    with np.errstate(over="ignore", invalid="ignore"):
        shifted = s - s.min() + 1.0
        norm = shifted / shifted.sum()
    if not np.all(np.isfinite(norm)):
        # spread beyond float range: halve before shifting, the +1 is negligible there
        shifted = s / 2 - s.min() / 2
        norm = shifted / shifted.sum()
    return g_min + (1.0 - n * g_min) * norm


@dataclass(frozen=True)
class LdrSignalPolicy:
    """One coefficient matrix (phases x links*delta) per intersection."""

    matrices: tuple[np.ndarray, ...]
    history_depth: int
    g_min: float = DEFAULT_G_MIN

    def __post_init__(self) -> None:
        mats = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in self.matrices)
        object.__setattr__(self, "matrices", mats)
        if self.history_depth < 1:
            raise ConfigurationError("history depth must be >= 1")
        widths = {b.shape[1] for b in mats}
        if len(widths) > 1:
            raise ConfigurationError(f"coefficient matrices disagree on width: {sorted(widths)}")
        if mats and mats[0].shape[1] % self.history_depth:
            raise ConfigurationError("matrix width not divisible by history depth")
        for b in mats:
            if not self.g_min * b.shape[0] < 1.0:
                raise ConfigurationError(f"g_min={self.g_min} infeasible for {b.shape[0]} phases")
        if self.g_min < 0:
            raise ConfigurationError("g_min must be >= 0")

    @property
    def link_count(self) -> int:
        return self.matrices[0].shape[1] // self.history_depth if self.matrices else 0

    @classmethod
    def zero(cls, network: Network, delta: int = 1, g_min: float = DEFAULT_G_MIN) -> LdrSignalPolicy:
        width = network.link_count * delta
        return cls(tuple(np.zeros((ix.phase_count, width)) for ix in network.intersections), delta, g_min)


def ldr_splits(policy: LdrSignalPolicy, history: StateHistory) -> list[np.ndarray]:
    if history.link_count != policy.link_count:
        raise ConfigurationError(f"signal policy expects {policy.link_count} links, history has {history.link_count}")
    q = history.stacked(policy.history_depth)
    return [project_splits(b @ q, policy.g_min) for b in policy.matrices]


class SignalController:
    history_depth = 1

    def check(self, network: Network) -> None:
        pass

    def reset(self) -> None:
        pass

    def plan(self, history: StateHistory) -> Sequence[np.ndarray]:
        raise NotImplementedError


class DefaultSignals(SignalController):
    def __init__(self, network: Network):
        self._plan = [default_plan(ix) for ix in network.intersections]

    def plan(self, history: StateHistory) -> Sequence[np.ndarray]:
        return self._plan


class LdrSignals(SignalController):
    def __init__(self, policy: LdrSignalPolicy):
        self.policy = policy
        self.history_depth = policy.history_depth
        # one stacked matrix keeps the per-step cost to a single product
        self._stack = np.vstack(policy.matrices) if policy.matrices else np.zeros((0, 0))
        self._cuts = np.cumsum([b.shape[0] for b in policy.matrices])[:-1]

    def check(self, network: Network) -> None:
        if len(self.policy.matrices) != len(network.intersections):
            raise ConfigurationError(
                f"signal policy has {len(self.policy.matrices)} intersections, network has {len(network.intersections)}")
        for b, ix in zip(self.policy.matrices, network.intersections):
            if b.shape[0] != ix.phase_count:
                raise ConfigurationError(f"intersection {ix.node}: {b.shape[0]} rows for {ix.phase_count} phases")
        if self.policy.link_count != network.link_count:
            raise ConfigurationError(
                f"signal policy built for {self.policy.link_count} links, network has {network.link_count}")

    def plan(self, history: StateHistory) -> Sequence[np.ndarray]:
        scores = self._stack @ history.stacked(self.policy.history_depth)
        return [project_splits(s, self.policy.g_min) for s in np.split(scores, self._cuts)]
