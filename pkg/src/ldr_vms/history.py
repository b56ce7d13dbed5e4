"""Ring buffer of recent occupancy vectors, shared by all controllers."""

from __future__ import annotations

from collections import deque

import numpy as np


class StateHistory:
    """Most recent occupancy vectors q(t-1), q(t-2), ... newest first.

    Raw vehicle counts are kept for rules that reason in vehicles (the
    genuine display); the normalized copy (count / reference occupancy)
    feeds the linear decision rules.
    """

    def __init__(self, reference: np.ndarray, depth: int):
        if depth < 1:
            raise ValueError("history depth must be >= 1")
        self.reference = np.asarray(reference, dtype=float)
        self.depth = depth
        self._raw: deque[np.ndarray] = deque(maxlen=depth)
        self._norm: deque[np.ndarray] = deque(maxlen=depth)

    @property
    def link_count(self) -> int:
        return self.reference.shape[0]

    def __len__(self) -> int:
        return len(self._raw)

    def push(self, occupancy) -> None:
        raw = np.asarray(occupancy, dtype=float)
        if raw.shape != self.reference.shape:
            raise ValueError(f"occupancy vector of length {raw.shape[0]}, expected {self.link_count}")
        self._raw.appendleft(raw)
        self._norm.appendleft(raw / self.reference)

    def raw(self, lag: int = 1) -> np.ndarray:
        """Raw counts ``lag`` steps back (zeros before the first step)."""
        if lag <= len(self._raw):
            return self._raw[lag - 1]
        return np.zeros(self.link_count)

    def stacked(self, delta: int) -> np.ndarray:
        """Normalized [q(t-1); ...; q(t-delta)], zero-padded for missing lags."""
        if delta > self.depth:
            raise ValueError(f"history keeps {self.depth} lags, {delta} requested")
        n = self.link_count
        out = np.zeros(n * delta)
        for k, vec in enumerate(self._norm):
            if k >= delta:
                break
            out[k * n:(k + 1) * n] = vec
        return out
