"""Particle swarm minimization in its bare form: no inertia weight, personal
and global best attraction, optional per-coordinate velocity clamp.

Velocities start at zero and personal bests start unevaluated, so the first
iteration evaluates the initial positions as drawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class PsoError(RuntimeError):
    def __init__(self, message: str, position: np.ndarray):
        super().__init__(message)
        self.position = np.array(position)


@dataclass(frozen=True)
class PsoConfig:
    particle_count: int = 20
    max_iterations: int = 30
    c1: float = 2.0
    c2: float = 2.0
    init_low: float | Sequence[float] = -1.0
    init_high: float | Sequence[float] = 1.0
    # None -> 20% of each coordinate's init range
    velocity_clamp: float | Sequence[float] | None = None
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.particle_count < 2:
            raise ValueError("particle_count must be >= 2")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be > 0")

    def box(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.init_low, dtype=float), (dim,)).copy()
        hi = np.broadcast_to(np.asarray(self.init_high, dtype=float), (dim,)).copy()
        if np.any(hi < lo):
            raise ValueError("init box has high < low")
        return lo, hi

    def clamp(self, dim: int) -> np.ndarray:
        if self.velocity_clamp is None:
            lo, hi = self.box(dim)
            return 0.2 * (hi - lo)
        return np.broadcast_to(np.asarray(self.velocity_clamp, dtype=float), (dim,)).copy()


@dataclass
class PsoState:
    positions: np.ndarray
    velocities: np.ndarray
    personal_best: np.ndarray
    personal_value: np.ndarray
    global_best: np.ndarray
    global_value: float
    iteration: int = 0


@dataclass
class PsoResult:
    best_x: np.ndarray
    best_value: float
    trace: list[float]
    state: PsoState
    evaluations: int = 0
    history: list[tuple[int, int, float]] = field(default_factory=list)


def pso_minimize(objective: Callable[[np.ndarray], float], dim: int, config: PsoConfig,
                 fixed_particles: Sequence[Sequence[float]] = ()) -> PsoResult:
    """Minimize ``objective`` over R^dim.

    ``fixed_particles`` replace the first random initial positions; the
    trainer uses this to put one particle at the origin. ``trace[k]`` is the
    best value after iteration k + 1.
    """
    rng = np.random.default_rng(config.rng_seed)
    lo, hi = config.box(dim)
    vmax = config.clamp(dim)
    n = config.particle_count
    X = lo + (hi - lo) * rng.random((n, dim))
    if len(fixed_particles) > n:
        raise ValueError("more fixed particles than particles")
    for j, p in enumerate(fixed_particles):
        X[j] = np.asarray(p, dtype=float)
    state = PsoState(
        positions=X,
        velocities=np.zeros((n, dim)),
        personal_best=X.copy(),
        personal_value=np.full(n, math.inf),
        global_best=X[0].copy(),
        global_value=math.inf,
    )
    V, P, Pval = state.velocities, state.personal_best, state.personal_value
    trace: list[float] = []
    history: list[tuple[int, int, float]] = []
    for it in range(config.max_iterations):
        for j in range(n):
            X[j] += V[j]
            f = float(objective(X[j]))
            history.append((it, j, f))
            if not math.isfinite(f):
                raise PsoError(f"objective returned {f} at iteration {it + 1}, particle {j}", X[j])
            if f < Pval[j]:
                P[j] = X[j]
                Pval[j] = f
                if f < state.global_value:
                    state.global_best = P[j].copy()
                    state.global_value = f
            r1, r2 = rng.random(2)
            V[j] = V[j] + config.c1 * r1 * (P[j] - X[j]) + config.c2 * r2 * (state.global_best - X[j])
            np.clip(V[j], -vmax, vmax, out=V[j])
        state.iteration = it + 1
        trace.append(state.global_value)
    return PsoResult(state.global_best.copy(), state.global_value, trace, state,
                     evaluations=len(history), history=history)
