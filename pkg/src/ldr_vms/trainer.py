"""Offline training of the linear decision rules.

The objective for a decision vector x is the sample average of the
simulated mean travel time over K demand days and R replications per day.
Every (day, replication) pair gets a sub-seed derived from the training
seed only, so all candidates are compared on common random numbers and the
estimate does not depend on evaluation order.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .demand import DemandDay
from .engine import SimConfig, SimResult, Simulation
from .network import Network
from .pso import PsoConfig, PsoResult, pso_minimize
from .signals import DEFAULT_G_MIN, DefaultSignals, LdrSignalPolicy, LdrSignals, SignalController
from .vms import (DEFAULT_BANDS, DEFAULT_THRESHOLDS, ConstantVms, GenuineVms, LdrVms, LdrVmsPolicy,
                  VmsController)

VMS_CHOICES = ("ldr", "genuine", "none")
SIGNAL_CHOICES = ("ldr", "default")


class TrainingError(ValueError):
    """Training request that cannot be satisfied."""


class ObjectiveError(RuntimeError):
    def __init__(self, message: str, day_index: int):
        super().__init__(f"day {day_index}: {message}")
        self.day_index = day_index


@dataclass(frozen=True)
class Strategy:
    vms: str = "ldr"
    signal: str = "default"

    def __post_init__(self) -> None:
        if self.vms not in VMS_CHOICES:
            raise ValueError(f"vms must be one of {VMS_CHOICES}, got {self.vms!r}")
        if self.signal not in SIGNAL_CHOICES:
            raise ValueError(f"signal must be one of {SIGNAL_CHOICES}, got {self.signal!r}")

    @property
    def trainable(self) -> bool:
        return self.vms == "ldr" or self.signal == "ldr"

    @property
    def name(self) -> str:
        return f"{self.vms}+{'coordinated' if self.signal == 'ldr' else 'default'}"


FOUR_STRATEGIES = (
    Strategy("genuine", "default"),
    Strategy("genuine", "ldr"),
    Strategy("ldr", "default"),
    Strategy("ldr", "ldr"),
)


@dataclass(frozen=True)
class TrainingSet:
    days: tuple[DemandDay, ...]
    replications: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "days", tuple(self.days))
        if not self.days:
            raise ValueError("training set needs at least one day")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass(frozen=True)
class Layout:
    """Which controller segments a decision vector carries, in order:
    VMS coefficients, threshold offsets, signal matrices (row-major, one
    intersection after another)."""

    link_count: int
    delta: int
    phase_counts: tuple[int, ...]
    vms: bool = True
    thresholds: bool = True
    signal: bool = False
    g_min: float = DEFAULT_G_MIN

    @classmethod
    def for_strategy(cls, network: Network, strategy: Strategy, delta: int = 1,
                     train_thresholds: bool = True, g_min: float = DEFAULT_G_MIN) -> Layout:
        return cls(network.link_count, delta, tuple(ix.phase_count for ix in network.intersections),
                   vms=strategy.vms == "ldr", thresholds=strategy.vms == "ldr" and train_thresholds,
                   signal=strategy.signal == "ldr", g_min=g_min)

    def segments(self) -> list[tuple[str, int, int]]:
        out = []
        pos = 0
        width = self.link_count * self.delta
        if self.vms:
            out.append(("vms", pos, pos + width))
            pos += width
            if self.thresholds:
                out.append(("thresholds", pos, pos + 4))
                pos += 4
        if self.signal:
            n = sum(self.phase_counts) * width
            out.append(("signal", pos, pos + n))
            pos += n
        return out

    @property
    def size(self) -> int:
        segs = self.segments()
        return segs[-1][2] if segs else 0

    def decode(self, x: np.ndarray) -> tuple[LdrVmsPolicy | None, LdrSignalPolicy | None]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise ValueError(f"decision vector of length {x.size}, layout needs {self.size}")
        vms = sig = None
        thresholds = DEFAULT_THRESHOLDS
        coeffs = None
        width = self.link_count * self.delta
        for name, a, b in self.segments():
            if name == "vms":
                coeffs = x[a:b]
            elif name == "thresholds":
                thresholds = strict_thresholds(np.asarray(DEFAULT_THRESHOLDS) + x[a:b])
            else:
                mats = []
                pos = a
                for p in self.phase_counts:
                    mats.append(x[pos:pos + p * width].reshape(p, width))
                    pos += p * width
                sig = LdrSignalPolicy(tuple(mats), self.delta, self.g_min)
        if coeffs is not None:
            vms = LdrVmsPolicy(coeffs.copy(), self.delta, thresholds)
        return vms, sig

    def encode(self, vms: LdrVmsPolicy | None, signal: LdrSignalPolicy | None) -> np.ndarray:
        parts = []
        for name, _, _ in self.segments():
            if name == "vms":
                parts.append(vms.coefficients)
            elif name == "thresholds":
                parts.append(np.asarray(vms.thresholds) - np.asarray(DEFAULT_THRESHOLDS))
            else:
                parts.extend(b.ravel() for b in signal.matrices)
        return np.concatenate(parts) if parts else np.zeros(0)

    def init_box(self, coef_range: float = 1.0, threshold_range: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.size, -coef_range)
        hi = np.full(self.size, coef_range)
        for name, a, b in self.segments():
            if name == "thresholds":
                lo[a:b] = -threshold_range
                hi[a:b] = threshold_range
        return lo, hi


def strict_thresholds(values) -> tuple[float, float, float, float]:
    """Sort and nudge ties apart so the bins stay strictly increasing."""
    m = sorted(float(v) for v in values)
    for k in range(1, len(m)):
        if m[k] <= m[k - 1]:
            m[k] = math.nextafter(m[k - 1], math.inf)
    return tuple(m)


def derive_seed(seed: int, day_index: int, replication: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(day_index), int(replication)))
    return int(ss.generate_state(1, np.uint64)[0])


def make_controllers(network: Network, strategy: Strategy, vms_policy: LdrVmsPolicy | None = None,
                     signal_policy: LdrSignalPolicy | None = None,
                     bands: Sequence[float] = DEFAULT_BANDS) -> tuple[VmsController, SignalController]:
    if strategy.vms == "ldr":
        if vms_policy is None:
            raise TrainingError("LDR VMS selected but no VMS policy given")
        vms: VmsController = LdrVms(vms_policy)
    elif strategy.vms == "genuine":
        vms = GenuineVms(network, bands)
    else:
        vms = ConstantVms()
    if strategy.signal == "ldr":
        if signal_policy is None:
            raise TrainingError("coordinated signals selected but no signal policy given")
        sig: SignalController = LdrSignals(signal_policy)
    else:
        sig = DefaultSignals(network)
    return vms, sig


class ObjectiveEstimator:
    """x -> average mean travel time over days x replications."""

    def __init__(self, network: Network, training: TrainingSet, config: SimConfig, strategy: Strategy,
                 layout: Layout, seed: int = 0, bands: Sequence[float] = DEFAULT_BANDS):
        self.network = network
        self.training = training
        self.config = config
        self.strategy = strategy
        self.layout = layout
        self.seed = seed
        self.bands = tuple(bands)
        self.evaluations = 0

    def sub_seeds(self) -> list[tuple[int, int, int]]:
        return [(i, r, derive_seed(self.seed, i, r))
                for i in range(len(self.training.days)) for r in range(self.training.replications)]

    def controllers(self, x) -> tuple[VmsController, SignalController]:
        vms_p, sig_p = self.layout.decode(np.asarray(x, dtype=float))
        return make_controllers(self.network, self.strategy, vms_p, sig_p, self.bands)

    def run_one(self, x, day_index: int, replication: int) -> SimResult:
        vms, sig = self.controllers(x)
        cfg = self.config.replace(rng_seed=derive_seed(self.seed, day_index, replication))
        return Simulation(self.network, self.training.days[day_index], vms, sig, cfg).run()

    def __call__(self, x) -> float:
        vms, sig = self.controllers(x)
        total = 0.0
        for i, r, sub in self.sub_seeds():
            cfg = self.config.replace(rng_seed=sub)
            res = Simulation(self.network, self.training.days[i], vms, sig, cfg).run()
            if res.mean_travel_time is None:
                raise ObjectiveError("no agents entered after warm-up", i)
            total += res.mean_travel_time
        self.evaluations += 1
        return total / (len(self.training.days) * self.training.replications)


def estimate_objective(x, network: Network, training: TrainingSet, config: SimConfig,
                       strategy: Strategy, layout: Layout, seed: int = 0,
                       bands: Sequence[float] = DEFAULT_BANDS) -> float:
    return ObjectiveEstimator(network, training, config, strategy, layout, seed, bands)(x)


@dataclass
class PolicyRecord:
    strategy: Strategy
    delta: int
    vms: LdrVmsPolicy | None = None
    signal: LdrSignalPolicy | None = None
    meta: dict = field(default_factory=dict)


@dataclass
class TrainingOutcome:
    policy: PolicyRecord
    result: PsoResult
    baseline_value: float
    report: dict
    wall_clock: float


def days_fingerprint(days: Sequence[DemandDay]) -> str:
    h = hashlib.sha256()
    for day in days:
        h.update(day.label.encode())
        for origin in day.origins:
            h.update(origin.encode())
            h.update(np.asarray(day.counts[origin], dtype=np.int64).tobytes())
    return h.hexdigest()


def train(network: Network, strategy: Strategy, training: TrainingSet, pso: PsoConfig,
          config: SimConfig, delta: int = 1, seed: int | None = None, train_thresholds: bool = True,
          bands: Sequence[float] = DEFAULT_BANDS, coef_range: float = 1.0,
          threshold_range: float = 0.5, g_min: float = DEFAULT_G_MIN) -> TrainingOutcome:
    """Fit the trainable segments of ``strategy`` by PSO.

    One particle starts at x = 0 (no display / equal splits, or the
    untrained half of a mixed strategy), so the result is never worse than
    that baseline on the training days.
    """
    if not strategy.trainable:
        raise TrainingError(f"strategy {strategy.name}: nothing trainable")
    if all(day.total() == 0 for day in training.days):
        raise TrainingError("training days carry no demand")
    if delta < 1:
        raise TrainingError("delta must be >= 1")
    seed = pso.rng_seed if seed is None else seed
    layout = Layout.for_strategy(network, strategy, delta, train_thresholds, g_min)
    estimator = ObjectiveEstimator(network, training, config, strategy, layout, seed, bands)
    lo, hi = layout.init_box(coef_range, threshold_range)
    from dataclasses import replace
    pso_cfg = replace(pso, init_low=lo, init_high=hi) if np.isscalar(pso.init_low) else pso
    zero = np.zeros(layout.size)
    started = time.perf_counter()
    result = pso_minimize(estimator, layout.size, pso_cfg, fixed_particles=[zero])
    elapsed = time.perf_counter() - started
    baseline = next(f for it, j, f in result.history if it == 0 and j == 0)
    vms_p, sig_p = layout.decode(result.best_x)
    record = PolicyRecord(strategy, delta, vms_p, sig_p, meta={
        "training_objective": result.best_value,
        "baseline_objective": baseline,
        "compliance": config.compliance.tag(),
    })
    report = {
        "strategy": {"vms": strategy.vms, "signal": strategy.signal},
        "delta": delta,
        "train_thresholds": train_thresholds,
        "pso": {
            "particles": pso.particle_count,
            "iterations": pso.max_iterations,
            "c1": pso.c1,
            "c2": pso.c2,
            "seed": pso.rng_seed,
        },
        "objective_seed": seed,
        "days": [d.label for d in training.days],
        "replications": training.replications,
        "compliance": config.compliance.tag(),
        "dimension": layout.size,
        "baseline_objective": baseline,
        "best_objective": result.best_value,
        "trace": list(result.trace),
        "training_data_sha256": days_fingerprint(training.days),
    }
    return TrainingOutcome(record, result, baseline, report, elapsed)
