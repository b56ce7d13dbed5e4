"""Held-out evaluation of control strategies and compliance sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .demand import DemandDay
from .engine import SimConfig, SimResult, Simulation
from .network import Network
from .trainer import ObjectiveError, PolicyRecord, Strategy, TrainingError, derive_seed, make_controllers
from .vms import DEFAULT_BANDS, ComplianceProfile, VmsMessage


@dataclass(frozen=True)
class DayRow:
    day: str
    strategy: str
    compliance: str
    mean_travel_time: float
    completed: float
    stranded: float


@dataclass(frozen=True)
class LogRow:
    strategy: str
    compliance: str
    day: str
    step: int
    message: VmsMessage
    volume_difference: float

    @property
    def counter_intuitive(self) -> bool:
        """The sign points drivers at the route that currently holds more vehicles."""
        rec = self.message.recommends
        return (rec == 1 and self.volume_difference > 0) or (rec == 2 and self.volume_difference < 0)


def _policy_parts(strategy: Strategy, policy: PolicyRecord | None):
    if strategy.trainable:
        if policy is None:
            raise TrainingError(f"strategy {strategy.name} needs a trained policy")
        if policy.strategy != strategy:
            raise TrainingError(f"policy was trained for {policy.strategy.name}, not {strategy.name}")
        return policy.vms, policy.signal
    return None, None


def simulate_days(network: Network, days: Sequence[DemandDay], strategy: Strategy,
                  policy: PolicyRecord | None, config: SimConfig, seed: int = 0, replications: int = 1,
                  bands: Sequence[float] = DEFAULT_BANDS) -> list[list[SimResult]]:
    """Run every day ``replications`` times with the sub-seeds the trainer uses."""
    vms_p, sig_p = _policy_parts(strategy, policy)
    out = []
    for i, day in enumerate(days):
        runs = []
        for r in range(replications):
            vms, sig = make_controllers(network, strategy, vms_p, sig_p, bands)
            cfg = config.replace(rng_seed=derive_seed(seed, i, r))
            res = Simulation(network, day, vms, sig, cfg).run()
            if res.mean_travel_time is None:
                raise ObjectiveError(f"day {day.label}: no agents entered after warm-up", i)
            runs.append(res)
        out.append(runs)
    return out


def evaluate(network: Network, days: Sequence[DemandDay], strategy: Strategy, policy: PolicyRecord | None,
             config: SimConfig, seed: int = 0, replications: int = 1,
             bands: Sequence[float] = DEFAULT_BANDS) -> list[DayRow]:
    """One row per day plus a trailing ``mean`` row averaged over days."""
    tag = config.compliance.tag()
    rows = []
    for day, runs in zip(days, simulate_days(network, days, strategy, policy, config, seed, replications, bands)):
        rows.append(DayRow(day.label, strategy.name, tag,
                           float(np.mean([r.mean_travel_time for r in runs])),
                           float(np.mean([r.completed for r in runs])),
                           float(np.mean([r.stranded for r in runs]))))
    rows.append(summary_row(rows))
    return rows


def summary_row(rows: Sequence[DayRow]) -> DayRow:
    return DayRow("mean", rows[0].strategy, rows[0].compliance,
                  float(np.mean([r.mean_travel_time for r in rows])),
                  float(np.mean([r.completed for r in rows])),
                  float(np.mean([r.stranded for r in rows])))


def message_volume_log(strategy: Strategy, compliance: ComplianceProfile, days: Sequence[DemandDay],
                       results: Sequence[Sequence[SimResult]]) -> list[LogRow]:
    rows = []
    for day, runs in zip(days, results):
        for step, msg, diff in runs[0].message_volume_log():
            rows.append(LogRow(strategy.name, compliance.tag(), day.label, step, msg, diff))
    return rows


def pick_policy(policies: Sequence[PolicyRecord], strategy: Strategy, compliance: ComplianceProfile
                ) -> PolicyRecord | None:
    """Policy for ``strategy``, preferring one trained under ``compliance``."""
    same = [p for p in policies if p.strategy == strategy]
    for p in same:
        if p.meta.get("compliance") == compliance.tag():
            return p
    return same[0] if same else None


@dataclass
class Comparison:
    matrix: dict[tuple[str, str], float]
    per_day: list[DayRow]
    log: list[LogRow]
    strategies: list[str]
    profiles: list[str]


def compare(network: Network, days: Sequence[DemandDay], strategies: Sequence[Strategy],
            profiles: Sequence[ComplianceProfile], policies: Sequence[PolicyRecord], config: SimConfig,
            seed: int = 0, replications: int = 1, bands: Sequence[float] = DEFAULT_BANDS) -> Comparison:
    """Strategy x compliance matrix of mean travel time, plus the
    message / volume-difference log of every VMS-driven run."""
    if not profiles:
        raise ValueError("empty compliance sweep")
    matrix: dict[tuple[str, str], float] = {}
    per_day: list[DayRow] = []
    log: list[LogRow] = []
    for strategy in strategies:
        for prof in profiles:
            policy = pick_policy(policies, strategy, prof) if strategy.trainable else None
            cfg = config.replace(compliance=prof)
            results = simulate_days(network, days, strategy, policy, cfg, seed, replications, bands)
            rows = [DayRow(d.label, strategy.name, prof.tag(),
                           float(np.mean([r.mean_travel_time for r in runs])),
                           float(np.mean([r.completed for r in runs])),
                           float(np.mean([r.stranded for r in runs])))
                    for d, runs in zip(days, results)]
            rows.append(summary_row(rows))
            per_day.extend(rows)
            matrix[(strategy.name, prof.tag())] = rows[-1].mean_travel_time
            if strategy.vms != "none":
                log.extend(message_volume_log(strategy, prof, days, results))
    return Comparison(matrix, per_day, log, [s.name for s in strategies], [p.tag() for p in profiles])
