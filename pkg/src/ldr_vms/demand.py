"""Demand days: observed or synthetic per-origin entry counts.

The synthetic generator stands in for detector data that is not available:
day d, origin o, step t draws Poisson(M_d * base_o(t)) where M_d is a
mean-one lognormal day multiplier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class GapError(ValueError):
    """Too many missing entries to reconstruct a series."""

    def __init__(self, report: Mapping[str, float], limit: float):
        self.report = dict(report)
        detail = ", ".join(f"{o}: {frac:.0%} missing" for o, frac in sorted(report.items()))
        super().__init__(f"gap fraction above {limit:.0%}: {detail}")


@dataclass(frozen=True)
class DemandDay:
    label: str
    counts: Mapping[str, tuple[int, ...]]
    provenance: str = "synthetic"

    def __post_init__(self) -> None:
        fixed = {}
        lengths = set()
        for origin in sorted(self.counts):
            row = tuple(int(c) for c in self.counts[origin])
            if any(c != v for c, v in zip(row, self.counts[origin])):
                raise ValueError(f"day {self.label}: non-integer count for origin {origin}")
            if any(c < 0 for c in row):
                raise ValueError(f"day {self.label}: negative count for origin {origin}")
            fixed[origin] = row
            lengths.add(len(row))
        if len(lengths) > 1:
            raise ValueError(f"day {self.label}: origins disagree on horizon {sorted(lengths)}")
        if self.provenance not in ("synthetic", "measured"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "counts", fixed)

    @property
    def horizon(self) -> int:
        return len(next(iter(self.counts.values()))) if self.counts else 0

    @property
    def origins(self) -> list[str]:
        return sorted(self.counts)

    def total(self) -> int:
        return sum(sum(row) for row in self.counts.values())

    def scaled(self, factor: int) -> DemandDay:
        return DemandDay(self.label, {o: tuple(c * factor for c in row) for o, row in self.counts.items()},
                         self.provenance)


def hump_profile(peak: float, horizon: int, floor: float = 0.75) -> tuple[float, ...]:
    """Smooth single-peak rate shape, ``floor * peak`` at the ends."""
    return tuple(
        peak * (floor + (1.0 - floor) * math.sin(math.pi * (t + 0.5) / horizon))
        for t in range(horizon)
    )


@dataclass(frozen=True)
class DemandModel:
    base_rates: Mapping[str, tuple[float, ...]]
    sigma: float = 0.3
    poisson: bool = True
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        for o, row in self.base_rates.items():
            if any(r < 0 for r in row):
                raise ValueError(f"negative base rate for origin {o}")

    @property
    def horizon(self) -> int:
        return len(next(iter(self.base_rates.values())))

    @classmethod
    def humped(cls, peaks: Mapping[str, float], horizon: int, sigma: float = 0.3) -> DemandModel:
        return cls({o: hump_profile(p, horizon) for o, p in sorted(peaks.items())}, sigma)


def day_labels(n_days: int, start: str = "2016-02-01") -> list[str]:
    base = np.datetime64(start)
    return [str(base + np.timedelta64(d, "D")) for d in range(n_days)]


def synthesize_days(model: DemandModel, n_days: int, horizon: int | None = None,
                    seed: int = 0) -> list[DemandDay]:
    """Draw ``n_days`` independent demand days; deterministic in ``seed``."""
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    T = model.horizon if horizon is None else horizon
    if T > model.horizon:
        raise ValueError(f"model covers {model.horizon} steps, {T} requested")
    rng = np.random.default_rng(seed)
    labels = list(model.labels) or day_labels(n_days)
    if len(labels) < n_days:
        raise ValueError("not enough day labels")
    origins = sorted(model.base_rates)
    base = np.array([model.base_rates[o][:T] for o in origins], dtype=float)
    days = []
    for d in range(n_days):
        mult = math.exp(model.sigma * rng.standard_normal() - 0.5 * model.sigma ** 2)
        lam = mult * base
        counts = rng.poisson(lam) if model.poisson else np.floor(lam + 0.5).astype(int)
        days.append(DemandDay(labels[d], {o: tuple(int(c) for c in counts[k]) for k, o in enumerate(origins)}))
    return days


def fill_series(series: Sequence[float | None]) -> tuple[int, ...]:
    """Linear interpolation across gaps (None or NaN), nearest value at the
    edges, then round half up."""
    vals = np.array([np.nan if v is None else float(v) for v in series])
    present = ~np.isnan(vals)
    if not present.any():
        raise GapError({"series": 1.0}, 0.5)
    idx = np.arange(vals.size)
    filled = np.interp(idx, idx[present], vals[present])
    return tuple(int(math.floor(v + 0.5)) for v in filled)


def fill_gaps(raw: Mapping[str, Sequence[float | None]], label: str,
              max_missing: float = 0.5, provenance: str = "measured") -> DemandDay:
    report = {}
    for origin, series in raw.items():
        missing = sum(1 for v in series if v is None or (isinstance(v, float) and math.isnan(v)))
        frac = missing / len(series) if len(series) else 1.0
        if frac > max_missing:
            report[origin] = frac
    if report:
        raise GapError(report, max_missing)
    return DemandDay(label, {o: fill_series(s) for o, s in raw.items()}, provenance)
