"""Scenario bundles and policy records on disk.

Both are JSON documents with an explicit ``format_version``. Output is
canonical: objects keep a fixed key order, arrays of numbers sit on one
line, floats are written with full round-trip precision, so
``save(load(f))`` reproduces ``f`` byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .demand import DemandDay
from .engine import SimConfig
from .network import Intersection, Link, Network, Route, Violation, VmsPlacement, build_network, validate
from .signals import LdrSignalPolicy
from .trainer import PolicyRecord, Strategy
from .vms import DEFAULT_BANDS, ComplianceProfile, LdrVmsPolicy

SCENARIO_VERSION = 1
POLICY_VERSION = 1


class ScenarioError(ValueError):
    """Unreadable or invalid scenario / policy file."""

    def __init__(self, message: str, violations: Sequence[Violation] = ()):
        self.violations = list(violations)
        if self.violations:
            message += "\n" + "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(message)


@dataclass
class ScenarioBundle:
    name: str
    network: Network
    config: SimConfig
    profiles: list[ComplianceProfile]
    train_days: list[DemandDay]
    test_days: list[DemandDay]
    bands: tuple[float, float] = DEFAULT_BANDS
    description: str = ""
    generator: dict = field(default_factory=dict)

    def violations(self) -> list[Violation]:
        report = validate(self.network)
        train = {d.label for d in self.train_days}
        for d in self.test_days:
            if d.label in train:
                report.append(Violation("day-split", d.label, "day appears in both train and test sets"))
        zones = set(self.network.zones)
        for d in [*self.train_days, *self.test_days]:
            for o in d.origins:
                if o not in zones:
                    report.append(Violation("demand", d.label, f"unknown origin zone {o}"))
            if d.horizon < self.config.horizon:
                report.append(Violation("demand", d.label, f"{d.horizon} steps, horizon is {self.config.horizon}"))
        return report


# -- canonical JSON ------------------------------------------------------

def _scalar(v) -> bool:
    return v is None or isinstance(v, (bool, int, float, str, np.integer, np.floating))


def _py(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def dumps(obj: Any, indent: int = 0) -> str:
    pad = "  " * indent
    if _scalar(obj):
        return json.dumps(_py(obj))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        if len(obj) <= 8 and all(_scalar(v) for v in obj.values()):
            return "{" + ", ".join(f"{json.dumps(str(k))}: {json.dumps(_py(v))}" for k, v in obj.items()) + "}"
        items = [f'{pad}  {json.dumps(str(k))}: {dumps(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    seq = list(obj)
    if all(_scalar(v) for v in seq):
        return "[" + ", ".join(json.dumps(_py(v)) for v in seq) + "]"
    items = [pad + "  " + dumps(v, indent + 1) for v in seq]
    return "[\n" + ",\n".join(items) + "\n" + pad + "]"


def _parse(data: bytes | str, source: str) -> Any:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ScenarioError(
            f"{source}: parse error at line {exc.lineno} column {exc.colno} (byte offset {offset}): {exc.msg}"
        ) from None


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def get(self, obj: dict, key: str, where: str, kind=None):
        if not isinstance(obj, dict) or key not in obj:
            raise ScenarioError(f"{self.source}: missing field {where}.{key}")
        val = obj[key]
        if kind is not None and not isinstance(val, kind):
            raise ScenarioError(f"{self.source}: field {where}.{key} has the wrong type")
        return val


# -- network -------------------------------------------------------------

def network_to_dict(net: Network) -> dict:
    return {
        "zones": list(net.zones),
        "links": [
            {"id": lk.id, "from": lk.from_node, "to": lk.to_node, "alpha": lk.alpha, "beta": lk.beta,
             "capacity_per_step": lk.capacity_per_step}
            for lk in net.links
        ],
        "intersections": [
            {"node": ix.node,
             "phases": [[list(m) for m in phase] for phase in ix.phases],
             "turning": {inc: dict(outs) for inc, outs in ix.turning_probabilities.items()}}
            for ix in net.intersections
        ],
        "routes": [{"id": r.id, "links": list(r.links)} for r in net.routes],
        "od_pairs": [list(od) for od in net.od_pairs],
        "vms": {
            "visible_from_links": sorted(net.vms.visible_from_links, key=_natural),
            "influenced_od_pairs": [list(od) for od in sorted(net.vms.influenced_od_pairs)],
            "choice_routes": list(net.vms.choice_routes),
        },
    }


def _natural(s: str):
    return (0, int(s), "") if s.isdigit() else (1, 0, s)


def network_from_dict(d: dict, rd: _Reader) -> Network:
    w = "network"
    links = []
    for k, item in enumerate(rd.get(d, "links", w, list)):
        where = f"{w}.links[{k}]"
        links.append(Link(str(rd.get(item, "id", where)), str(rd.get(item, "from", where)),
                          str(rd.get(item, "to", where)), rd.get(item, "alpha", where, (int, float)),
                          rd.get(item, "beta", where, (int, float)),
                          rd.get(item, "capacity_per_step", where, (int, float))))
    intersections = []
    for k, item in enumerate(rd.get(d, "intersections", w, list)):
        where = f"{w}.intersections[{k}]"
        phases = tuple(tuple((str(m[0]), str(m[1])) for m in phase)
                       for phase in rd.get(item, "phases", where, list))
        turning = {str(inc): {str(o): p for o, p in outs.items()}
                   for inc, outs in rd.get(item, "turning", where, dict).items()}
        intersections.append(Intersection(str(rd.get(item, "node", where)), phases, turning))
    routes = [Route(str(rd.get(r, "id", f"{w}.routes[{k}]")), tuple(str(x) for x in rd.get(r, "links", f"{w}.routes[{k}]", list)))
              for k, r in enumerate(rd.get(d, "routes", w, list))]
    vms = rd.get(d, "vms", w, dict)
    placement = VmsPlacement(
        frozenset(str(x) for x in rd.get(vms, "visible_from_links", f"{w}.vms", list)),
        frozenset((str(o), str(t)) for o, t in rd.get(vms, "influenced_od_pairs", f"{w}.vms", list)),
        tuple(str(x) for x in rd.get(vms, "choice_routes", f"{w}.vms", list)),
    )
    if len(placement.choice_routes) != 2:
        raise ScenarioError(f"{rd.source}: network.vms.choice_routes needs exactly two routes")
    return build_network(
        zones=[str(z) for z in rd.get(d, "zones", w, list)],
        links=links,
        intersections=intersections,
        routes=routes,
        od_pairs=[(str(o), str(t)) for o, t in rd.get(d, "od_pairs", w, list)],
        vms=placement,
    )


# -- days / config -------------------------------------------------------

def day_to_dict(day: DemandDay) -> dict:
    return {"label": day.label, "provenance": day.provenance,
            "counts": {o: list(day.counts[o]) for o in day.origins}}


def day_from_dict(d: dict, rd: _Reader, where: str) -> DemandDay:
    try:
        return DemandDay(str(rd.get(d, "label", where)),
                         {str(o): tuple(v) for o, v in rd.get(d, "counts", where, dict).items()},
                         str(d.get("provenance", "measured")))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{rd.source}: {where}: {exc}") from None


def config_to_dict(cfg: SimConfig) -> dict:
    return {
        "horizon": cfg.horizon,
        "step_length": cfg.step_length,
        "warmup_steps": cfg.warmup_steps,
        "rng_seed": cfg.rng_seed,
        "target_share": cfg.target_share,
        "vms_min_dwell": cfg.vms_min_dwell,
        "compliance": list(cfg.compliance.route1_share),
    }


def config_from_dict(d: dict, rd: _Reader) -> SimConfig:
    w = "sim_config"
    try:
        return SimConfig(
            horizon=rd.get(d, "horizon", w, int),
            step_length=rd.get(d, "step_length", w, (int, float)),
            warmup_steps=rd.get(d, "warmup_steps", w, int),
            rng_seed=rd.get(d, "rng_seed", w, int),
            target_share=rd.get(d, "target_share", w, (int, float)),
            vms_min_dwell=d.get("vms_min_dwell", 1),
            compliance=ComplianceProfile(tuple(rd.get(d, "compliance", w, list))),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{rd.source}: sim_config: {exc}") from None


# -- bundle --------------------------------------------------------------

def bundle_to_dict(b: ScenarioBundle) -> dict:
    out = {
        "format_version": SCENARIO_VERSION,
        "kind": "scenario",
        "name": b.name,
        "description": b.description,
        "network": network_to_dict(b.network),
        "sim_config": config_to_dict(b.config),
        "compliance_profiles": [list(p.route1_share) for p in b.profiles],
        "genuine_bands": list(b.bands),
    }
    if b.generator:
        out["generator"] = b.generator
    out["train_days"] = [day_to_dict(d) for d in b.train_days]
    out["test_days"] = [day_to_dict(d) for d in b.test_days]
    return out


def dumps_scenario(bundle: ScenarioBundle) -> str:
    return dumps(bundle_to_dict(bundle)) + "\n"


def loads_scenario(data: bytes | str, source: str = "<scenario>") -> ScenarioBundle:
    doc = _parse(data, source)
    rd = _Reader(source)
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: top level must be an object")
    version = rd.get(doc, "format_version", "scenario")
    if version != SCENARIO_VERSION:
        raise ScenarioError(f"{source}: format_version {version} not supported (expected {SCENARIO_VERSION})")
    try:
        profiles = [ComplianceProfile(tuple(p)) for p in rd.get(doc, "compliance_profiles", "scenario", list)]
        bands = tuple(float(x) for x in doc.get("genuine_bands", DEFAULT_BANDS))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    bundle = ScenarioBundle(
        name=str(doc.get("name", "")),
        network=network_from_dict(rd.get(doc, "network", "scenario", dict), rd),
        config=config_from_dict(rd.get(doc, "sim_config", "scenario", dict), rd),
        profiles=profiles,
        train_days=[day_from_dict(d, rd, f"train_days[{k}]")
                    for k, d in enumerate(rd.get(doc, "train_days", "scenario", list))],
        test_days=[day_from_dict(d, rd, f"test_days[{k}]")
                   for k, d in enumerate(rd.get(doc, "test_days", "scenario", list))],
        bands=bands,
        description=str(doc.get("description", "")),
        generator=dict(doc.get("generator", {})),
    )
    report = bundle.violations()
    if report:
        raise ScenarioError(f"{source}: scenario violates invariants", report)
    return bundle


def load_scenario(path: str | os.PathLike) -> ScenarioBundle:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"{p}: {exc.strerror}") from None
    return loads_scenario(data, str(p))


def save_scenario(bundle: ScenarioBundle, path: str | os.PathLike) -> None:
    Path(path).write_text(dumps_scenario(bundle), encoding="utf-8")


def scenario_sha256(path: str | os.PathLike) -> str:
    import hashlib
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- policy records --------------------------------------------------------

def policy_to_dict(rec: PolicyRecord, network: Network | None = None) -> dict:
    out: dict[str, Any] = {
        "format_version": POLICY_VERSION,
        "kind": "ldr-policy",
        "strategy": {"vms": rec.strategy.vms, "signal": rec.strategy.signal},
        "delta": rec.delta,
    }
    if rec.vms is not None:
        out["vms"] = {"thresholds": list(rec.vms.thresholds), "coefficients": rec.vms.coefficients.tolist()}
    if rec.signal is not None:
        nodes = [ix.node for ix in network.intersections] if network is not None else \
            [str(k) for k in range(len(rec.signal.matrices))]
        out["signal"] = {
            "g_min": rec.signal.g_min,
            "intersections": [{"node": n, "coefficients": b.tolist()}
                              for n, b in zip(nodes, rec.signal.matrices)],
        }
    if rec.meta:
        out["meta"] = dict(rec.meta)
    return out


def dumps_policy(rec: PolicyRecord, network: Network | None = None) -> str:
    return dumps(policy_to_dict(rec, network)) + "\n"


def loads_policy(data: bytes | str, source: str = "<policy>") -> PolicyRecord:
    doc = _parse(data, source)
    rd = _Reader(source)
    version = rd.get(doc, "format_version", "policy")
    if version != POLICY_VERSION:
        raise ScenarioError(f"{source}: policy format_version {version} not supported")
    if doc.get("kind") != "ldr-policy":
        raise ScenarioError(f"{source}: not a policy record")
    st = rd.get(doc, "strategy", "policy", dict)
    delta = rd.get(doc, "delta", "policy", int)
    try:
        strategy = Strategy(str(rd.get(st, "vms", "policy.strategy")), str(rd.get(st, "signal", "policy.strategy")))
        vms = sig = None
        if "vms" in doc:
            v = doc["vms"]
            vms = LdrVmsPolicy(np.array(rd.get(v, "coefficients", "policy.vms", list), dtype=float), delta,
                               tuple(rd.get(v, "thresholds", "policy.vms", list)))
        if "signal" in doc:
            s = doc["signal"]
            mats = tuple(np.array(rd.get(ix, "coefficients", "policy.signal", list), dtype=float)
                         for ix in rd.get(s, "intersections", "policy.signal", list))
            sig = LdrSignalPolicy(mats, delta, rd.get(s, "g_min", "policy.signal", (int, float)))
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    return PolicyRecord(strategy, delta, vms, sig, dict(doc.get("meta", {})))


def load_policy(path: str | os.PathLike) -> PolicyRecord:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"{p}: {exc.strerror}") from None
    return loads_policy(data, str(p))


def save_policy(rec: PolicyRecord, path: str | os.PathLike, network: Network | None = None) -> None:
    Path(path).write_text(dumps_policy(rec, network), encoding="utf-8")


# -- synthetic bundles -----------------------------------------------------

def synthetic_bundle(network: Network, model, n_days: int, seed: int, config: SimConfig | None = None,
                     profiles: Sequence[ComplianceProfile] | None = None, name: str = "synthetic") -> ScenarioBundle:
    """Bundle with ``n_days`` synthesized days; the first half (rounded up)
    trains, the rest tests."""
    from .demand import synthesize_days
    from .engine import PAPER_PROFILES

    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    days = synthesize_days(model, n_days, seed=seed)
    n_train = (n_days + 1) // 2
    config = config or SimConfig(horizon=model.horizon)
    profiles = list(profiles) if profiles else [ComplianceProfile.parse(p) for p in PAPER_PROFILES]
    return ScenarioBundle(
        name=name,
        network=network,
        config=config,
        profiles=profiles,
        train_days=days[:n_train],
        test_days=days[n_train:],
        description="SYNTHETIC demand: Poisson counts around a day-level lognormal multiplier; "
                    "not measured data.",
        generator={"model": "poisson-lognormal", "sigma": model.sigma, "seed": seed, "n_days": n_days},
    )
