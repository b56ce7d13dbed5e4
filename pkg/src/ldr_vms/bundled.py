"""Built-in networks: the Haining-like study network and small toys.

Link parameters of the study network are invented; only the counts
(24 links, 4 signalized intersections, two routes between the VMS junction
and the far junction, six zones) follow the published case study.
"""

from __future__ import annotations

from importlib import resources

from .demand import DemandModel, hump_profile
from .network import Intersection, Link, Network, Route, VmsPlacement, build_network

# id: (from, to, alpha [steps/veh], beta [steps], capacity [veh/step])
_LINKS = {
    "1": ("N1", "N2", 0.04, 2, 56),
    "2": ("N2", "N4", 0.02, 1, 60),
    "3": ("N1", "N3", 0.08, 1, 44),
    "4": ("N3", "N4", 0.04, 1, 60),
    "5": ("N2", "N1", 0.05, 2, 30),
    "6": ("N4", "N2", 0.05, 1, 30),
    "7": ("a", "N1", 0.02, 1, 60),
    "8": ("N3", "N1", 0.05, 1, 30),
    "9": ("N4", "N3", 0.05, 1, 30),
    "10": ("N2", "N3", 0.05, 2, 20),
    "11": ("N3", "N2", 0.05, 2, 20),
    "12": ("N1", "a", 0.02, 1, 40),
    "13": ("b", "N1", 0.02, 1, 60),
    "14": ("N1", "b", 0.02, 1, 40),
    "15": ("c", "N2", 0.03, 1, 40),
    "16": ("N2", "c", 0.02, 1, 40),
    "17": ("d", "N3", 0.03, 1, 40),
    "18": ("N3", "d", 0.02, 1, 40),
    "19": ("e", "N4", 0.03, 1, 40),
    "20": ("N4", "e", 0.01, 1, 60),
    "21": ("f", "N4", 0.03, 1, 40),
    "22": ("N4", "f", 0.01, 1, 60),
    "23": ("N2", "f", 0.02, 2, 40),
    "24": ("N3", "e", 0.02, 2, 40),
}

# intersection -> incoming link -> {outgoing link: probability}
_TURNING = {
    "N1": {
        "7": {"1": 0.5, "3": 0.45, "14": 0.05},
        "13": {"1": 0.5, "3": 0.45, "12": 0.05},
        "5": {"12": 0.5, "14": 0.4, "3": 0.1},
        "8": {"12": 0.4, "14": 0.5, "1": 0.1},
    },
    "N2": {
        "1": {"2": 0.55, "23": 0.2, "16": 0.15, "10": 0.1},
        "6": {"5": 0.3, "16": 0.4, "10": 0.1, "23": 0.2},
        "15": {"2": 0.4, "23": 0.3, "5": 0.2, "10": 0.1},
        "11": {"2": 0.4, "23": 0.3, "16": 0.2, "5": 0.1},
    },
    "N3": {
        "3": {"4": 0.55, "24": 0.2, "18": 0.15, "11": 0.1},
        "9": {"8": 0.3, "18": 0.4, "11": 0.1, "24": 0.2},
        "17": {"4": 0.4, "24": 0.3, "8": 0.2, "11": 0.1},
        "10": {"4": 0.4, "24": 0.3, "18": 0.2, "8": 0.1},
    },
    "N4": {
        "2": {"20": 0.5, "22": 0.5},
        "4": {"20": 0.5, "22": 0.5},
        "19": {"22": 0.5, "6": 0.25, "9": 0.25},
        "21": {"20": 0.5, "6": 0.25, "9": 0.25},
    },
}

HAINING_PEAKS = {"a": 8.0, "b": 6.0, "c": 4.0, "d": 4.0, "e": 2.0, "f": 2.0}


def _approach_phases(turning: dict[str, dict[str, float]]) -> tuple:
    # one phase per approach, greening every movement from that approach
    return tuple(tuple((inc, out) for out in outs) for inc, outs in turning.items())


def haining_network() -> Network:
    links = [Link(i, f, t, a, b, c) for i, (f, t, a, b, c) in _LINKS.items()]
    intersections = [
        Intersection(node, _approach_phases(turn), {k: dict(v) for k, v in turn.items()})
        for node, turn in _TURNING.items()
    ]
    zones = ("a", "b", "c", "d", "e", "f")
    od_pairs = [(o, d) for o in zones for d in zones if o != d]
    influenced = [("a", "e"), ("a", "f"), ("b", "e"), ("b", "f")]
    return build_network(
        zones=zones,
        links=links,
        intersections=intersections,
        routes=[Route("route1", ("1", "2")), Route("route2", ("3", "4"))],
        od_pairs=od_pairs,
        vms=VmsPlacement(frozenset({"7", "13"}), frozenset(influenced), ("route1", "route2")),
    )


def haining_demand_model(horizon: int = 60, sigma: float = 0.3) -> DemandModel:
    return DemandModel({o: hump_profile(p, horizon) for o, p in HAINING_PEAKS.items()}, sigma)


def two_route_network(route1=(1.0, 1, 3), route2=(0.0, 3, 10), background_route1: float = 0.5) -> Network:
    """Toy: zone o feeds junction A over link ``in``; two parallel one-link
    routes run from A to zone d.

    ``route1``/``route2`` are (alpha, beta, capacity) of the route links.
    ``background_route1`` is the turning probability into route 1 for
    vehicles that ignore the sign.
    """
    a1, b1, c1 = route1
    a2, b2, c2 = route2
    links = [
        Link("in", "o", "A", 0.0, 1, 100),
        Link("r1", "A", "d", a1, b1, c1),
        Link("r2", "A", "d", a2, b2, c2),
    ]
    junction = Intersection("A", ((("in", "r1"), ("in", "r2")),),
                            {"in": {"r1": background_route1, "r2": 1.0 - background_route1}})
    return build_network(
        zones=("o", "d"),
        links=links,
        intersections=[junction],
        routes=[Route("route1", ("r1",)), Route("route2", ("r2",))],
        od_pairs=[("o", "d")],
        vms=VmsPlacement(frozenset({"in"}), frozenset({("o", "d")}), ("route1", "route2")),
    )


def bundled_scenario_path():
    return resources.files("ldr_vms") / "data" / "haining_synthetic.json"
