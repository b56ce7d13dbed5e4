"""Road network model: links with occupancy-based delay, signalized
intersections, routes, OD zones and VMS placement.

A network is immutable once built and can be shared by any number of
simulation runs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

TURN_TOL = 1e-9


@dataclass(frozen=True)
class Link:
    """Directed link.

    ``alpha`` is the delay slope in steps per vehicle, ``beta`` the free-flow
    traversal time in steps and ``capacity_per_step`` the number of vehicles
    that can leave the link in one step under full green.
    """

    id: str
    from_node: str
    to_node: str
    alpha: float
    beta: float
    capacity_per_step: float


@dataclass(frozen=True)
class Intersection:
    node: str
    # each phase is the set of (incoming, outgoing) movements it greens
    phases: tuple[tuple[tuple[str, str], ...], ...]
    # incoming link -> {outgoing link: probability}
    turning_probabilities: Mapping[str, Mapping[str, float]]

    @property
    def phase_count(self) -> int:
        return len(self.phases)

    def incoming_links(self) -> list[str]:
        seen: dict[str, None] = {}
        for phase in self.phases:
            for inc, _ in phase:
                seen.setdefault(inc, None)
        for inc in self.turning_probabilities:
            seen.setdefault(inc, None)
        return list(seen)


@dataclass(frozen=True)
class Route:
    id: str
    links: tuple[str, ...]


@dataclass(frozen=True)
class VmsPlacement:
    visible_from_links: frozenset[str]
    influenced_od_pairs: frozenset[tuple[str, str]]
    choice_routes: tuple[str, str]


class Violation(NamedTuple):
    kind: str
    subject: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} [{self.subject}]: {self.detail}"


@dataclass(frozen=True)
class Network:
    zones: tuple[str, ...]
    links: tuple[Link, ...]
    intersections: tuple[Intersection, ...]
    routes: tuple[Route, ...]
    od_pairs: tuple[tuple[str, str], ...]
    vms: VmsPlacement
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_index", {lk.id: i for i, lk in enumerate(self.links)})

    @property
    def link_count(self) -> int:
        return len(self.links)

    @property
    def link_ids(self) -> list[str]:
        return [lk.id for lk in self.links]

    def link_index(self, link_id: str) -> int:
        return self._index[link_id]

    def link(self, link_id: str) -> Link:
        return self.links[self._index[link_id]]

    def route(self, route_id: str) -> Route:
        for r in self.routes:
            if r.id == route_id:
                return r
        raise KeyError(route_id)

    def intersection_at(self, node: str) -> Intersection | None:
        for ix in self.intersections:
            if ix.node == node:
                return ix
        return None

    def outgoing(self, node: str) -> list[Link]:
        return [lk for lk in self.links if lk.from_node == node]

    def shortest_path(self, src: str, dst: str) -> tuple[str, ...]:
        """Fewest-links path between two nodes (empty if ``src == dst``).

        Used to attach a target agent's origin and destination zones to the
        ends of its chosen route. Ties break on link order in the network.
        """
        if src == dst:
            return ()
        prev: dict[str, Link] = {}
        seen = {src}
        todo = deque([src])
        while todo:
            node = todo.popleft()
            for lk in self.outgoing(node):
                if lk.to_node in seen:
                    continue
                seen.add(lk.to_node)
                prev[lk.to_node] = lk
                if lk.to_node == dst:
                    path = []
                    cur = dst
                    while cur != src:
                        path.append(prev[cur].id)
                        cur = prev[cur].from_node
                    return tuple(reversed(path))
                todo.append(lk.to_node)
        raise ValueError(f"no path from {src!r} to {dst!r}")

    def reference_occupancy(self) -> list[float]:
        """Per-link occupancy scale (capacity x free-flow time)."""
        return [lk.capacity_per_step * lk.beta for lk in self.links]


def link_travel_time(link: Link, occupancy: float) -> int:
    """Entry-time traversal time in whole steps: round-half-up of
    ``alpha * occupancy + beta``, never below one step."""
    if occupancy < 0:
        raise ValueError(f"negative occupancy {occupancy} on link {link.id}")
    return max(1, math.floor(link.alpha * occupancy + link.beta + 0.5))


def validate(network: Network) -> list[Violation]:
    """Check all structural invariants; returns an empty list for a valid network."""
    report: list[Violation] = []
    ids = [lk.id for lk in network.links]
    known = set(ids)
    zones = set(network.zones)

    seen: set[str] = set()
    for lk in network.links:
        if lk.id in seen:
            report.append(Violation("duplicate-link", lk.id, "link id used more than once"))
        seen.add(lk.id)
        if not lk.alpha >= 0:
            report.append(Violation("link-param", lk.id, f"alpha={lk.alpha} < 0"))
        if not lk.beta >= 1:
            report.append(Violation("link-param", lk.id, f"beta={lk.beta} < 1"))
        if not lk.capacity_per_step >= 1:
            report.append(Violation("link-param", lk.id, f"capacity_per_step={lk.capacity_per_step} < 1"))

    by_id = {lk.id: lk for lk in network.links}
    ix_nodes = set()
    for ix in network.intersections:
        ix_nodes.add(ix.node)
        if not ix.phases:
            report.append(Violation("intersection", ix.node, "no phases"))
        for p, phase in enumerate(ix.phases):
            for inc, out in phase:
                for lid in (inc, out):
                    if lid not in known:
                        report.append(Violation("dangling-link", ix.node, f"phase {p} references unknown link {lid}"))
                if inc in by_id and by_id[inc].to_node != ix.node:
                    report.append(Violation("intersection", ix.node, f"phase {p}: link {inc} does not end here"))
                if out in by_id and by_id[out].from_node != ix.node:
                    report.append(Violation("intersection", ix.node, f"phase {p}: link {out} does not start here"))
        for inc, probs in ix.turning_probabilities.items():
            where = f"{ix.node}/{inc}"
            if inc not in known:
                report.append(Violation("dangling-link", where, f"unknown incoming link {inc}"))
            for out, pr in probs.items():
                if out not in known:
                    report.append(Violation("dangling-link", where, f"unknown outgoing link {out}"))
                elif by_id[out].from_node != ix.node:
                    report.append(Violation("turning", where, f"outgoing link {out} does not start at {ix.node}"))
                if not pr >= 0:
                    report.append(Violation("turning", where, f"negative probability {pr} for {out}"))
            total = sum(probs.values())
            if abs(total - 1.0) > TURN_TOL:
                report.append(Violation("turning", where, f"probabilities sum to {total!r}"))
        served = {inc for phase in ix.phases for inc, _ in phase}
        for lk in network.links:
            if lk.to_node != ix.node:
                continue
            if lk.id not in ix.turning_probabilities:
                report.append(Violation("turning", f"{ix.node}/{lk.id}", "incoming link has no turning probabilities"))
            if lk.id not in served:
                report.append(Violation("intersection", f"{ix.node}/{lk.id}", "incoming link is never given green"))

    for node in {lk.to_node for lk in network.links}:
        if node in zones or node in ix_nodes:
            continue
        if len(network.outgoing(node)) > 1:
            report.append(Violation("junction", node, "unsignalized diverge without turning probabilities"))
        if not network.outgoing(node):
            report.append(Violation("junction", node, "dead end that is not a zone"))

    route_ids = set()
    for r in network.routes:
        route_ids.add(r.id)
        if not r.links:
            report.append(Violation("route", r.id, "empty route"))
        missing = [lid for lid in r.links if lid not in known]
        for lid in missing:
            report.append(Violation("dangling-link", r.id, f"route references unknown link {lid}"))
        if len(set(r.links)) != len(r.links):
            report.append(Violation("route", r.id, "repeated link"))
        if not missing:
            for a, b in zip(r.links, r.links[1:]):
                if by_id[a].to_node != by_id[b].from_node:
                    report.append(Violation("route", r.id, f"links {a} and {b} are not consecutive"))

    for o, d in network.od_pairs:
        for z in (o, d):
            if z not in zones:
                report.append(Violation("od-pair", f"{o}->{d}", f"unknown zone {z}"))

    vms = network.vms
    for lid in sorted(vms.visible_from_links):
        if lid not in known:
            report.append(Violation("dangling-link", "vms", f"visible-from link {lid} does not exist"))
    od_set = set(network.od_pairs)
    for od in sorted(vms.influenced_od_pairs):
        if od not in od_set:
            report.append(Violation("vms", f"{od[0]}->{od[1]}", "influenced OD pair not in network OD pairs"))
    for rid in vms.choice_routes:
        if rid not in route_ids:
            report.append(Violation("vms", rid, "choice route does not exist"))

    if not report and vms.choice_routes[0] in route_ids and vms.choice_routes[1] in route_ids:
        r1, r2 = (network.route(rid) for rid in vms.choice_routes)
        start, end = by_id[r1.links[0]].from_node, by_id[r1.links[-1]].to_node
        if (by_id[r2.links[0]].from_node, by_id[r2.links[-1]].to_node) != (start, end):
            report.append(Violation("vms", "choice_routes", "routes do not share end points"))
        for o, d in sorted(vms.influenced_od_pairs):
            try:
                network.shortest_path(o, start)
                network.shortest_path(end, d)
            except ValueError as exc:
                report.append(Violation("vms", f"{o}->{d}", str(exc)))
    return report


def build_network(
    zones: Sequence[str],
    links: Sequence[Link],
    intersections: Sequence[Intersection],
    routes: Sequence[Route],
    od_pairs: Sequence[tuple[str, str]],
    vms: VmsPlacement,
) -> Network:
    return Network(
        zones=tuple(zones),
        links=tuple(links),
        intersections=tuple(intersections),
        routes=tuple(routes),
        od_pairs=tuple(tuple(od) for od in od_pairs),
        vms=vms,
    )
