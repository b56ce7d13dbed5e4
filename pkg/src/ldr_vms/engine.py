"""Discrete-time agent-based network loading.

Each step runs in a fixed order:

1. controllers read the occupancy history and choose a message and splits;
2. agents are injected: per origin in sorted order the background count is
   read from the demand day and the matching target count is drawn
   (Bernoulli rounding of the fractional part), then every new target agent
   draws its destination (only if its origin has more than one influenced
   destination) and its route, in agent-id order;
3. new agents enter their first link in agent-id order;
4. every link discharges agents whose scheduled exit has come, up to its
   green-scaled capacity; movers are handled in agent-id order, background
   agents drawing their turn on arrival at an intersection;
5. the occupancy vector is recorded and the clock advances.

The RNG is a ``random.Random`` seeded with ``SimConfig.rng_seed`` and is
consumed only in steps 2 and 4, in the order above.
"""

from __future__ import annotations

import heapq
import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .demand import DemandDay
from .history import StateHistory
from .network import Network
from .signals import DefaultSignals, SignalController
from .vms import ComplianceProfile, ConfigurationError, ConstantVms, VmsController, VmsMessage

_EXIT, _TURN, _PASS = 0, 1, 2

PAPER_PROFILES = (
    (0.3, 0.4, 0.5, 0.6, 0.7),
    (0.2, 0.4, 0.5, 0.6, 0.8),
    (0.1, 0.3, 0.5, 0.7, 0.9),
)


class DataError(ValueError):
    """Demand that does not fit the network."""


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 60
    step_length: float = 60.0
    warmup_steps: int = 5
    rng_seed: int = 0
    target_share: float = 0.8
    compliance: ComplianceProfile = field(default_factory=lambda: ComplianceProfile.parse(PAPER_PROFILES[2]))
    vms_min_dwell: int = 1

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.step_length > 0:
            raise ValueError("step_length must be > 0")
        if self.target_share < 0:
            raise ValueError("target_share must be >= 0")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.vms_min_dwell < 1:
            raise ValueError("vms_min_dwell must be >= 1")

    def replace(self, **changes) -> SimConfig:
        from dataclasses import replace
        return replace(self, **changes)


@dataclass
class SimResult:
    """Outcome of one run.

    ``travel_times`` (seconds) covers every agent that entered after the
    warm-up, completed or not; stranded agents contribute the time spent in
    the network up to the end of the horizon.
    """

    mean_travel_time: float | None
    travel_times: np.ndarray
    completed: int
    stranded: int
    created: int
    messages: list[VmsMessage]
    splits: np.ndarray
    route_volumes: np.ndarray
    occupancy: np.ndarray
    link_completions: np.ndarray

    def message_volume_log(self) -> list[tuple[int, VmsMessage, float]]:
        """(step, displayed message, V_route1 - V_route2 seen when deciding)."""
        rows = []
        for t, msg in enumerate(self.messages, start=1):
            if t == 1:
                diff = 0.0
            else:
                v1, v2 = self.route_volumes[t - 2]
                diff = float(v1 - v2)
            rows.append((t, msg, diff))
        return rows


def discharge(queue: list, step: int, green_fraction: float, capacity: float) -> list[int]:
    """Pop agents due by ``step`` from a (exit_step, agent_id) heap.

    At most ceil(green_fraction * capacity) leave, earliest scheduled exit
    first and ties by agent id.
    """
    if not 0.0 <= green_fraction <= 1.0:
        raise ValueError(f"green fraction {green_fraction} outside [0, 1]")
    # rounding strips float noise so equal splits from different code paths agree
    limit = math.ceil(round(green_fraction * capacity, 9))
    moved = []
    while queue and len(moved) < limit and queue[0][0] <= step:
        moved.append(heapq.heappop(queue)[1])
    return moved


class Simulation:
    """Stepwise engine; ``run`` drives it to the horizon.

    Kept as a class so tests can inspect the state between steps.
    """

    def __init__(self, network: Network, demand_day: DemandDay, vms: VmsController | None,
                 signals: SignalController | None, config: SimConfig):
        self.network = network
        self.day = demand_day
        self.vms = vms if vms is not None else ConstantVms()
        self.signals = signals if signals is not None else DefaultSignals(network)
        self.config = config
        self.vms.check(network)
        self.signals.check(network)
        depth = max(self.vms.history_depth, self.signals.history_depth)
        if config.horizon < depth + 1:
            raise ConfigurationError(f"horizon {config.horizon} shorter than history depth {depth} + 1")
        if demand_day.horizon < config.horizon:
            raise DataError(f"day {demand_day.label} covers {demand_day.horizon} steps, horizon is {config.horizon}")
        self.vms.reset()
        self.signals.reset()

        L = network.link_count
        idx = network.link_index
        zones = set(network.zones)
        self.history = StateHistory(np.array(network.reference_occupancy()), depth)
        self.rng = random.Random(config.rng_seed)

        self._alpha = [lk.alpha for lk in network.links]
        self._beta = [lk.beta for lk in network.links]
        self._cap = [lk.capacity_per_step for lk in network.links]
        self._kind = []
        self._turn_cum = []
        self._turn_out = []
        for lk in network.links:
            ix = network.intersection_at(lk.to_node)
            if lk.to_node in zones:
                self._kind.append(_EXIT)
                self._turn_cum.append(None)
                self._turn_out.append(None)
            elif ix is not None:
                probs = ix.turning_probabilities.get(lk.id, {})
                outs = sorted(probs, key=idx)
                cum = list(np.cumsum([probs[o] for o in outs]))
                self._kind.append(_TURN)
                self._turn_cum.append(cum)
                self._turn_out.append([idx(o) for o in outs])
            else:
                nxt = network.outgoing(lk.to_node)
                if len(nxt) != 1:
                    raise ConfigurationError(f"node {lk.to_node} needs turning probabilities")
                self._kind.append(_PASS)
                self._turn_cum.append(None)
                self._turn_out.append([idx(nxt[0].id)])

        # green fraction of a link = sum of the splits of phases serving it
        self._serving: list[list[tuple[int, int]]] = [[] for _ in range(L)]
        for i, ix in enumerate(network.intersections):
            for p, phase in enumerate(ix.phases):
                for inc in {m[0] for m in phase}:
                    self._serving[idx(inc)].append((i, p))

        influenced = influenced_destinations(network)
        self._influenced = influenced
        self._paths: dict[tuple[str, str, int], tuple[int, ...]] = {}
        if influenced:
            r1, r2 = (network.route(rid) for rid in network.vms.choice_routes)
            start = network.link(r1.links[0]).from_node
            end = network.link(r1.links[-1]).to_node
            for o, dests in influenced.items():
                head = network.shortest_path(o, start)
                for d in dests:
                    tail = network.shortest_path(end, d)
                    for k, r in ((1, r1), (2, r2)):
                        self._paths[(o, d, k)] = tuple(idx(x) for x in head + r.links + tail)

        self._first_link: dict[str, int] = {}
        for origin in demand_day.origins:
            if origin not in zones:
                raise DataError(f"day {demand_day.label}: unknown origin zone {origin!r}")
            outs = network.outgoing(origin)
            if len(outs) != 1 and any(demand_day.counts[origin]):
                raise DataError(f"origin {origin!r} must have exactly one outgoing link")
            if outs:
                self._first_link[origin] = idx(outs[0].id)

        self.step_no = 0
        self.queues: list[list] = [[] for _ in range(L)]
        self.occupancy = [0] * L
        self._last_exit = [0] * L
        self.agent_entry: list[int] = []
        self.agent_path: list[tuple[int, ...] | None] = []
        self.agent_pos: list[int] = []
        self.agent_link: list[int] = []
        self.agent_done: list[int] = []  # exit step, 0 while in the network
        self.completed = 0
        self._message = VmsMessage.NO_DISPLAY
        self._dwell = 0
        self._messages: list[VmsMessage] = []
        self._splits: list[np.ndarray] = []
        self._volumes: list[tuple[float, float]] = []
        self._occ_log: list[list[int]] = []
        self._route_idx = [
            [idx(x) for x in network.route(rid).links] for rid in network.vms.choice_routes
        ] if network.routes else [[], []]
        self._completions = [0] * L

    # -- helpers ---------------------------------------------------------

    def _enter(self, agent: int, link: int, t: int) -> None:
        x = self.occupancy[link]
        tt = math.floor(self._alpha[link] * x + self._beta[link] + 0.5)
        sched = t + (tt if tt > 1 else 1)
        if sched < self._last_exit[link]:
            sched = self._last_exit[link]
        self._last_exit[link] = sched
        heapq.heappush(self.queues[link], (sched, agent))
        self.occupancy[link] = x + 1
        self.agent_link[agent] = link

    def _new_agent(self, t: int, path) -> int:
        a = len(self.agent_entry)
        self.agent_entry.append(t)
        self.agent_path.append(path)
        self.agent_pos.append(0)
        self.agent_link.append(-1)
        self.agent_done.append(0)
        return a

    def _decide(self) -> list[np.ndarray]:
        proposal = self.vms.decide(self.history)
        if self._dwell == 0 or (proposal != self._message and self._dwell >= self.config.vms_min_dwell):
            self._message = VmsMessage(proposal)
            self._dwell = 0
        self._dwell += 1
        return list(self.signals.plan(self.history))

    # -- main loop -------------------------------------------------------

    def step(self) -> None:
        t = self.step_no + 1
        if t > self.config.horizon:
            raise RuntimeError("simulation already finished")
        net = self.network
        rng = self.rng
        plan = self._decide()
        if len(plan) != len(net.intersections):
            raise ConfigurationError("signal plan does not cover every intersection")
        message = self._message

        # injection
        spawned = inject_agents(self.network, self.day, t, rng, self.config.target_share, self._influenced)
        p1 = self.config.compliance.share(message)
        entries = []
        for kind, origin, dest in spawned:
            if kind == "background":
                entries.append((self._new_agent(t, None), self._first_link[origin]))
            else:
                entries.append((self._new_agent(t, (origin, dest)), -1))
        for n, (agent, link) in enumerate(entries):
            if link < 0:
                origin, dest = self.agent_path[agent]
                path = self._paths[(origin, dest, 1 if rng.random() < p1 else 2)]
                self.agent_path[agent] = path
                entries[n] = (agent, path[0])
        entries.sort()
        for agent, link in entries:
            self._enter(agent, link, t)

        # discharge
        green = [1.0] * net.link_count
        for link, serving in enumerate(self._serving):
            if serving:
                g = 0.0
                for i, p in serving:
                    g += plan[i][p]
                green[link] = min(1.0, g)
        movers: list[tuple[int, int]] = []
        queues = self.queues
        for link in range(net.link_count):
            q = queues[link]
            if q and q[0][0] <= t:
                out = discharge(q, t, green[link], self._cap[link])
                self.occupancy[link] -= len(out)
                movers.extend((a, link) for a in out)
        movers.sort()
        for agent, link in movers:
            path = self.agent_path[agent]
            if path is not None:
                pos = self.agent_pos[agent] + 1
                if pos >= len(path):
                    self._finish(agent, link, t)
                    continue
                self.agent_pos[agent] = pos
                self._enter(agent, path[pos], t)
                continue
            kind = self._kind[link]
            if kind == _EXIT:
                self._finish(agent, link, t)
            elif kind == _PASS:
                self._enter(agent, self._turn_out[link][0], t)
            else:
                cum = self._turn_cum[link]
                k = bisect_right(cum, rng.random())
                outs = self._turn_out[link]
                self._enter(agent, outs[min(k, len(outs) - 1)], t)

        occ = list(self.occupancy)
        self.history.push(occ)
        self._occ_log.append(occ)
        self._messages.append(message)
        self._splits.append(np.concatenate(plan) if plan else np.zeros(0))
        r1 = sum(occ[i] for i in self._route_idx[0])
        r2 = sum(occ[i] for i in self._route_idx[1])
        self._volumes.append((r1, r2))
        self.step_no = t

    def _finish(self, agent: int, link: int, t: int) -> None:
        self.agent_done[agent] = t
        self.agent_link[agent] = -1
        self.completed += 1
        self._completions[link] += 1

    def check_conservation(self) -> None:
        on_links = sum(self.occupancy)
        assert all(len(q) == n for q, n in zip(self.queues, self.occupancy)), "queue/occupancy mismatch"
        assert on_links + self.completed == len(self.agent_entry), "vehicle conservation violated"

    def run(self) -> SimResult:
        while self.step_no < self.config.horizon:
            self.step()
        return self.result()

    def result(self) -> SimResult:
        cfg = self.config
        end = self.step_no + 1
        times = []
        stranded = 0
        for entry, done in zip(self.agent_entry, self.agent_done):
            if not done:
                stranded += 1
            if entry <= cfg.warmup_steps:
                continue
            times.append((done if done else end) - entry)
        tt = np.array(times, dtype=float) * cfg.step_length
        mean = float(tt.mean()) if tt.size else None
        return SimResult(
            mean_travel_time=mean,
            travel_times=tt,
            completed=self.completed,
            stranded=stranded,
            created=len(self.agent_entry),
            messages=list(self._messages),
            splits=np.array(self._splits),
            route_volumes=np.array(self._volumes, dtype=float).reshape(-1, 2),
            occupancy=np.array(self._occ_log, dtype=int).reshape(-1, self.network.link_count),
            link_completions=np.array(self._completions),
        )


def run(network: Network, demand_day: DemandDay, vms_controller: VmsController | None,
        signal_controller: SignalController | None, config: SimConfig) -> SimResult:
    return Simulation(network, demand_day, vms_controller, signal_controller, config).run()


def influenced_destinations(network: Network) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for o, d in sorted(network.vms.influenced_od_pairs):
        out.setdefault(o, []).append(d)
    return out


def inject_agents(network: Network, demand_day: DemandDay, step: int, rng: random.Random,
                  target_share: float,
                  influenced: dict[str, list[str]] | None = None) -> list[tuple[str, str, str | None]]:
    """Agents created at ``step`` as (kind, origin, destination), in id order.

    Per origin (sorted): the background count, then the target count
    ``target_share * background`` with Bernoulli rounding of the fraction.
    Target destinations are drawn afterwards in id order; a background
    agent's destination is unknown (None) until it leaves the network.
    """
    if influenced is None:
        influenced = influenced_destinations(network)
    out: list[tuple[str, str, str | None]] = []
    for origin in demand_day.origins:
        n_bg = demand_day.counts[origin][step - 1]
        out.extend(("background", origin, None) for _ in range(n_bg))
        if origin in influenced and n_bg:
            want = target_share * n_bg
            n_t = math.floor(want)
            frac = want - n_t
            if frac > 0 and rng.random() < frac:
                n_t += 1
            out.extend(("target", origin, None) for _ in range(n_t))
    for i, (kind, origin, _) in enumerate(out):
        if kind == "target":
            dests = influenced[origin]
            out[i] = (kind, origin, dests[rng.randrange(len(dests))] if len(dests) > 1 else dests[0])
    return out
