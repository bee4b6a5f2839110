"""Deterministic discrete-event engine.

Unit-disk radio with no MAC contention: a transmission reaches every alive
node within range after a fixed latency plus uniform jitter. Energy is
charged per bit, once per transmission and once per reception.

All randomness comes from one ``random.Random`` seeded from the scenario.
Draw order: node placement, traffic pairs, mobility set-up, then mobility
steps interleaved with per-delivery jitter in event order.
"""
from __future__ import annotations

import enum
import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .core import BROADCAST, ContractError, Packet
from .trace import DROP, ENERGY_DEAD, RX, TX, Trace

Position = tuple[float, float]


class ConfigError(ValueError):
    pass


class Action(enum.Enum):
    DELIVER = "deliver"
    TIMER = "timer"
    MOBILITY_STEP = "mobility"
    METRICS_SAMPLE = "sample"


@dataclass
class Event:
    fire_at: float
    seq: int
    target: int | None
    action: Action
    data: Any = None


def place_grid(n: int, area_x: float, area_y: float) -> list[Position]:
    """Row-major lattice of ceil(sqrt(n)) x ceil(sqrt(n)) points, first n used."""
    if n < 1:
        raise ConfigError("need at least one node")
    if area_x <= 0 or area_y <= 0:
        raise ConfigError("area dimensions must be positive")
    side = math.isqrt(n)
    if side * side < n:
        side += 1
    dx, dy = area_x / side, area_y / side
    pts = [(dx * (c + 0.5), dy * (r + 0.5)) for r in range(side) for c in range(side)]
    return pts[:n]


def place_uniform(n: int, area_x: float, area_y: float, rng: random.Random) -> list[Position]:
    if n < 1:
        raise ConfigError("need at least one node")
    if area_x <= 0 or area_y <= 0:
        raise ConfigError("area dimensions must be positive")
    return [(rng.uniform(0, area_x), rng.uniform(0, area_y)) for _ in range(n)]


def neighbors(node: int, positions: Sequence[Position], range_m: float) -> set[int]:
    if range_m <= 0:
        raise ContractError("radio range must be positive")
    x0, y0 = positions[node]
    r2 = range_m * range_m
    return {i for i, (x, y) in enumerate(positions)
            if i != node and (x - x0) ** 2 + (y - y0) ** 2 <= r2}


def adjacency(positions: Sequence[Position], range_m: float) -> list[list[int]]:
    return [sorted(neighbors(i, positions, range_m)) for i in range(len(positions))]


def hop_diameter(adj: Sequence[Sequence[int]]) -> int:
    """Largest finite BFS eccentricity over all nodes (0 for no links)."""
    best = 0
    for s in range(len(adj)):
        dist = {s: 0}
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        best = max(best, max(dist.values()))
    return best


@dataclass
class EnergyState:
    residual: float
    tx_cost_per_bit: float
    rx_cost_per_bit: float

    @property
    def dead(self):
        return self.residual <= 0.0


@dataclass
class _Walker:
    waypoint: Position
    speed: float
    pause_until: float = 0.0


@dataclass
class WaypointMobility:
    """Random waypoint: walk to a uniform point, pause, draw again."""

    area_x: float
    area_y: float
    v_min: float
    v_max: float
    pause_s: float = 0.0
    step_s: float = 1.0
    walkers: list[_Walker] = field(default_factory=list)

    def __post_init__(self):
        if not 0 < self.v_min <= self.v_max:
            raise ConfigError("need 0 < v_min <= v_max")
        if self.step_s <= 0:
            raise ConfigError("mobility step must be positive")

    def _draw(self, rng) -> tuple[Position, float]:
        wp = (rng.uniform(0, self.area_x), rng.uniform(0, self.area_y))
        return wp, rng.uniform(self.v_min, self.v_max)

    def setup(self, n: int, rng: random.Random):
        self.walkers = [_Walker(*self._draw(rng)) for _ in range(n)]

    def step(self, node: int, pos: Position, now: float, rng: random.Random) -> Position:
        """Advance one node by one step of ``step_s`` seconds."""
        w = self.walkers[node]
        if now < w.pause_until:
            return pos
        if w.pause_until > 0.0 and pos == w.waypoint:
            # pause over, pick the next leg
            w.waypoint, w.speed = self._draw(rng)
            w.pause_until = 0.0
        (x, y), (tx, ty) = pos, w.waypoint
        dist = math.hypot(tx - x, ty - y)
        reach = w.speed * self.step_s
        if dist <= reach:
            w.pause_until = now + self.pause_s if self.pause_s > 0 else 0.0
            if self.pause_s <= 0:
                w.waypoint, w.speed = self._draw(rng)
            return (tx, ty)
        f = reach / dist
        return (x + (tx - x) * f, y + (ty - y) * f)


class Simulator:
    """Event queue, clock, radio and energy ledger for one scenario."""

    def __init__(self, positions: Sequence[Position], range_m: float, *,
                 area=(1000.0, 1000.0), rng: random.Random | None = None, seed: int = 0,
                 latency: float = 0.002, jitter: float = 0.003,
                 initial_energy: float = 100.0, tx_cost: float = 1e-6,
                 rx_cost: float = 5e-7, mobility: WaypointMobility | None = None,
                 trace: Trace | None = None):
        if range_m <= 0:
            raise ConfigError("radio range must be positive")
        if latency <= 0 or jitter < 0:
            raise ConfigError("latency must be positive and jitter nonnegative")
        self.positions = list(positions)
        self.n = len(self.positions)
        self.range_m = range_m
        self.area = area
        self.rng = rng if rng is not None else random.Random(seed)
        self.latency = latency
        self.jitter = jitter
        self.energy = [EnergyState(initial_energy, tx_cost, rx_cost) for _ in range(self.n)]
        self.initial_energy = initial_energy
        self.trace = trace if trace is not None else Trace()
        self.now = 0.0
        self._queue: list[tuple[float, int, Event]] = []
        self._seq = 0
        self.agents: list[Any] = []
        self.adj = adjacency(self.positions, range_m)
        self.mobility = mobility
        if mobility is not None:
            mobility.setup(self.n, self.rng)
            self.schedule(mobility.step_s, None, Action.MOBILITY_STEP)

    # -- scheduling --------------------------------------------------------

    def schedule(self, fire_at: float, target, action: Action, data=None) -> Event:
        if fire_at < self.now:
            raise ContractError(f"cannot schedule at {fire_at} before now={self.now}")
        ev = Event(fire_at, self._seq, target, action, data)
        self._seq += 1
        heapq.heappush(self._queue, (fire_at, ev.seq, ev))
        return ev

    def set_timer(self, node: int, delay: float, name: str, data=None) -> Event:
        return self.schedule(self.now + delay, node, Action.TIMER, (name, data))

    def call_at(self, fire_at: float, fn: Callable[[], None]) -> Event:
        """Engine-level timer running ``fn`` at ``fire_at``."""
        return self.schedule(fire_at, None, Action.TIMER, fn)

    def pending(self) -> int:
        return len(self._queue)

    def peek_time(self) -> float | None:
        return self._queue[0][0] if self._queue else None

    def pop_next(self) -> Event:
        fire_at, _, ev = heapq.heappop(self._queue)
        self.now = fire_at
        return ev

    def run_until(self, t_end: float):
        """Fire every event with fire_at <= t_end, then park the clock at t_end."""
        for a in self.agents:
            if not getattr(a, "_started", False):
                a._started = True
                a.start()
        q = self._queue
        while q and q[0][0] <= t_end:
            self._dispatch(self.pop_next())
        self.now = max(self.now, t_end)

    def _dispatch(self, ev: Event):
        if ev.action is Action.DELIVER:
            self._deliver(ev.target, *ev.data)
        elif ev.action is Action.TIMER:
            if ev.target is None:
                ev.data()
            else:
                name, data = ev.data
                self.agents[ev.target].on_timer(name, data)
        elif ev.action is Action.MOBILITY_STEP:
            self._mobility_step()

    # -- radio -------------------------------------------------------------

    def alive(self, node: int) -> bool:
        return not self.energy[node].dead

    def in_range(self, a: int, b: int) -> bool:
        (x0, y0), (x1, y1) = self.positions[a], self.positions[b]
        return (x0 - x1) ** 2 + (y0 - y1) ** 2 <= self.range_m ** 2

    def _delay(self) -> float:
        return self.latency + self.rng.random() * self.jitter

    def transmit(self, pkt: Packet, sender: int, next_hop: int | None = None) -> int:
        """Put ``pkt`` on the air; returns the number of deliveries scheduled.

        ``next_hop=None`` broadcasts to every neighbor. A unicast to a node
        out of range is sent (and paid for) but only produces a Drop.
        """
        now = self.now
        if self.energy[sender].dead:
            self.trace.packet(now, DROP, sender, pkt)
            return 0
        self.trace.packet(now, TX, sender, pkt)
        self.charge_energy(sender, pkt.size_bits, "tx")
        if next_hop is None or next_hop == BROADCAST:
            targets = self.adj[sender]
        elif next_hop != sender and self.in_range(sender, next_hop):
            targets = (next_hop,)
        else:
            self.trace.packet(now, DROP, sender, pkt)
            return 0
        for nb in targets:
            self.schedule(now + self._delay(), nb, Action.DELIVER, (pkt, sender))
        return len(targets)

    def _deliver(self, receiver: int, pkt: Packet, sender: int):
        if self.energy[receiver].dead:
            self.trace.packet(self.now, DROP, receiver, pkt)
            return
        self.trace.packet(self.now, RX, receiver, pkt)
        self.charge_energy(receiver, pkt.size_bits, "rx")
        if self.agents:
            self.agents[receiver].on_receive(pkt, sender)

    def charge_energy(self, node: int, bits: int, mode: str) -> float:
        if bits <= 0:
            raise ContractError("bits must be positive")
        es = self.energy[node]
        cost = es.tx_cost_per_bit if mode == "tx" else es.rx_cost_per_bit
        was_alive = es.residual > 0.0
        es.residual = max(0.0, es.residual - bits * cost)
        if was_alive and es.residual <= 0.0:
            self.trace.note(self.now, ENERGY_DEAD, node)
        return es.residual

    # -- mobility ----------------------------------------------------------

    def _mobility_step(self):
        mob = self.mobility
        self.positions = [mob.step(i, p, self.now, self.rng)
                          for i, p in enumerate(self.positions)]
        self.adj = adjacency(self.positions, self.range_m)
        for a in self.agents:
            hook = getattr(a, "on_topology_change", None)
            if hook is not None:
                hook()
        self.schedule(self.now + mob.step_s, None, Action.MOBILITY_STEP)


def waypoint_step(mob: WaypointMobility, node: int, pos: Position, now: float,
                  rng: random.Random) -> tuple[Position, float]:
    """New position for ``node`` and the time of its next mobility step."""
    return mob.step(node, pos, now, rng), now + mob.step_s
