"""Fisheye state routing with two scope levels and grid-cell gateways.

Each node periodically broadcasts link-state entries: often for origins
inside its scope radius, rarely (full table) for everything. With the
gateway filter on, a node that is not its cell's gateway leaves other
cells' origins out of the frequent rounds.
"""
from __future__ import annotations

import enum
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .agent import Agent
from .core import BROADCAST, ContractError, MessageKind, Packet
from .engine import Action, ConfigError, Position

LS_HEADER_BITS = 64
LS_ENTRY_BITS = 32
LS_NEIGHBOR_BITS = 16


class Scope(str, enum.Enum):
    INNER = "Inner"
    OUTER = "Outer"


@dataclass(frozen=True)
class ScopeConfig:
    scope_radius: int = 2
    period_inner: float = 5.0
    period_outer: float = 15.0
    # link-state entries carried per LinkState packet
    max_entries: int = 32

    def __post_init__(self):
        if self.scope_radius < 1:
            raise ConfigError("scope_radius must be >= 1")
        if not 0 < self.period_inner < self.period_outer:
            raise ConfigError("need 0 < period_inner < period_outer")
        if self.max_entries < 1:
            raise ConfigError("max_entries must be >= 1")


@dataclass(frozen=True)
class LinkStateEntry:
    origin: int
    neighbor_set: frozenset
    seq_no: int
    received_at: float = 0.0

    @property
    def bits(self):
        return LS_ENTRY_BITS + LS_NEIGHBOR_BITS * len(self.neighbor_set)


@dataclass
class CellAssignment:
    cell_size: float
    cell_of: dict[int, tuple[int, int]] = field(default_factory=dict)
    gateway_of: dict[tuple[int, int], int] = field(default_factory=dict)

    def is_gateway(self, node: int) -> bool:
        return self.gateway_of.get(self.cell_of[node]) == node


def assign_cells(positions: Sequence[Position], cell_size: float) -> CellAssignment:
    if cell_size <= 0:
        raise ContractError("cell_size must be positive")
    ca = CellAssignment(cell_size)
    for i, (x, y) in enumerate(positions):
        cell = (math.floor(x / cell_size), math.floor(y / cell_size))
        ca.cell_of[i] = cell
        if cell not in ca.gateway_of or i < ca.gateway_of[cell]:
            ca.gateway_of[cell] = i
    return ca


def scope_of(distance_hops: int, cfg: ScopeConfig) -> Scope:
    if distance_hops < 0:
        raise ContractError("distance must be nonnegative")
    return Scope.INNER if distance_hops <= cfg.scope_radius else Scope.OUTER


def compute_routes(topology: Mapping[int, frozenset | set], source: int) -> dict[int, tuple[int, int]]:
    """BFS shortest paths from ``source`` over directed neighbor sets.

    Equal-cost paths resolve to the smaller next hop: first hops are
    enqueued in ascending order and the queue stays grouped by first hop.
    """
    routes: dict[int, tuple[int, int]] = {}
    seen = {source}
    q = deque()
    for nb in sorted(topology.get(source, ())):
        if nb not in seen:
            seen.add(nb)
            routes[nb] = (nb, 1)
            q.append(nb)
    while q:
        u = q.popleft()
        first, d = routes[u]
        for v in sorted(topology.get(u, ())):
            if v not in seen:
                seen.add(v)
                routes[v] = (first, d + 1)
                q.append(v)
    return routes


class GridOverlay:
    """Cell map shared by all nodes, rebuilt when positions move."""

    def __init__(self, sim, cell_size: float):
        self.sim = sim
        self.cell_size = cell_size
        self._positions = None
        self._ca = None

    @property
    def assignment(self) -> CellAssignment:
        if self._positions is not self.sim.positions:
            self._positions = self.sim.positions
            self._ca = assign_cells(self._positions, self.cell_size)
        return self._ca


class GridFsrAgent(Agent):
    name = "gridfsr"

    def __init__(self, node_id, sim, ids, t_ref, scope: ScopeConfig | None = None,
                 overlay: GridOverlay | None = None, gateway_filter: bool = True,
                 data_ttl: int = 64):
        super().__init__(node_id, sim, ids, t_ref)
        self.scope = scope or ScopeConfig()
        self.overlay = overlay
        self.gateway_filter = gateway_filter and overlay is not None
        self.data_ttl = data_ttl
        self.seq = 0
        self.topology: dict[int, LinkStateEntry] = {}
        self._routes: dict[int, tuple[int, int]] | None = None
        # entry emissions per (origin, scope of the origin at emission time)
        self.emissions: Counter[tuple[int, Scope]] = Counter()
        self._refresh_own()

    def _refresh_own(self):
        nbrs = frozenset(self.sim.adj[self.id])
        old = self.topology.get(self.id)
        if old is None or old.neighbor_set != nbrs:
            self._routes = None
        self.topology[self.id] = LinkStateEntry(self.id, nbrs, self.seq, self.now)

    def on_topology_change(self):
        self._refresh_own()

    @property
    def routes(self) -> dict[int, tuple[int, int]]:
        if self._routes is None:
            graph = {o: e.neighbor_set for o, e in self.topology.items()}
            self._routes = compute_routes(graph, self.id)
        return self._routes

    def distance(self, origin: int) -> int | None:
        if origin == self.id:
            return 0
        r = self.routes.get(origin)
        return None if r is None else r[1]

    # -- periodic updates --------------------------------------------------

    def start(self):
        self.sim.set_timer(self.id, self.scope.period_inner, "inner", 1)
        self.sim.set_timer(self.id, self.scope.period_outer, "outer", 1)

    def _timer_inner(self, k):
        cfg = self.scope
        t = k * cfg.period_inner
        m = round(t / cfg.period_outer)
        # a full round happens at this instant anyway
        if m < 1 or abs(m * cfg.period_outer - t) > 1e-9:
            self.periodic_update(full=False)
        self.sim.schedule(max(self.now, (k + 1) * cfg.period_inner), self.id,
                          Action.TIMER, ("inner", k + 1))

    def _timer_outer(self, m):
        self.periodic_update(full=True)
        self.sim.schedule(max(self.now, (m + 1) * self.scope.period_outer), self.id,
                          Action.TIMER, ("outer", m + 1))

    def outgoing_entries(self, full: bool) -> list[LinkStateEntry]:
        self.seq += 1
        self._refresh_own()
        out = []
        ca = self.overlay.assignment if self.gateway_filter and not full else None
        mine = ca.cell_of[self.id] if ca is not None else None
        filtered = ca is not None and not ca.is_gateway(self.id)
        for origin in sorted(self.topology):
            d = self.distance(origin)
            sc = Scope.OUTER if d is None else scope_of(d, self.scope)
            if not full and sc is Scope.OUTER:
                continue
            if filtered and ca.cell_of.get(origin) != mine:
                continue
            out.append(self.topology[origin])
            self.emissions[origin, sc] += 1
        return out

    def periodic_update(self, full: bool) -> list[Packet]:
        if not self.sim.alive(self.id):
            return []
        entries = self.outgoing_entries(full)
        pkts = []
        step = self.scope.max_entries
        for i in range(0, len(entries), step):
            chunk = tuple(entries[i:i + step])
            bits = LS_HEADER_BITS + sum(e.bits for e in chunk)
            pkt = Packet(self.ids(), MessageKind.LINK_STATE, self.id, BROADCAST, 1, bits,
                         self.now, payload=chunk)
            self.sim.transmit(pkt, self.id)
            pkts.append(pkt)
        return pkts

    def on_link_state(self, pkt: Packet) -> int:
        merged = 0
        topo, me, n, now = self.topology, self.id, self.sim.n, self.now
        for e in pkt.payload:
            origin = e.origin
            cur = topo.get(origin)
            if cur is not None:
                if e.seq_no <= cur.seq_no or origin == me:
                    continue
            elif not 0 <= origin < n:
                self.drop(pkt)
                continue
            elif origin == me:
                continue
            if cur is None or cur.neighbor_set != e.neighbor_set:
                self._routes = None
            topo[origin] = LinkStateEntry(origin, e.neighbor_set, e.seq_no, now)
            merged += 1
        return merged

    # -- data --------------------------------------------------------------

    def send_data(self, pkt: Packet):
        self._forward(pkt)

    def _forward(self, pkt: Packet):
        r = self.routes.get(pkt.dst)
        if r is None:
            self.drop(pkt)
            return
        if self.sim.transmit(pkt, self.id, r[0]) == 0:
            self._routes = None

    def on_receive(self, pkt: Packet, prev: int):
        if pkt.kind is MessageKind.LINK_STATE:
            self.on_link_state(pkt)
        elif pkt.dst == self.id:
            return
        elif pkt.ttl < 1:
            self.drop(pkt)
        else:
            self._forward(pkt.forwarded())
