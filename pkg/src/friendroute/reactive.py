"""On-demand routing over a timed route cache, with blind flooding discovery.

``FloodingAgent`` is the comparison baseline: every discovery floods the
whole network (ttl = ttl_max) and only the destination answers. Routes are
remembered by every node the reply crosses and die at their timeout; nothing
is refreshed when they expire.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, fields

from .agent import Agent
from .core import (ContractError, MessageKind, Packet, Route, RouteCache,
                   fresher, is_expired, make_earmark)
from .trace import DROP, EXPIRE

RREQ_BITS = 192
RREP_BITS = 224


@dataclass
class ProtocolParams:
    timeout_period: float = 30.0
    ifthres: float = 4.0
    k: float = 1.0
    share_fraction: float = 0.5
    batch_size: int = 4
    ttl_max: int = 16
    e_min: float = 0.05
    q_max: int = 16
    cache_capacity: int = 64
    buffer_size: int = 64
    # quiet time that closes a data burst before sharing starts
    burst_gap: float = 0.5
    batch_interval: float = 0.01
    data_ttl: int = 64

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not v > 0:
                raise ContractError(f"protocol parameter {f.name} must be positive, got {v}")
        if self.share_fraction > 1:
            raise ContractError("share_fraction must be <= 1")


@dataclass
class DiscoveryState:
    target: int
    current_ttl: int
    round: int
    outstanding_req_id: int
    started_at: float


@dataclass(frozen=True)
class RequestInfo:
    req_id: int


@dataclass(frozen=True)
class ReplyInfo:
    req_id: int
    requester: int
    # hops from the responder to the target (0 when the target answers)
    base_hops: int
    discovered_at: float
    earmark: float
    cached: bool = False


@dataclass(frozen=True)
class CacheHit:
    route: Route


@dataclass(frozen=True)
class DiscoveryStarted:
    state: DiscoveryState


@dataclass(frozen=True)
class RequestRecord:
    t: float
    node: int
    dst: int
    hit: bool
    entry_origin: str | None


@dataclass(frozen=True)
class ForwardRecord:
    t: float
    node: int
    pkt_id: int
    dst: int
    expires_at: float
    entry_origin: str


def next_ring_ttl(prev_ttl: int, ttl_max: int) -> int:
    if prev_ttl < 1:
        raise ContractError("ttl must be >= 1")
    return min(2 * prev_ttl, ttl_max)


def discovery_timeout(ttl: int, latency: float, jitter: float) -> float:
    return 2 * ttl * (latency + jitter)


class FloodingAgent(Agent):
    name = "flooding"
    answers_from_cache = False

    def __init__(self, node_id, sim, ids, t_ref, params: ProtocolParams | None = None):
        super().__init__(node_id, sim, ids, t_ref)
        self.params = params or ProtocolParams()
        self.cache = RouteCache(self.params.cache_capacity)
        self.buffer: deque[Packet] = deque()
        self.discoveries: dict[int, DiscoveryState] = {}
        self.seen: set[tuple[int, int]] = set()
        self.my_requests: set[int] = set()
        self.request_log: list[RequestRecord] = []
        self.forward_log: list[ForwardRecord] = []

    # -- cache access ------------------------------------------------------

    def lookup(self, dest):
        e = self.cache.peek(dest)
        if e is not None and is_expired(e, self.now):
            self.cache.invalidate(dest)
            self.trace.note(self.now, EXPIRE, self.id, dst=dest)
            return None
        return e

    def install(self, route: Route, origin: str):
        entry, evicted = self.cache.install(route, self.now, self.params.timeout_period, origin)
        if evicted is not None:
            self.trace.note(self.now, EXPIRE, self.id, dst=evicted.route.dest)
        return entry

    def offer(self, route: Route, origin: str) -> bool:
        """Install ``route`` unless a live entry is at least as fresh."""
        if route.dest == self.id:
            return False
        e = self.lookup(route.dest)
        if e is not None and fresher(e.route, route) is e.route:
            return False
        self.install(route, origin)
        return True

    def purge_expired(self, now: float) -> int:
        """Remove expired entries. Emits Expire trace notes, never packets."""
        removed = self.cache.purge(now)
        for e in removed:
            self.trace.note(now, EXPIRE, self.id, dst=e.route.dest)
        return len(removed)

    def _route(self, dest, next_hop, hops, discovered_at, earmark=None):
        if earmark is None:
            earmark = make_earmark(self.t_ref, discovered_at)
        return Route(dest, next_hop, hops, discovered_at, earmark)

    # -- sending -----------------------------------------------------------

    def send_data(self, pkt: Packet):
        self.route_packet(pkt)

    def route_packet(self, pkt: Packet):
        """Send a unicast packet one hop toward ``pkt.dst`` from this node.

        Data (and anything this node originated) waits in the buffer while
        a discovery runs; other control traffic in transit is dropped.
        """
        if pkt.src == self.id:
            # own traffic goes through request_route so every lookup is logged
            if isinstance(self.request_route(pkt.dst), CacheHit):
                self._unicast(pkt, self.lookup(pkt.dst))
            else:
                self._enqueue(pkt)
            return
        entry = self.lookup(pkt.dst)
        if entry is not None:
            self._unicast(pkt, entry)
        elif pkt.kind is MessageKind.DATA:
            self._enqueue(pkt)
            self.request_route(pkt.dst)
        else:
            self.drop(pkt)

    def _unicast(self, pkt: Packet, entry):
        if pkt.kind is MessageKind.DATA:
            self.forward_log.append(ForwardRecord(self.now, self.id, pkt.pkt_id, pkt.dst,
                                                  entry.expires_at, entry.origin))
        sent = self.sim.transmit(pkt, self.id, entry.route.next_hop)
        if sent == 0 and self.sim.alive(self.id):
            # next hop gone: the route is stale
            self.cache.invalidate(pkt.dst)
            if pkt.kind is MessageKind.DATA or pkt.src == self.id:
                self._enqueue(pkt)
                self.request_route(pkt.dst)
            else:
                self.on_undeliverable(pkt)

    def _enqueue(self, pkt: Packet):
        if len(self.buffer) >= self.params.buffer_size:
            old = self.buffer.popleft()
            self.drop(old)
            self.on_undeliverable(old)
        self.buffer.append(pkt)

    def _flush(self, dest):
        ready = [p for p in self.buffer if p.dst == dest]
        if not ready:
            return
        self.buffer = deque(p for p in self.buffer if p.dst != dest)
        for p in ready:
            self.route_packet(p)

    def _abandon(self, dest):
        for p in [p for p in self.buffer if p.dst == dest]:
            self.buffer.remove(p)
            self.drop(p)
            self.on_undeliverable(p)

    def on_undeliverable(self, pkt: Packet):
        pass

    # -- discovery ---------------------------------------------------------

    def first_ttl(self) -> int:
        return self.params.ttl_max

    def request_route(self, dst: int):
        if dst == self.id:
            raise ContractError("a node does not request a route to itself")
        entry = self.lookup(dst)
        self.request_log.append(RequestRecord(self.now, self.id, dst, entry is not None,
                                              entry.origin if entry else None))
        if entry is not None:
            return CacheHit(entry.route)
        state = self.discoveries.get(dst)
        if state is None:
            state = DiscoveryState(dst, self.first_ttl(), 1, -1, self.now)
            self.discoveries[dst] = state
            self._send_request(state)
        return DiscoveryStarted(state)

    def _send_request(self, state: DiscoveryState):
        req_id = self.ids()
        state.outstanding_req_id = req_id
        self.my_requests.add(req_id)
        self.seen.add((self.id, req_id))
        pkt = Packet(req_id, MessageKind.ROUTE_REQUEST, self.id, state.target,
                     state.current_ttl, RREQ_BITS, self.now, payload=RequestInfo(req_id))
        self.sim.transmit(pkt, self.id)
        wait = discovery_timeout(state.current_ttl, self.sim.latency, self.sim.jitter)
        self.sim.set_timer(self.id, wait, "discovery", (state.target, req_id))

    def _timer_discovery(self, data):
        target, req_id = data
        state = self.discoveries.get(target)
        if state is None or state.outstanding_req_id != req_id:
            return
        self.on_discovery_timeout(state)

    def on_discovery_timeout(self, state: DiscoveryState) -> str:
        if state.current_ttl < self.params.ttl_max:
            state.current_ttl = next_ring_ttl(state.current_ttl, self.params.ttl_max)
            state.round += 1
            self._send_request(state)
            return "NextRing"
        self.give_up(state)
        return "GiveUp"

    def give_up(self, state: DiscoveryState):
        del self.discoveries[state.target]
        self.trace.note(self.now, DROP, self.id, pkt_id=state.outstanding_req_id,
                        pkt_kind=MessageKind.ROUTE_REQUEST.value, src=self.id,
                        dst=state.target)
        self._abandon(state.target)

    # -- receiving ---------------------------------------------------------

    def learn_neighbor(self, prev: int):
        if self.lookup(prev) is None:
            self.install(self._route(prev, prev, 1, self.now), "neighbor")

    def on_receive(self, pkt: Packet, prev: int):
        self.learn_neighbor(prev)
        kind = pkt.kind
        if kind is MessageKind.ROUTE_REQUEST:
            self.on_route_request(pkt, prev)
        elif pkt.dst == self.id:
            if kind is MessageKind.DATA:
                self.on_data(pkt, prev)
            elif kind is MessageKind.ROUTE_REPLY:
                self.on_route_reply(pkt, prev)
            else:
                self.on_control(pkt, prev)
        else:
            self.on_transit(pkt, prev)

    def on_transit(self, pkt: Packet, prev: int):
        if pkt.kind is MessageKind.ROUTE_REPLY:
            self._learn_from_reply(pkt, prev)
        if pkt.ttl < 1:
            self.drop(pkt)
            return
        self.route_packet(pkt.forwarded())

    def on_data(self, pkt: Packet, prev: int):
        pass

    def on_control(self, pkt: Packet, prev: int):
        self.drop(pkt)

    def on_route_request(self, pkt: Packet, prev: int) -> str:
        req = pkt.payload
        key = (pkt.src, req.req_id)
        if key in self.seen:
            return "Ignore"
        self.seen.add(key)
        self.offer(self._route(pkt.src, prev, pkt.hops_traversed + 1, pkt.created_at), "reverse")
        if pkt.dst == self.id:
            self._reply(pkt, ReplyInfo(req.req_id, pkt.src, 0, self.now,
                                       make_earmark(self.t_ref, self.now)))
            return "Reply"
        if self.answers_from_cache:
            e = self.lookup(pkt.dst)
            if e is not None and e.route.next_hop != prev:
                r = e.route
                self._reply(pkt, ReplyInfo(req.req_id, pkt.src, r.hop_count,
                                           r.discovered_at, r.earmark, cached=True))
                return "CachedReply"
        if pkt.ttl > 1:
            self.sim.transmit(pkt.forwarded(), self.id)
            return "Rebroadcast"
        return "Ignore"

    def _reply(self, req_pkt: Packet, info: ReplyInfo):
        pkt = Packet(self.ids(), MessageKind.ROUTE_REPLY, self.id, req_pkt.src,
                     self.params.data_ttl, RREP_BITS, self.now,
                     payload=(req_pkt.dst, info))
        self.route_packet(pkt)

    def _learn_from_reply(self, pkt: Packet, prev: int) -> bool:
        target, info = pkt.payload
        hops = info.base_hops + pkt.hops_traversed + 1
        return self.offer(self._route(target, prev, hops, info.discovered_at, info.earmark),
                          "reply")

    def on_route_reply(self, pkt: Packet, prev: int):
        target, info = pkt.payload
        if info.req_id not in self.my_requests:
            self.drop(pkt)
            return
        self._learn_from_reply(pkt, prev)
        state = self.discoveries.pop(target, None)
        self._flush(target)
        return state
