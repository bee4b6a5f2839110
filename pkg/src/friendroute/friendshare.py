"""Friend-node neighborhood sharing on top of expanding-ring discovery.

Discovery starts at one hop and doubles the ring each time it times out.
Any node holding a live route answers a request on the destination's
behalf. A data receiver counts packets from each sender; once the count
(scaled by ``k``) passes ``ifthres`` the sender becomes a friend, and at the
end of the current burst the receiver offers it the nearest part of its own
route cache. The sender may cut the stream short with a Satiated message and
sends back a GratisReply whenever it holds a fresher route than the one
offered.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .core import IntimacyRecord, MessageKind, Packet, PeerState, Route, fresher
from .reactive import (CacheHit, DiscoveryStarted, DiscoveryState, FloodingAgent,
                       ProtocolParams, next_ring_ttl)
from .trace import STATE_CHANGE

__all__ = ["FriendShareAgent", "ProtocolParams", "SharePhase", "ShareSession",
           "CacheHit", "DiscoveryStarted", "DiscoveryState", "next_ring_ttl"]

SHARE_REQUEST_BITS = 128
SHARE_CONSENT_BITS = 128
BATCH_HEADER_BITS = 96
ROUTE_BITS = 96
SATIATED_BITS = 96
GRATIS_BITS = 192


class SharePhase(str, enum.Enum):
    REQUESTED = "Requested"
    CONSENTED = "Consented"
    STREAMING = "Streaming"
    SATIATED = "Satiated"
    DONE = "Done"
    REJECTED = "Rejected"


_ALLOWED = {
    SharePhase.REQUESTED: {SharePhase.CONSENTED, SharePhase.REJECTED},
    SharePhase.CONSENTED: {SharePhase.STREAMING, SharePhase.DONE, SharePhase.SATIATED},
    SharePhase.STREAMING: {SharePhase.SATIATED, SharePhase.DONE},
}


class PhaseError(RuntimeError):
    pass


@dataclass
class ShareSession:
    receiver: int  # exposes its routes
    sender: int  # acquires them
    phase: SharePhase = SharePhase.REQUESTED
    routes_sent: int = 0
    quota: int = 0
    pending: list[Route] = field(default_factory=list)
    history: list[SharePhase] = field(default_factory=list)

    def move(self, phase: SharePhase):
        if phase not in _ALLOWED.get(self.phase, ()):
            raise PhaseError(f"share session cannot go {self.phase.value} -> {phase.value}")
        self.history.append(self.phase)
        self.phase = phase


@dataclass(frozen=True)
class Consent:
    accept: bool


@dataclass(frozen=True)
class Batch:
    routes: tuple[Route, ...]
    last: bool


@dataclass(frozen=True)
class Gratis:
    dest: int
    hop_count: int
    discovered_at: float
    earmark: float


@dataclass(frozen=True)
class ShareRecord:
    t: float
    receiver: int
    sender: int
    exposed: int
    phase: str


class FriendShareAgent(FloodingAgent):
    name = "friendshare"
    answers_from_cache = True

    def __init__(self, node_id, sim, ids, t_ref, params: ProtocolParams | None = None):
        super().__init__(node_id, sim, ids, t_ref, params)
        self.intimacy: dict[int, IntimacyRecord] = {}
        self.pending_share: set[int] = set()
        self._burst_gen: dict[int, int] = {}
        # sessions where this node exposes routes, keyed by the acquirer
        self.exposing: dict[int, ShareSession] = {}
        # sessions where this node acquires routes, keyed by the exposer
        self.acquiring: dict[int, ShareSession] = {}
        self.share_log: list[ShareRecord] = []
        self.gratis_sent = 0

    def first_ttl(self) -> int:
        return 1

    # -- intimacy ----------------------------------------------------------

    def on_data(self, pkt: Packet, prev: int):
        self.on_data_received(pkt.src)

    def on_data_received(self, sender: int) -> IntimacyRecord:
        p = self.params
        rec = self.intimacy.get(sender)
        if rec is None:
            rec = self.intimacy[sender] = IntimacyRecord(sender, p.k)
        if rec.observe(p.ifthres):
            self.trace.note(self.now, STATE_CHANGE, self.id, src=sender)
            self.pending_share.add(sender)
        if sender in self.pending_share:
            gen = self._burst_gen.get(sender, 0) + 1
            self._burst_gen[sender] = gen
            self.sim.set_timer(self.id, p.burst_gap, "burst_end", (sender, gen))
        return rec

    def _timer_burst_end(self, data):
        sender, gen = data
        if self._burst_gen.get(sender) != gen or sender not in self.pending_share:
            return
        self.pending_share.discard(sender)
        self.start_share(sender)

    # -- exposer side ------------------------------------------------------

    def start_share(self, friend: int) -> Packet | None:
        rec = self.intimacy.get(friend)
        if rec is None or rec.state is not PeerState.FRIEND or rec.share_done:
            return None
        rec.share_done = True
        self.exposing[friend] = ShareSession(self.id, friend)
        pkt = Packet(self.ids(), MessageKind.SHARE_REQUEST, self.id, friend,
                     self.params.data_ttl, SHARE_REQUEST_BITS, self.now)
        self.route_packet(pkt)
        return pkt

    def on_undeliverable(self, pkt: Packet):
        if pkt.kind is MessageKind.SHARE_REQUEST and pkt.src == self.id:
            s = self.exposing.get(pkt.dst)
            if s is not None and s.phase is SharePhase.REQUESTED:
                s.move(SharePhase.REJECTED)
                self._log(s)

    def on_share_consent(self, pkt: Packet):
        s = self.exposing.get(pkt.src)
        if s is None or s.phase is not SharePhase.REQUESTED:
            self.drop(pkt)
            return
        if not pkt.payload.accept:
            s.move(SharePhase.REJECTED)
            self._log(s)
            return
        s.move(SharePhase.CONSENTED)
        self.on_share_consent_accept(s)

    def on_share_consent_accept(self, s: ShareSession):
        p = self.params
        live = self.cache.valid_entries(self.now)
        s.quota = math.ceil(p.share_fraction * len(live))
        candidates = sorted((e.route for e in live
                             if e.route.dest != s.sender and e.route.next_hop != s.sender),
                            key=lambda r: (r.hop_count, r.dest))
        s.pending = candidates[:s.quota]
        if not s.pending:
            s.move(SharePhase.DONE)
            self._log(s)
            return
        s.move(SharePhase.STREAMING)
        self._send_batch(s)

    def _send_batch(self, s: ShareSession):
        p = self.params
        chunk, s.pending = s.pending[:p.batch_size], s.pending[p.batch_size:]
        s.routes_sent += len(chunk)
        last = not s.pending
        pkt = Packet(self.ids(), MessageKind.SHARE_BATCH, self.id, s.sender, p.data_ttl,
                     BATCH_HEADER_BITS + ROUTE_BITS * len(chunk), self.now,
                     payload=Batch(tuple(chunk), last))
        self.route_packet(pkt)
        if last:
            s.move(SharePhase.DONE)
            self._log(s)
        else:
            self.sim.set_timer(self.id, p.batch_interval, "share_batch", s.sender)

    def _timer_share_batch(self, sender):
        s = self.exposing.get(sender)
        if s is not None and s.phase is SharePhase.STREAMING:
            self._send_batch(s)

    def on_satiated(self, pkt: Packet):
        s = self.exposing.get(pkt.src)
        if s is not None and s.phase is SharePhase.STREAMING:
            s.move(SharePhase.SATIATED)
            s.pending = []
            self._log(s)

    def on_gratis_reply(self, pkt: Packet, prev: int) -> Route | None:
        g = pkt.payload
        if g.dest == self.id:
            return None
        route = self._route(g.dest, prev, pkt.hops_traversed + 1 + g.hop_count,
                            g.discovered_at, g.earmark)
        # installed even when nothing (or only an expired entry) was held
        self.install(route, "gratis")
        return route

    def _log(self, s: ShareSession):
        self.share_log.append(ShareRecord(self.now, s.receiver, s.sender, s.routes_sent,
                                          s.phase.value))

    # -- acquirer side -----------------------------------------------------

    def pending_queue(self) -> int:
        return len(self.buffer)

    def on_share_request(self, pkt: Packet) -> bool:
        p = self.params
        accept = (self.sim.energy[self.id].residual >= p.e_min
                  and self.pending_queue() <= p.q_max)
        s = ShareSession(pkt.src, self.id)
        s.move(SharePhase.CONSENTED if accept else SharePhase.REJECTED)
        self.acquiring[pkt.src] = s
        reply = Packet(self.ids(), MessageKind.SHARE_CONSENT, self.id, pkt.src,
                       p.data_ttl, SHARE_CONSENT_BITS, self.now, payload=Consent(accept))
        self.route_packet(reply)
        return accept

    def _shared_view(self, r: Route, prev: int, hops_to_exposer: int) -> Route:
        return Route(r.dest, prev, hops_to_exposer + r.hop_count, r.discovered_at, r.earmark)

    def on_share_batch(self, pkt: Packet, prev: int):
        s = self.acquiring.get(pkt.src)
        if s is None or s.phase not in (SharePhase.CONSENTED, SharePhase.STREAMING):
            self.drop(pkt)
            return
        if s.phase is SharePhase.CONSENTED:
            s.move(SharePhase.STREAMING)
        batch: Batch = pkt.payload
        gained = 0
        for r in batch.routes:
            if r.dest == self.id:
                continue
            s.routes_sent += 1
            mine = self._shared_view(r, prev, pkt.hops_traversed + 1)
            e = self.lookup(r.dest)
            if e is None:
                self.install(mine, "shared")
                gained += 1
            elif fresher(e.route, mine) is mine:
                self.install(mine, "shared")
                gained += 1
            elif e.route.earmark < r.earmark:
                self._gratis(pkt.src, e.route)
        if batch.last:
            s.move(SharePhase.DONE)
        elif gained == 0 or len(self.cache) >= self.cache.capacity:
            s.move(SharePhase.SATIATED)
            msg = Packet(self.ids(), MessageKind.SATIATED, self.id, pkt.src,
                         self.params.data_ttl, SATIATED_BITS, self.now)
            self.route_packet(msg)

    def _gratis(self, exposer: int, own: Route):
        self.gratis_sent += 1
        pkt = Packet(self.ids(), MessageKind.GRATIS_REPLY, self.id, exposer,
                     self.params.data_ttl, GRATIS_BITS, self.now,
                     payload=Gratis(own.dest, own.hop_count, own.discovered_at, own.earmark))
        self.route_packet(pkt)

    # -- dispatch ----------------------------------------------------------

    def on_control(self, pkt: Packet, prev: int):
        kind = pkt.kind
        if kind is MessageKind.SHARE_REQUEST:
            self.on_share_request(pkt)
        elif kind is MessageKind.SHARE_CONSENT:
            self.on_share_consent(pkt)
        elif kind is MessageKind.SHARE_BATCH:
            self.on_share_batch(pkt, prev)
        elif kind is MessageKind.SATIATED:
            self.on_satiated(pkt)
        elif kind is MessageKind.GRATIS_REPLY:
            self.on_gratis_reply(pkt, prev)
        else:
            self.drop(pkt)

    def on_transit(self, pkt: Packet, prev: int):
        if pkt.kind is MessageKind.SHARE_BATCH:
            # relays on the path keep the offered routes they lack
            hops = pkt.hops_traversed + 1
            for r in pkt.payload.routes:
                if r.dest != self.id and self.lookup(r.dest) is None:
                    self.install(self._shared_view(r, prev, hops), "shared")
        super().on_transit(pkt, prev)
