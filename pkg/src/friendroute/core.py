"""Domain types shared by the simulator and every protocol.

Routes, cache entries with a hard lifetime, intimacy counters and packets.
Times are plain floats in seconds; node ids are plain ints.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Any

BROADCAST = 0xFFFFFFFF

NodeId = int
SimTime = float


class ContractError(ValueError):
    """Raised when a caller breaks an operation's precondition."""


class MessageKind(str, enum.Enum):
    DATA = "Data"
    ROUTE_REQUEST = "RouteRequest"
    ROUTE_REPLY = "RouteReply"
    LINK_STATE = "LinkState"
    SHARE_REQUEST = "ShareRequest"
    SHARE_CONSENT = "ShareConsent"
    SHARE_BATCH = "ShareBatch"
    SATIATED = "Satiated"
    GRATIS_REPLY = "GratisReply"

    @property
    def is_control(self) -> bool:
        return self is not MessageKind.DATA


@dataclass(frozen=True)
class Route:
    dest: NodeId
    next_hop: NodeId
    hop_count: int
    discovered_at: SimTime
    earmark: float

    def __post_init__(self):
        if self.hop_count < 1:
            raise ContractError(f"hop_count must be >= 1, got {self.hop_count}")


def make_earmark(t_ref: SimTime, discovered_at: SimTime) -> float:
    """Freshness stamp of a route; smaller is fresher."""
    return t_ref - discovered_at


def make_route(dest, next_hop, hop_count, discovered_at, t_ref) -> Route:
    return Route(dest, next_hop, hop_count, discovered_at,
                 make_earmark(t_ref, discovered_at))


def _order_key(r: Route):
    return (r.earmark, r.hop_count, r.next_hop)


def fresher(a: Route, b: Route) -> Route:
    """Return the fresher of two routes to the same destination.

    Smaller earmark wins, then fewer hops, then the smaller next hop id; a
    full tie keeps ``a``.
    """
    if a.dest != b.dest:
        raise ContractError(f"routes to different destinations: {a.dest} vs {b.dest}")
    return b if _order_key(b) < _order_key(a) else a


@dataclass(frozen=True)
class CacheEntry:
    route: Route
    installed_at: SimTime
    expires_at: SimTime
    # how the entry was learned: reply, reverse, neighbor, shared, gratis
    origin: str = "reply"

    def __post_init__(self):
        if not self.expires_at > self.installed_at:
            raise ContractError("expires_at must be later than installed_at")


def is_expired(entry: CacheEntry, now: SimTime) -> bool:
    # boundary counts as expired
    return now >= entry.expires_at


class RouteCache:
    """Bounded per-node route cache keyed by destination.

    Entries die at their expiry time and are never refreshed by the cache
    itself. On overflow the entry closest to expiry is evicted.
    """

    def __init__(self, capacity: int = 64):
        if capacity < 1:
            raise ContractError("cache capacity must be >= 1")
        self.capacity = capacity
        self.entries: dict[NodeId, CacheEntry] = {}

    def __len__(self):
        return len(self.entries)

    def __contains__(self, dest):
        return dest in self.entries

    def peek(self, dest) -> CacheEntry | None:
        """Entry for ``dest`` regardless of expiry."""
        return self.entries.get(dest)

    def lookup(self, dest: NodeId, now: SimTime) -> CacheEntry | None:
        entry = self.entries.get(dest)
        if entry is None:
            return None
        if is_expired(entry, now):
            del self.entries[dest]
            return None
        return entry

    def install(self, route: Route, now: SimTime, timeout: float,
                origin: str = "reply") -> tuple[CacheEntry, CacheEntry | None]:
        """Install ``route`` with lifetime ``timeout``.

        Returns the new entry and the entry evicted to make room, if any.
        """
        entry = CacheEntry(route, now, now + timeout, origin)
        evicted = None
        if route.dest not in self.entries and len(self.entries) >= self.capacity:
            victim = min(self.entries.values(),
                         key=lambda e: (e.expires_at, e.route.dest))
            evicted = self.entries.pop(victim.route.dest)
        self.entries[route.dest] = entry
        return entry, evicted

    def invalidate(self, dest) -> CacheEntry | None:
        return self.entries.pop(dest, None)

    def purge(self, now: SimTime) -> list[CacheEntry]:
        """Drop every expired entry and return what was removed."""
        dead = [e for e in self.entries.values() if is_expired(e, now)]
        for e in dead:
            del self.entries[e.route.dest]
        return dead

    def valid_entries(self, now: SimTime) -> list[CacheEntry]:
        return [e for e in self.entries.values() if not is_expired(e, now)]


class PeerState(str, enum.Enum):
    STRANGER = "Stranger"
    FRIEND = "Friend"


@dataclass
class IntimacyRecord:
    """What a receiver knows about one peer that sends it data."""

    peer: NodeId
    k: float = 1.0
    packets_received: int = 0
    intimacy: float = 0.0
    state: PeerState = PeerState.STRANGER
    share_done: bool = False

    def observe(self, ifthres: float) -> bool:
        """Count one more packet; True when this packet promoted the peer."""
        self.packets_received += 1
        self.intimacy = self.k * self.packets_received
        if self.state is PeerState.STRANGER and self.intimacy > ifthres:
            self.state = PeerState.FRIEND
            return True
        return False


@dataclass(frozen=True)
class Packet:
    pkt_id: int
    kind: MessageKind
    src: NodeId
    dst: NodeId
    ttl: int
    size_bits: int
    created_at: SimTime
    hops_traversed: int = 0
    flow_id: int | None = None
    payload: Any = field(default=None, compare=False)

    def __post_init__(self):
        if self.ttl < 0 or self.hops_traversed < 0:
            raise ContractError("ttl and hops_traversed must be nonnegative")
        if self.size_bits <= 0:
            raise ContractError("size_bits must be positive")

    def forwarded(self) -> Packet:
        """Copy for the next hop: one less ttl, one more hop."""
        if self.ttl < 1:
            raise ContractError(f"packet {self.pkt_id} has no ttl left")
        return replace(self, ttl=self.ttl - 1, hops_traversed=self.hops_traversed + 1)


class PacketIds:
    """Per-scenario packet id allocator so runs do not share counters."""

    def __init__(self):
        self._next = 0

    def __call__(self) -> int:
        pid = self._next
        self._next += 1
        return pid
