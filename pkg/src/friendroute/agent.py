"""Per-node protocol agent contract used by the engine."""
from __future__ import annotations

from .core import MessageKind, Packet, PacketIds
from .trace import DROP, GEN


class Agent:
    """One node's protocol instance.

    The engine calls :meth:`start` once, :meth:`on_receive` for every
    delivered packet and :meth:`on_timer` for timers the agent set.
    """

    name = "base"

    def __init__(self, node_id: int, sim, ids: PacketIds, t_ref: float):
        self.id = node_id
        self.sim = sim
        self.ids = ids
        self.t_ref = t_ref
        self.trace = sim.trace

    @property
    def now(self) -> float:
        return self.sim.now

    def start(self):
        pass

    def on_receive(self, pkt: Packet, prev_hop: int):
        raise NotImplementedError

    def on_timer(self, name: str, data):
        getattr(self, f"_timer_{name}")(data)

    def drop(self, pkt: Packet):
        self.trace.packet(self.now, DROP, self.id, pkt)

    def originate_data(self, dst: int, flow_id: int, size_bits: int, ttl: int = 64) -> Packet:
        pkt = Packet(self.ids(), MessageKind.DATA, self.id, dst, ttl, size_bits,
                     self.now, flow_id=flow_id)
        self.trace.packet(self.now, GEN, self.id, pkt)
        self.send_data(pkt)
        return pkt

    def send_data(self, pkt: Packet):
        raise NotImplementedError

    def purge_expired(self, now: float) -> int:
        return 0
