"""Small hand-built networks for protocol tests."""
from friendroute.core import MessageKind, PacketIds, Route
from friendroute.engine import Simulator
from friendroute.friendshare import FriendShareAgent
from friendroute.reactive import ProtocolParams
from friendroute.trace import TX

T_REF = 1000.0


def network(positions, range_m=100.0, cls=FriendShareAgent, params=None, t_ref=T_REF,
            **sim_kw):
    sim = Simulator(positions, range_m, seed=sim_kw.pop("seed", 0), **sim_kw)
    ids = PacketIds()
    sim.agents = [cls(i, sim, ids, t_ref, params or ProtocolParams())
                  for i in range(len(positions))]
    return sim, sim.agents


def line(n, cls=FriendShareAgent, params=None, **kw):
    return network([(100.0 * i, 0.0) for i in range(n)], 100.0, cls, params, **kw)


def route(dest, next_hop, hops=1, discovered_at=0.0, earmark=None, t_ref=T_REF):
    if earmark is None:
        earmark = t_ref - discovered_at
    return Route(dest, next_hop, hops, discovered_at, earmark)


def txs(sim, kind: MessageKind, node=None):
    return [e for e in sim.trace
            if e.kind == TX and e.pkt_kind == kind.value and (node is None or e.node == node)]
