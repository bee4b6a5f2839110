"""Turn a ScenarioConfig into a running simulation."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from . import metrics
from .config import FlowSpec, ScenarioConfig
from .core import PacketIds
from .engine import (Simulator, WaypointMobility, adjacency, hop_diameter, place_grid,
                     place_uniform)
from .friendshare import FriendShareAgent
from .fsr import GridFsrAgent, GridOverlay, ScopeConfig
from .reactive import FloodingAgent, ProtocolParams
from .trace import EXPIRE, Trace


def protocol_params(cfg: ScenarioConfig, ttl_max: int) -> ProtocolParams:
    p = cfg.protocol
    return ProtocolParams(
        timeout_period=p.timeout_period, ifthres=p.ifthres, k=p.k,
        share_fraction=p.share_fraction, batch_size=p.batch_size, ttl_max=ttl_max,
        e_min=p.e_min, q_max=p.q_max, cache_capacity=p.cache_capacity,
        buffer_size=p.buffer_size, burst_gap=p.burst_gap, batch_interval=p.batch_interval)


def scope_config(cfg: ScenarioConfig) -> ScopeConfig:
    p = cfg.protocol
    return ScopeConfig(p.scope_radius, p.period_inner, p.period_outer, p.ls_max_entries)


def resolve_flows(cfg: ScenarioConfig, rng: random.Random) -> list[FlowSpec]:
    tr, duration = cfg.traffic, cfg.sim.duration_s
    end = tr.end_s if tr.end_s > 0 else duration
    flows = list(tr.flows)
    n = cfg.topology.nodes
    for _ in range(tr.random_pairs):
        src = rng.randrange(n)
        dst = rng.randrange(n - 1)
        if dst >= src:
            dst += 1
        flows.append(FlowSpec(src, dst, tr.rate_pps, tr.payload_bits, tr.start_s, end))
    return flows


@dataclass
class RunResult:
    config: ScenarioConfig
    protocol: str
    sim: Simulator
    agents: list
    flows: list[FlowSpec]
    trace: Trace
    ttl_max: int
    purge_packet_events: int = 0
    report: metrics.MetricReport | None = None


class Scenario:
    """One configured network, ready to run once."""

    def __init__(self, cfg: ScenarioConfig, protocol: str | None = None, positions=None):
        self.cfg = cfg
        self.protocol = protocol or cfg.protocol.name
        t = cfg.topology
        rng = random.Random(cfg.sim.seed)
        if positions is None:
            if t.placement == "grid":
                positions = place_grid(t.nodes, t.area_x, t.area_y)
            else:
                positions = place_uniform(t.nodes, t.area_x, t.area_y, rng)
        self.flows = resolve_flows(cfg, rng)
        m = cfg.mobility
        mobility = None
        if m.model == "waypoint":
            mobility = WaypointMobility(t.area_x, t.area_y, m.v_min, m.v_max, m.pause_s, m.step_s)
        e = cfg.energy
        self.sim = Simulator(positions, t.range_m, area=(t.area_x, t.area_y), rng=rng,
                             latency=cfg.sim.latency_s, jitter=cfg.sim.jitter_s,
                             initial_energy=e.initial_j, tx_cost=e.tx_cost, rx_cost=e.rx_cost,
                             mobility=mobility)
        p = cfg.protocol
        self.ttl_max = (max(1, hop_diameter(adjacency(positions, t.range_m)))
                        if p.ttl_max == "auto" else int(p.ttl_max))
        self.ids = PacketIds()
        t_ref = cfg.sim.duration_s
        self.agents = [self._make_agent(i, t_ref) for i in range(t.nodes)]
        self.sim.agents = self.agents
        self.purge_packet_events = 0
        self._ran = False

    def _make_agent(self, i, t_ref):
        name = self.protocol
        if name == "flooding":
            return FloodingAgent(i, self.sim, self.ids, t_ref, protocol_params(self.cfg, self.ttl_max))
        if name == "friendshare":
            return FriendShareAgent(i, self.sim, self.ids, t_ref,
                                    protocol_params(self.cfg, self.ttl_max))
        if name == "gridfsr":
            if not hasattr(self, "overlay"):
                cs = self.cfg.protocol.cell_size
                size = self.cfg.topology.range_m / math.sqrt(5) if cs == "auto" else float(cs)
                self.overlay = GridOverlay(self.sim, size)
            return GridFsrAgent(i, self.sim, self.ids, t_ref, scope_config(self.cfg),
                                self.overlay, self.cfg.protocol.gateway_filter)
        raise ValueError(f"unknown protocol {name!r}")

    # -- traffic and housekeeping -------------------------------------------

    def _schedule_flow(self, flow_id: int, f: FlowSpec, i: int = 0):
        t = f.start_s + i / f.rate_pps
        if t >= f.end_s or t > self.cfg.sim.duration_s:
            return

        def fire():
            self.agents[f.src].originate_data(f.dst, flow_id, f.payload_bits)
            self._schedule_flow(flow_id, f, i + 1)
        self.sim.call_at(t, fire)

    def _schedule_purge(self, t):
        if t > self.cfg.sim.duration_s:
            return

        def sweep():
            before = len(self.sim.trace)
            for a in self.agents:
                a.purge_expired(self.sim.now)
            self.purge_packet_events += sum(
                1 for ev in self.sim.trace.events[before:] if ev.kind != EXPIRE)
            self._schedule_purge(t + self.cfg.sim.purge_interval_s)
        self.sim.call_at(t, sweep)

    def run(self, until: float | None = None) -> RunResult:
        if not self._ran:
            self._ran = True
            for fid, f in enumerate(self.flows):
                self._schedule_flow(fid, f)
            self._schedule_purge(self.cfg.sim.purge_interval_s)
        duration = self.cfg.sim.duration_s
        self.sim.run_until(duration if until is None else until)
        e = self.cfg.energy
        rep = metrics.report(self.sim.trace, duration, e.initial_j, len(self.agents),
                             e.tx_cost, e.rx_cost)
        return RunResult(self.cfg, self.protocol, self.sim, self.agents, self.flows,
                         self.sim.trace, self.ttl_max, self.purge_packet_events, rep)


def run_scenario(cfg: ScenarioConfig, protocol: str | None = None) -> RunResult:
    return Scenario(cfg, protocol).run()
