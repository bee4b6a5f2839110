"""The six evaluation metrics, computed purely from a trace.

A metric with nothing to measure (no originations, no deliveries) is
``None`` rather than zero. Duplicate arrivals of one data packet at its
destination count once, and the first arrival defines its delay.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .trace import GEN, RX, TX, Trace

DATA = "Data"

REPORT_COLUMNS = ("protocol", "n_nodes", "seed", "pdr", "mean_delay_s", "throughput_bps",
                  "jitter_s", "mean_energy_consumed_j", "nco", "data_sent",
                  "data_delivered", "control_tx", "status")


@dataclass
class Deliveries:
    created: dict[int, float]
    flow: dict[int, int | None]
    size: dict[int, int]
    first_rx: dict[int, float]


def _deliveries(trace: Trace) -> Deliveries:
    created, flow, size, first = {}, {}, {}, {}
    for e in trace:
        if e.pkt_kind != DATA:
            continue
        if e.kind == GEN:
            created[e.pkt_id] = e.t
            flow[e.pkt_id] = e.flow_id
            size[e.pkt_id] = e.size_bits
        elif e.kind == RX and e.node == e.dst and e.pkt_id not in first:
            first[e.pkt_id] = e.t
    return Deliveries(created, flow, size, first)


def pdr(trace: Trace, _d: Deliveries | None = None) -> float | None:
    d = _d or _deliveries(trace)
    if not d.created:
        return None
    return sum(1 for p in d.first_rx if p in d.created) / len(d.created)


def mean_delay(trace: Trace, _d: Deliveries | None = None) -> float | None:
    d = _d or _deliveries(trace)
    delays = [d.first_rx[p] - d.created[p] for p in d.first_rx if p in d.created]
    return math.fsum(delays) / len(delays) if delays else None


def throughput(trace: Trace, duration: float, _d: Deliveries | None = None) -> float:
    if duration <= 0:
        raise ValueError("duration must be positive")
    d = _d or _deliveries(trace)
    return sum(d.size[p] for p in d.first_rx if p in d.size) / duration


def jitter(trace: Trace, _d: Deliveries | None = None) -> float | None:
    """Mean absolute difference of consecutive delays, averaged over flows."""
    d = _d or _deliveries(trace)
    per_flow = defaultdict(list)
    for p, t_rx in sorted(d.first_rx.items(), key=lambda kv: (kv[1], kv[0])):
        if p in d.created:
            per_flow[d.flow[p]].append(t_rx - d.created[p])
    flows = []
    for delays in per_flow.values():
        if len(delays) >= 3:
            diffs = [abs(b - a) for a, b in zip(delays, delays[1:])]
            flows.append(math.fsum(diffs) / len(diffs))
    return math.fsum(flows) / len(flows) if flows else None


def residuals(trace: Trace, initial_energy: float, n_nodes: int,
              tx_cost: float, rx_cost: float) -> list[float]:
    """Replay per-bit charges in trace order with the engine's arithmetic."""
    res = [initial_energy] * n_nodes
    for e in trace:
        if e.kind == TX:
            res[e.node] = max(0.0, res[e.node] - e.size_bits * tx_cost)
        elif e.kind == RX:
            res[e.node] = max(0.0, res[e.node] - e.size_bits * rx_cost)
    return res


def energy_report(trace: Trace, initial_energy: float, n_nodes: int,
                  tx_cost: float = 1e-6, rx_cost: float = 5e-7) -> float:
    """Mean joules consumed per node."""
    res = residuals(trace, initial_energy, n_nodes, tx_cost, rx_cost)
    return initial_energy - math.fsum(res) / n_nodes


def control_tx(trace: Trace, t_from: float = -math.inf, t_to: float = math.inf) -> int:
    return sum(1 for e in trace
               if e.kind == TX and e.pkt_kind != DATA and t_from <= e.t < t_to)


def nco(trace: Trace, _d: Deliveries | None = None) -> float | None:
    """Control transmissions (every hop counts) per delivered data packet."""
    d = _d or _deliveries(trace)
    delivered = sum(1 for p in d.first_rx if p in d.created)
    if delivered == 0:
        return None
    return control_tx(trace) / delivered


@dataclass
class MetricReport:
    pdr: float | None
    mean_delay_s: float | None
    throughput_bps: float
    jitter_s: float | None
    mean_energy_consumed_j: float
    nco: float | None
    data_sent: int = 0
    data_delivered: int = 0
    control_tx: int = 0
    counts: dict[str, int] = field(default_factory=dict)

    def values(self):
        return (self.pdr, self.mean_delay_s, self.throughput_bps, self.jitter_s,
                self.mean_energy_consumed_j, self.nco)


def report(trace: Trace, duration: float, initial_energy: float, n_nodes: int,
           tx_cost: float = 1e-6, rx_cost: float = 5e-7) -> MetricReport:
    d = _deliveries(trace)
    counts = Counter(e.pkt_kind for e in trace if e.kind == TX)
    return MetricReport(
        pdr(trace, d), mean_delay(trace, d), throughput(trace, duration, d), jitter(trace, d),
        energy_report(trace, initial_energy, n_nodes, tx_cost, rx_cost), nco(trace, d),
        data_sent=len(d.created),
        data_delivered=sum(1 for p in d.first_rx if p in d.created),
        control_tx=sum(v for k, v in counts.items() if k != DATA),
        counts=dict(sorted(counts.items())))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def report_row(protocol: str, n_nodes: int, seed: int, rep: MetricReport | None,
               status: str = "ok") -> list[str]:
    if rep is None:
        return [protocol, str(n_nodes), str(seed)] + [""] * 9 + [status]
    vals = rep.values() + (rep.data_sent, rep.data_delivered, rep.control_tx)
    return [protocol, str(n_nodes), str(seed)] + [_fmt(v) for v in vals] + [status]


def export_csv(rows, path=None) -> str:
    """Write report rows (from :func:`report_row`) under the fixed header."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow(r)
    text = buf.getvalue()
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    return text
