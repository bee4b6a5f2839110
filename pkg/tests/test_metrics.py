import math

import pytest

from friendroute import metrics
from friendroute.core import MessageKind, Packet
from friendroute.engine import Simulator
from friendroute.trace import GEN, RX, TX, Trace, TraceError, TraceEvent


def gen(t, pid, flow=0, size=1000, src=0, dst=1):
    return TraceEvent(t, GEN, src, pid, "Data", src, dst, 64, size, flow)


def rx(t, pid, flow=0, size=1000, node=1, src=0):
    return TraceEvent(t, RX, node, pid, "Data", src, node, 63, size, flow)


def ctl(t, node=0, kind="RouteRequest"):
    return TraceEvent(t, TX, node, 10_000 + int(t * 1000), kind, node, 1, 1, 192)


def flow_trace(delays, flow=0, pid0=0, trace=None):
    tr = trace if trace is not None else []
    for i, d in enumerate(delays):
        tr.append(gen(float(i), pid0 + i, flow))
        tr.append(rx(i + d, pid0 + i, flow))
    return tr


def tr(events):
    return Trace(sorted(events, key=lambda e: e.t))


def test_pdr_examples():
    ev = [gen(0, i) for i in range(10)] + [rx(1, i) for i in range(8)]
    assert metrics.pdr(tr(ev)) == 0.8
    ev += [rx(2, 0), rx(2, 1), rx(2, 2)]
    assert metrics.pdr(tr(ev)) == 0.8
    assert metrics.pdr(tr([gen(0, 0), rx(1, 0)])) == 1.0
    assert metrics.pdr(tr([])) is None


def test_rx_at_relay_is_not_a_delivery():
    ev = [gen(0, 0), TraceEvent(0.5, RX, 7, 0, "Data", 0, 1, 63, 1000, 0)]
    assert metrics.pdr(tr(ev)) == 0.0


def test_mean_delay_examples():
    assert metrics.mean_delay(tr(flow_trace([0.1, 0.3]))) == pytest.approx(0.2)
    assert metrics.mean_delay(tr(flow_trace([0.05]))) == pytest.approx(0.05)
    assert metrics.mean_delay(tr(flow_trace([1.01]))) == pytest.approx(1.01)
    assert metrics.mean_delay(tr([gen(0, 0)])) is None


def test_first_arrival_defines_delay():
    ev = [gen(0, 0), rx(0.2, 0), rx(0.9, 0)]
    assert metrics.mean_delay(tr(ev)) == pytest.approx(0.2)


def test_throughput_examples():
    ev = [gen(0, i) for i in range(10)] + [rx(1, i) for i in range(8)] + [rx(2, 0)]
    assert metrics.throughput(tr(ev), 10) == 800
    assert metrics.throughput(tr([gen(0, 0)]), 10) == 0
    with pytest.raises(ValueError):
        metrics.throughput(tr([]), 0)


def test_jitter_examples():
    assert metrics.jitter(tr(flow_trace([0.1, 0.1, 0.1]))) == pytest.approx(0, abs=1e-12)
    assert metrics.jitter(tr(flow_trace([0.1, 0.2, 0.1]))) == pytest.approx(0.1)
    two = flow_trace([0.1, 0.2, 0.1]) + flow_trace([0.1, 0.4, 0.1], flow=1, pid0=100)
    assert metrics.jitter(tr(two)) == pytest.approx(0.2)
    assert metrics.jitter(tr(flow_trace([0.1, 0.2]))) is None


def test_energy_examples():
    assert metrics.energy_report(tr([]), 1.0, 4) == 0
    sim = Simulator([(0, 0), (10, 0), (-10, 0), (0, 10)], 10, initial_energy=1.0,
                    tx_cost=1e-6, rx_cost=1e-6)
    sim.transmit(Packet(1, MessageKind.DATA, 0, 1, 4, 1000, 0.0), 0)
    sim.run_until(1)
    used = metrics.energy_report(sim.trace, 1.0, 4, 1e-6, 1e-6)
    assert used == pytest.approx(1e-3)
    engine = [e.residual for e in sim.energy]
    assert metrics.residuals(sim.trace, 1.0, 4, 1e-6, 1e-6) == engine


def test_nco_examples():
    ev = [ctl(0.001 * i) for i in range(40)]
    ev += [gen(1, i) for i in range(20)] + [rx(2, i) for i in range(20)]
    assert metrics.nco(tr(ev)) == 2.0
    assert metrics.nco(tr(flow_trace([0.1]))) == 0
    assert metrics.nco(tr([ctl(0)])) is None


def test_multi_hop_reply_counts_each_hop():
    ev = [ctl(0.1, n, "RouteReply") for n in (3, 2, 1)] + flow_trace([0.5])
    assert metrics.control_tx(tr(ev)) == 3


def test_report_row_and_csv():
    rep = metrics.report(tr(flow_trace([0.1, 0.2, 0.1])), 10.0, 1.0, 2)
    row = metrics.report_row("friendshare", 2, 1, rep)
    text = metrics.export_csv([row])
    lines = text.splitlines()
    assert len(lines) == 2 and lines[0] == ",".join(metrics.REPORT_COLUMNS)
    assert lines[1].startswith("friendshare,2,1,1.000000,")
    rows = [metrics.report_row(p, n, 1, rep) for p in "abc" for n in (50, 75, 100, 125, 150)]
    assert len(metrics.export_csv(rows).splitlines()) == 16


def test_failed_row_keeps_columns():
    row = metrics.report_row("gridfsr", 50, 3, None, "error: boom")
    assert len(row) == len(metrics.REPORT_COLUMNS) and row[-1] == "error: boom"


def test_export_unwritable_path(tmp_path):
    with pytest.raises(OSError, match="cannot write"):
        metrics.export_csv([], tmp_path / "missing" / "r.csv")


def test_trace_roundtrip_and_ordering():
    t = Trace()
    t.append(gen(0.1234567, 0))
    t.append(rx(0.5, 0))
    back = Trace.from_csv(t.to_csv())
    assert back.events == t.events and back[0].t == 0.123457
    with pytest.raises(TraceError):
        t.append(gen(0.2, 1))
    with pytest.raises(TraceError):
        Trace.from_csv("a,b\n")
