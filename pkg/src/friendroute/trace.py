"""Append-only event trace and its line-oriented CSV form."""
from __future__ import annotations

import csv
import io
from typing import Iterable, Iterator, NamedTuple

COLUMNS = ("t", "kind", "node", "pkt_id", "pkt_kind", "src", "dst", "ttl",
           "size_bits", "flow_id")

# event kinds
TX = "Tx"
RX = "Rx"
DROP = "Drop"
EXPIRE = "Expire"
STATE_CHANGE = "StateChange"
ENERGY_DEAD = "EnergyDead"
# application origination of a data packet, before any transmission
GEN = "Gen"

KINDS = (TX, RX, DROP, EXPIRE, STATE_CHANGE, ENERGY_DEAD, GEN)


class TraceEvent(NamedTuple):
    t: float
    kind: str
    node: int
    pkt_id: int = -1
    pkt_kind: str = ""
    src: int = -1
    dst: int = -1
    ttl: int = -1
    size_bits: int = 0
    flow_id: int | None = None


class TraceError(ValueError):
    pass


class Trace:
    """Single-writer event log with nondecreasing timestamps."""

    def __init__(self, events: Iterable[TraceEvent] = ()):
        self.events: list[TraceEvent] = []
        for ev in events:
            self.append(ev)

    def append(self, ev: TraceEvent):
        # stored at file precision so a persisted trace reloads bit-exactly
        ev = ev._replace(t=float(f"{ev.t:.6f}"))
        if self.events and ev.t < self.events[-1].t:
            raise TraceError(f"trace time went backwards: {ev.t} < {self.events[-1].t}")
        self.events.append(ev)

    def packet(self, t, kind, node, pkt):
        self.append(TraceEvent(t, kind, node, pkt.pkt_id, pkt.kind.value, pkt.src,
                               pkt.dst, pkt.ttl, pkt.size_bits, pkt.flow_id))

    def note(self, t, kind, node, **fields):
        self.append(TraceEvent(t, kind, node, **fields))

    def __len__(self):
        return len(self.events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def of(self, kind=None, pkt_kind=None) -> list[TraceEvent]:
        return [e for e in self.events
                if (kind is None or e.kind == kind)
                and (pkt_kind is None or e.pkt_kind == pkt_kind)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for e in self.events:
            w.writerow((f"{e.t:.6f}", e.kind, e.node, e.pkt_id, e.pkt_kind, e.src,
                        e.dst, e.ttl, e.size_bits,
                        "" if e.flow_id is None else e.flow_id))
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> Trace:
        rows = csv.reader(io.StringIO(text))
        header = next(rows, None)
        if tuple(header or ()) != COLUMNS:
            raise TraceError(f"unexpected trace header: {header}")
        out = cls()
        for r in rows:
            out.append(TraceEvent(float(r[0]), r[1], int(r[2]), int(r[3]), r[4],
                                  int(r[5]), int(r[6]), int(r[7]), int(r[8]),
                                  int(r[9]) if r[9] else None))
        return out

    @classmethod
    def read(cls, path) -> Trace:
        with open(path, encoding="utf-8") as fh:
            return cls.from_csv(fh.read())
