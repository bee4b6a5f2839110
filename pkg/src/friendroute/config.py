"""Scenario configuration: strict INI parsing, validation and echo.

Every omitted key takes a documented default; the resolved configuration
renders back to INI text (``config.echo``) that parses to an identical
config.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field

PROTOCOLS = ("flooding", "gridfsr", "friendshare")


class ConfigParseError(ValueError):
    def __init__(self, key: str, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}{where}: {message}")
        self.key = key
        self.line = line


@dataclass(frozen=True)
class FlowSpec:
    src: int
    dst: int
    rate_pps: float = 4.0
    payload_bits: int = 512
    start_s: float = 1.0
    end_s: float = 200.0

    def render(self) -> str:
        return (f"{self.src},{self.dst},{self.rate_pps!r},{self.payload_bits},"
                f"{self.start_s!r},{self.end_s!r}")


@dataclass(frozen=True)
class TopologyConfig:
    nodes: int = 50
    area_x: float = 1000.0
    area_y: float = 1000.0
    placement: str = "grid"
    range_m: float = 250.0


@dataclass(frozen=True)
class MobilityConfig:
    model: str = "static"
    v_min: float = 1.0
    v_max: float = 5.0
    pause_s: float = 0.0
    step_s: float = 1.0


@dataclass(frozen=True)
class TrafficConfig:
    flows: tuple[FlowSpec, ...] = ()
    # pairs drawn from the scenario seed; used when no flows are listed
    random_pairs: int = 10
    rate_pps: float = 4.0
    payload_bits: int = 512
    start_s: float = 1.0
    end_s: float = 0.0  # 0 runs flows to the end of the simulation


@dataclass(frozen=True)
class ProtocolConfig:
    name: str = "friendshare"
    timeout_period: float = 30.0
    ifthres: float = 4.0
    k: float = 1.0
    share_fraction: float = 0.5
    batch_size: int = 4
    ttl_max: str = "auto"  # or an integer hop count; auto = hop diameter
    e_min: float = 0.05
    q_max: int = 16
    cache_capacity: int = 64
    buffer_size: int = 64
    burst_gap: float = 0.5
    batch_interval: float = 0.01
    scope_radius: int = 2
    period_inner: float = 5.0
    period_outer: float = 15.0
    ls_max_entries: int = 32
    cell_size: str = "auto"  # or metres; auto = range_m / sqrt(5)
    gateway_filter: bool = True


@dataclass(frozen=True)
class EnergyConfig:
    initial_j: float = 100.0
    tx_cost: float = 1e-6
    rx_cost: float = 5e-7


@dataclass(frozen=True)
class SimConfig:
    duration_s: float = 200.0
    seed: int = 1
    latency_s: float = 0.002
    jitter_s: float = 0.003
    purge_interval_s: float = 1.0


SECTIONS = {
    "topology": TopologyConfig,
    "mobility": MobilityConfig,
    "traffic": TrafficConfig,
    "protocol": ProtocolConfig,
    "energy": EnergyConfig,
    "sim": SimConfig,
}


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologyConfig = TopologyConfig()
    mobility: MobilityConfig = MobilityConfig()
    traffic: TrafficConfig = TrafficConfig()
    protocol: ProtocolConfig = ProtocolConfig()
    energy: EnergyConfig = EnergyConfig()
    sim: SimConfig = SimConfig()
    defaulted: tuple[str, ...] = field(default=(), compare=False)

    def with_changes(self, **sections) -> ScenarioConfig:
        """Replace fields per section, e.g. ``topology={"nodes": 75}``."""
        out = {}
        for name, changes in sections.items():
            out[name] = dataclasses.replace(getattr(self, name), **changes)
        cfg = dataclasses.replace(self, **out)
        validate(cfg)
        return cfg


# -- parsing ----------------------------------------------------------------

def _line_index(text: str) -> dict[tuple[str, str], int]:
    idx, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            idx.setdefault((section, ""), no)
            continue
        m = re.match(r"([A-Za-z_][\w]*)\s*[=:]", line)
        if m and section is not None and not raw[:1].isspace():
            idx.setdefault((section, m.group(1).lower()), no)
    return idx


def _convert(key: str, raw: str, default, line):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigParseError(key, f"cannot read {raw!r} as {type(default).__name__}", line)
    return raw


def _parse_flows(key: str, raw: str, line) -> tuple[FlowSpec, ...]:
    flows = []
    for part in re.split(r"[;\n]", raw):
        part = part.strip()
        if not part:
            continue
        bits = [b.strip() for b in part.split(",")]
        if len(bits) != 6:
            raise ConfigParseError(key, f"flow {part!r} needs src,dst,rate_pps,payload_bits,start_s,end_s", line)
        try:
            flows.append(FlowSpec(int(bits[0]), int(bits[1]), float(bits[2]), int(bits[3]),
                                  float(bits[4]), float(bits[5])))
        except ValueError:
            raise ConfigParseError(key, f"malformed flow {part!r}", line)
    return tuple(flows)


def parse_config(source: str) -> ScenarioConfig:
    """Parse INI text (or a path to an INI file) into a validated config."""
    text = source
    if "\n" not in source and "[" not in source:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    lines = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError("config", str(exc).splitlines()[0],
                               getattr(exc, "lineno", None)) from None
    built, defaulted = {}, []
    for section in cp.sections():
        if section.lower() not in SECTIONS:
            raise ConfigParseError(section, "unknown section", lines.get((section.lower(), "")))
    for name, cls in SECTIONS.items():
        proto = cls()
        known = {f.name for f in dataclasses.fields(cls)}
        values = {}
        items = dict(cp.items(name)) if cp.has_section(name) else {}
        for key, raw in items.items():
            line = lines.get((name, key))
            dotted = f"{name}.{key}"
            if key not in known:
                raise ConfigParseError(dotted, "unknown key", line)
            if name == "traffic" and key == "flows":
                values[key] = _parse_flows(dotted, raw, line)
            else:
                values[key] = _convert(dotted, raw, getattr(proto, key), line)
        for f in dataclasses.fields(cls):
            if f.name not in values:
                defaulted.append(f"{name}.{f.name}")
        built[name] = (cls(**values), items)
    traffic = built["traffic"][0]
    if traffic.flows and "random_pairs" not in built["traffic"][1]:
        built["traffic"] = (dataclasses.replace(traffic, random_pairs=0), built["traffic"][1])
    cfg = ScenarioConfig(**{k: v[0] for k, v in built.items()}, defaulted=tuple(defaulted))
    validate(cfg, lines)
    return cfg


def _require(ok, key, message, lines):
    if not ok:
        sec, _, k = key.partition(".")
        raise ConfigParseError(key, message, (lines or {}).get((sec, k)))


def validate(cfg: ScenarioConfig, lines=None):
    t, m, tr, p, e, s = cfg.topology, cfg.mobility, cfg.traffic, cfg.protocol, cfg.energy, cfg.sim
    req = lambda ok, key, msg: _require(ok, key, msg, lines)  # noqa: E731
    req(t.nodes >= 1, "topology.nodes", "must be >= 1")
    req(t.area_x > 0, "topology.area_x", "must be positive")
    req(t.area_y > 0, "topology.area_y", "must be positive")
    req(t.range_m > 0, "topology.range_m", "must be positive")
    req(t.placement in ("grid", "uniform"), "topology.placement", "must be grid or uniform")
    req(m.model in ("static", "waypoint"), "mobility.model", "must be static or waypoint")
    req(m.v_min > 0, "mobility.v_min", "must be positive")
    req(m.v_max >= m.v_min, "mobility.v_max", "must be >= v_min")
    req(m.pause_s >= 0, "mobility.pause_s", "must be nonnegative")
    req(m.step_s > 0, "mobility.step_s", "must be positive")
    req(tr.random_pairs >= 0, "traffic.random_pairs", "must be nonnegative")
    req(tr.random_pairs == 0 or t.nodes >= 2, "traffic.random_pairs", "needs at least 2 nodes")
    req(tr.rate_pps > 0, "traffic.rate_pps", "must be positive")
    req(tr.payload_bits > 0, "traffic.payload_bits", "must be positive")
    req(tr.start_s >= 0, "traffic.start_s", "must be nonnegative")
    req(tr.end_s >= 0, "traffic.end_s", "must be nonnegative")
    for f in tr.flows:
        req(0 <= f.src < t.nodes and 0 <= f.dst < t.nodes, "traffic.flows",
            f"flow {f.render()} references a node outside 0..{t.nodes - 1}")
        req(f.src != f.dst, "traffic.flows", f"flow {f.render()} sends to itself")
        req(f.rate_pps > 0 and f.payload_bits > 0, "traffic.flows",
            f"flow {f.render()} needs positive rate and payload")
        req(0 <= f.start_s < f.end_s, "traffic.flows", f"flow {f.render()} needs 0 <= start < end")
    req(p.name in PROTOCOLS, "protocol.name", f"must be one of {', '.join(PROTOCOLS)}")
    for key in ("timeout_period", "ifthres", "k", "share_fraction", "batch_size", "e_min",
                "q_max", "cache_capacity", "buffer_size", "burst_gap", "batch_interval",
                "scope_radius", "period_inner", "period_outer", "ls_max_entries"):
        req(getattr(p, key) > 0, f"protocol.{key}", "must be positive")
    req(p.share_fraction <= 1, "protocol.share_fraction", "must be <= 1")
    req(p.period_inner < p.period_outer, "protocol.period_inner", "must be < period_outer")
    req(p.ttl_max == "auto" or (p.ttl_max.isdigit() and int(p.ttl_max) >= 1),
        "protocol.ttl_max", "must be auto or an integer >= 1")
    req(p.cell_size == "auto" or _positive_float(p.cell_size), "protocol.cell_size",
        "must be auto or a positive number")
    req(e.initial_j > 0, "energy.initial_j", "must be positive")
    req(e.tx_cost > 0, "energy.tx_cost", "must be positive")
    req(e.rx_cost > 0, "energy.rx_cost", "must be positive")
    req(s.duration_s > 0, "sim.duration_s", "must be positive")
    req(s.seed >= 0, "sim.seed", "must be nonnegative")
    req(s.latency_s > 0, "sim.latency_s", "must be positive")
    req(s.jitter_s >= 0, "sim.jitter_s", "must be nonnegative")
    req(s.purge_interval_s > 0, "sim.purge_interval_s", "must be positive")


def _positive_float(raw: str) -> bool:
    try:
        return float(raw) > 0
    except ValueError:
        return False


# -- echo -------------------------------------------------------------------

def _render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return "; ".join(f.render() for f in v)
    return str(v)


def render_config(cfg: ScenarioConfig) -> str:
    out = ["# resolved scenario configuration"]
    if cfg.defaulted:
        out.append("# defaults applied: " + ", ".join(cfg.defaulted))
    out.append("# nco counts every non-Data protocol transmission per hop; "
               "MAC/ARP control frames are not simulated")
    for name in SECTIONS:
        sec = getattr(cfg, name)
        out.append("")
        out.append(f"[{name}]")
        for f in dataclasses.fields(sec):
            out.append(f"{f.name} = {_render_value(getattr(sec, f.name))}")
    return "\n".join(out) + "\n"
