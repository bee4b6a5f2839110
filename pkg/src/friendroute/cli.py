"""Command line: run, sweep, compare, analyze, oracle.

Exit codes: 0 ok, 2 usage, 3 config parse, 4 runtime, 5 I/O.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import analytics, metrics
from .config import PROTOCOLS, ConfigParseError, ScenarioConfig, parse_config, render_config
from .scenario import run_scenario

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _csv_list(raw: str, kind=str) -> list:
    items = [x.strip() for x in raw.split(",") if x.strip()]
    if not items:
        raise UsageError("empty list")
    try:
        return [kind(x) for x in items]
    except ValueError:
        raise UsageError(f"bad list {raw!r}")


def _protocols(raw: str) -> list[str]:
    names = _csv_list(raw)
    bad = [n for n in names if n not in PROTOCOLS]
    if bad:
        raise UsageError(f"unknown protocol(s) {', '.join(bad)}; choose from {', '.join(PROTOCOLS)}")
    return names


def _load(path, seed=None) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    cfg = parse_config(text)
    if seed is not None:
        cfg = cfg.with_changes(sim={"seed": seed})
    return cfg


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _mkdir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {path}: {exc.strerror}") from exc


# -- commands ---------------------------------------------------------------

def cmd_run(cfg: ScenarioConfig, out_dir: str):
    res = run_scenario(cfg)
    _mkdir(out_dir)
    _write(os.path.join(out_dir, "trace.csv"), res.trace.to_csv())
    row = metrics.report_row(res.protocol, cfg.topology.nodes, cfg.sim.seed, res.report)
    metrics.export_csv([row], os.path.join(out_dir, "report.csv"))
    _write(os.path.join(out_dir, "config.echo"), render_config(cfg))
    return res


def _sweep_one(args):
    cfg, protocol, keep_dir = args
    try:
        res = run_scenario(cfg, protocol)
        if keep_dir:
            name = f"trace_{protocol}_n{cfg.topology.nodes}_s{cfg.sim.seed}.csv"
            _write(os.path.join(keep_dir, name), res.trace.to_csv())
        return metrics.report_row(protocol, cfg.topology.nodes, cfg.sim.seed, res.report)
    except Exception as exc:  # one bad run must not sink the sweep
        return metrics.report_row(protocol, cfg.topology.nodes, cfg.sim.seed, None,
                                  f"error: {type(exc).__name__}: {exc}")


def cmd_sweep(base: ScenarioConfig, nodes_list, protocols, trials: int, out_dir=None,
              keep_traces=False, jobs: int = 1):
    if not nodes_list or not protocols:
        raise UsageError("sweep needs at least one node count and one protocol")
    if trials < 1:
        raise UsageError("trials must be >= 1")
    tasks = []
    keep = None
    if out_dir:
        _mkdir(out_dir)
        keep = out_dir if keep_traces else None
    for n in nodes_list:
        for proto in protocols:
            for i in range(trials):
                cfg = base.with_changes(topology={"nodes": n}, protocol={"name": proto},
                                        sim={"seed": base.sim.seed + i})
                tasks.append((cfg, proto, keep))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    text = metrics.export_csv(rows, os.path.join(out_dir, "sweep.csv") if out_dir else None)
    return rows, text


METRIC_NAMES = ("pdr", "mean_delay_s", "throughput_bps", "jitter_s",
                "mean_energy_consumed_j", "nco")


def cmd_compare(cfg: ScenarioConfig, protocols) -> list[dict]:
    if len(protocols) < 2:
        raise UsageError("compare needs at least two protocols")
    reports = [(p, run_scenario(cfg, p).report) for p in protocols]
    base_name, base = reports[0]
    table = []
    for name, rep in reports:
        for metric, b, v in zip(METRIC_NAMES, base.values(), rep.values()):
            delta = pct = None
            if b is not None and v is not None:
                delta = v - b
                pct = 100.0 * delta / b if b != 0 else (0.0 if delta == 0 else None)
            table.append({"protocol": name, "baseline": base_name, "metric": metric,
                          "value": v, "delta": delta, "pct": pct})
    return table


def _f(v, width=12):
    if v is None:
        return "-".rjust(width)
    if isinstance(v, float) and math.isinf(v):
        return "inf".rjust(width)
    return f"{v:.6f}".rjust(width)


def cmd_analyze(T_n, K_n, U_n, E_n, T_out, T_avg, receiver_cache=None) -> str:
    try:
        inp = analytics.AnalyticsInput(T_n, K_n, U_n, E_n, T_out, T_avg)
    except analytics.DomainError as exc:
        raise UsageError(str(exc))
    tab = analytics.evaluate(inp, receiver_cache)

    def row(name, res):
        mark = " " if res.valid else "!"
        return f"{mark} {name:<8}{_f(res.value)}  {res.note}".rstrip()

    lines = [f"  {'T_c':<8}{tab.T_c:>12}", f"  {'K_n':<8}{tab.K_n:>12}"]
    if tab.rgr is not None:
        lines.append(f"  {'RGR':<8}{_f(tab.rgr)}")
    lines += [row("P_u", tab.P_u), row("P_e", tab.P_e), row("P", tab.P)]
    mark = " " if tab.P.valid else "!"
    lines += [f"{mark} {'lambda':<8}{_f(tab.lam)}", f"{mark} {'P(X=0)':<8}{_f(tab.p_none)}",
              f"{mark} {'T_e':<8}{_f(tab.T_e)}"]
    return "\n".join(lines) + "\n"


ORACLE_COLUMNS = ("T_n", "E_n", "T_c", "printed_P", "printed_valid", "printed_T_e",
                  "exact_p_any", "mc_p_any", "mc_p_any_se", "exact_mean", "mc_mean",
                  "mc_mean_se", "div_p", "div_mean", "mc_within_3se")


def oracle_row(T_n, U_n, E_n, T_out, T_avg, trials, seed, T_c=None) -> dict:
    inp = analytics.AnalyticsInput(T_n, 0, U_n, E_n, T_out, T_avg)
    tab = analytics.evaluate(inp)
    o = analytics.oracle_contact_model(inp, trials, seed, T_c=T_c)
    return {"T_n": T_n, "E_n": E_n, "T_c": inp.T_c if T_c is None else T_c,
            "printed_P": tab.P.value, "printed_valid": tab.P.valid, "printed_T_e": tab.T_e,
            "exact_p_any": o.exact_p_any, "mc_p_any": o.p_any_exposed,
            "mc_p_any_se": o.p_any_stderr, "exact_mean": o.exact_mean,
            "mc_mean": o.mean_exposed, "mc_mean_se": o.mean_stderr,
            "div_p": abs(tab.P.value - o.exact_p_any),
            "div_mean": abs(tab.T_e - o.exact_mean), "mc_within_3se": o.agrees(3.0)}


def oracle_csv(rows) -> str:
    out = [",".join(ORACLE_COLUMNS)]
    for r in rows:
        cells = []
        for c in ORACLE_COLUMNS:
            v = r[c]
            cells.append(f"{v:.6f}" if isinstance(v, float) else str(v).lower()
                         if isinstance(v, bool) else str(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def cmd_oracle(T_n, U_n, E_n, T_out, T_avg, trials, seed) -> str:
    try:
        row = oracle_row(T_n, U_n, E_n, T_out, T_avg, trials, seed)
    except analytics.DomainError as exc:
        raise UsageError(str(exc))
    return oracle_csv([row])


# -- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="friendroute",
                                 description="MANET flooding-reduction simulator and model")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("sweep", help="node-count x protocol x trial sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--nodes", default="50,75,100,125,150")
    p.add_argument("--protocols", default=",".join(PROTOCOLS))
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--keep-traces", action="store_true")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("compare", help="protocols side by side on one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--protocols", required=True)

    p = sub.add_parser("analyze", help="evaluate the probability model")
    for flag, typ in (("--tn", int), ("--kn", int), ("--un", int), ("--en", int),
                      ("--tout", float), ("--tavg", float)):
        p.add_argument(flag, type=typ, required=True)
    p.add_argument("--receiver-cache", type=int, help="receiver cache size, for RGR")

    p = sub.add_parser("oracle", help="model vs exact and Monte-Carlo contact model")
    for flag, typ in (("--tn", int), ("--un", int), ("--en", int), ("--tout", float),
                      ("--tavg", float)):
        p.add_argument(flag, type=typ, required=True)
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "run":
            res = cmd_run(_load(args.config, args.seed), args.out)
            print(metrics.export_csv([metrics.report_row(res.protocol, res.config.topology.nodes,
                                                         res.config.sim.seed, res.report)]),
                  end="")
        elif args.command == "sweep":
            _, text = cmd_sweep(_load(args.config), _csv_list(args.nodes, int),
                                _protocols(args.protocols), args.trials, args.out,
                                args.keep_traces, args.jobs)
            print(text, end="")
        elif args.command == "compare":
            table = cmd_compare(_load(args.config), _protocols(args.protocols))
            print(f"{'protocol':<12} {'metric':<24}{'value':>12}{'delta':>12}{'pct':>12}")
            for r in table:
                print(f"{r['protocol']:<12} {r['metric']:<24}{_f(r['value'])}"
                      f"{_f(r['delta'])}{_f(r['pct'])}")
        elif args.command == "analyze":
            print(cmd_analyze(args.tn, args.kn, args.un, args.en, args.tout, args.tavg,
                              args.receiver_cache), end="")
        elif args.command == "oracle":
            print(cmd_oracle(args.tn, args.un, args.en, args.tout, args.tavg,
                             args.trials, args.seed), end="")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
