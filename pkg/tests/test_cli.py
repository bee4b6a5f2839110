import csv
import io
import math

import pytest

from friendroute import cli
from friendroute.config import parse_config
from friendroute.metrics import REPORT_COLUMNS

SMALL = """\
[topology]
nodes = 16
area_x = 600
area_y = 600
range_m = 200

[traffic]
random_pairs = 3

[sim]
duration_s = 15
seed = 3
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(SMALL)
    return str(p)


def read_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_run_writes_three_files_and_is_deterministic(cfg_file, tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert cli.main(["run", "--config", cfg_file, "--out", str(d)]) == 0
        outs.append({f: (d / f).read_bytes() for f in ("trace.csv", "report.csv",
                                                         "config.echo")})
    assert outs[0] == outs[1]
    assert parse_config(outs[0]["config.echo"].decode()) == parse_config(SMALL)
    rows = read_rows(outs[0]["report.csv"].decode())
    assert len(rows) == 1 and rows[0]["status"] == "ok"


def test_run_seed_override(cfg_file, tmp_path):
    cli.main(["run", "--config", cfg_file, "--out", str(tmp_path / "a"), "--seed", "9"])
    echo = (tmp_path / "a" / "config.echo").read_text()
    assert parse_config(echo).sim.seed == 9


def test_flooding_run_with_five_flows(tmp_path):
    p = tmp_path / "f.ini"
    p.write_text("[topology]\nnodes = 50\n[protocol]\nname = flooding\n"
                 "[traffic]\nrandom_pairs = 5\n[sim]\nduration_s = 20\n")
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    assert all((tmp_path / "o" / f).exists() for f in ("trace.csv", "report.csv", "config.echo"))


def test_sweep_rows_and_seeds(cfg_file, tmp_path):
    base = parse_config(SMALL)
    rows, text = cli.cmd_sweep(base, [16, 20], ["flooding", "friendshare"], 2,
                               str(tmp_path / "sw"))
    got = read_rows(text)
    assert len(got) == 8
    assert [int(r["seed"]) for r in got[:2]] == [3, 4]
    assert (tmp_path / "sw" / "sweep.csv").read_text() == text


def test_sweep_row_failure_does_not_abort(monkeypatch, tmp_path):
    import friendroute.cli as mod
    real = mod.run_scenario

    def flaky(cfg, protocol=None):
        if protocol == "flooding":
            raise RuntimeError("boom")
        return real(cfg, protocol)
    monkeypatch.setattr(mod, "run_scenario", flaky)
    rows, text = cli.cmd_sweep(parse_config(SMALL), [16], ["flooding", "friendshare"], 1)
    got = read_rows(text)
    assert got[0]["status"].startswith("error: RuntimeError") and got[1]["status"] == "ok"


def test_sweep_parallel_matches_serial():
    base = parse_config(SMALL)
    _, serial = cli.cmd_sweep(base, [16], ["flooding", "friendshare"], 2)
    _, par = cli.cmd_sweep(base, [16], ["flooding", "friendshare"], 2, jobs=2)
    assert serial == par


def test_sweep_usage_errors(cfg_file, tmp_path, capsys):
    with pytest.raises(cli.UsageError):
        cli.cmd_sweep(parse_config(SMALL), [16], [], 1)
    assert cli.main(["sweep", "--config", cfg_file, "--protocols", "", "--out",
                     str(tmp_path)]) == cli.EXIT_USAGE
    assert cli.main(["sweep", "--config", cfg_file, "--protocols", "olsr", "--out",
                     str(tmp_path)]) == cli.EXIT_USAGE


def test_analyze_table(capsys):
    assert cli.main(["analyze", "--tn", "5", "--kn", "2", "--un", "3", "--en", "3",
                     "--tout", "20", "--tavg", "10"]) == 0
    out = capsys.readouterr().out
    rows = {l[2:].split()[0]: (l[0] == "!", l[2:].split()[1]) for l in out.splitlines()}
    assert rows["T_c"] == (False, "2")
    assert rows["P_u"][0] is False and float(rows["P_u"][1]) == pytest.approx(0.3)
    # comb(3, 2) / comb(3, 3) = 3 leaves [0, 1]
    assert rows["P_e"][0] is True and float(rows["P_e"][1]) == pytest.approx(3.0)
    assert rows["P"][0] is True and float(rows["P"][1]) == pytest.approx(0.9)


def test_analyze_marks_invalid_rows(capsys):
    cli.main(["analyze", "--tn", "4", "--kn", "0", "--un", "4", "--en", "0",
              "--tout", "10", "--tavg", "10"])
    out = capsys.readouterr().out
    assert any(l.startswith("! P_u") for l in out.splitlines())


def test_analyze_bad_input_is_usage_error(capsys):
    assert cli.main(["analyze", "--tn", "5", "--kn", "0", "--un", "2", "--en", "3",
                     "--tout", "1", "--tavg", "1"]) == cli.EXIT_USAGE


def test_oracle_row(capsys):
    assert cli.main(["oracle", "--tn", "10", "--un", "5", "--en", "3", "--tout", "20",
                     "--tavg", "10", "--trials", "100000", "--seed", "1"]) == 0
    row = read_rows(capsys.readouterr().out)[0]
    assert float(row["exact_p_any"]) == pytest.approx(7 / 12, abs=1e-6)
    assert row["mc_within_3se"] == "true"
    assert float(row["div_p"]) >= 0


def test_oracle_domain_error(capsys):
    assert cli.main(["oracle", "--tn", "3", "--un", "2", "--en", "1", "--tout", "50",
                     "--tavg", "10"]) == cli.EXIT_USAGE


def test_compare_against_itself_is_zero(cfg_file):
    table = cli.cmd_compare(parse_config(SMALL), ["friendshare", "friendshare"])
    assert all(r["delta"] in (0, None) for r in table)


def test_compare_three_protocols(cfg_file, capsys):
    assert cli.main(["compare", "--config", cfg_file, "--protocols",
                     "flooding,friendshare,gridfsr"]) == 0
    out = capsys.readouterr().out
    assert {"flooding", "friendshare", "gridfsr"} <= {l.split()[0] for l in out.splitlines()[1:]}


def test_compare_needs_two():
    with pytest.raises(cli.UsageError):
        cli.cmd_compare(parse_config(SMALL), ["flooding"])


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[topology]\nnodes = -5\n")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == cli.EXIT_PARSE
    assert cli.main(["run", "--config", str(tmp_path / "nope.ini"), "--out",
                     str(tmp_path / "o")]) == cli.EXIT_IO
    assert cli.main(["frobnicate"]) == cli.EXIT_USAGE
    assert cli.main(["--help"]) == cli.EXIT_OK
    codes = {cli.EXIT_OK, cli.EXIT_USAGE, cli.EXIT_PARSE, cli.EXIT_RUNTIME, cli.EXIT_IO}
    assert len(codes) == 5


def test_unwritable_output_is_io_error(cfg_file, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--config", cfg_file, "--out", str(blocker / "sub")]) == cli.EXIT_IO


def test_runtime_error_code(cfg_file, tmp_path, monkeypatch):
    import friendroute.cli as mod
    monkeypatch.setattr(mod, "run_scenario", lambda *a, **k: 1 / 0)
    assert cli.main(["run", "--config", cfg_file, "--out", str(tmp_path / "o")]) == \
        cli.EXIT_RUNTIME
