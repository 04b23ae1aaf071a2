from dataclasses import fields

import pytest
from hypothesis import given, settings, strategies as st

from diqkd.cli import main
from diqkd.config import RunConfig, build_run_config, load_config, parse_config_text
from diqkd.emission import EmissionTimeModel, WindowCurvePoint
from diqkd.errors import ParseError, SchemaError
from diqkd.io import (
    data_dir,
    format_correlation_table,
    format_ledger,
    format_scan,
    parse_correlation_table,
    parse_ledger,
    parse_scan,
)
from diqkd.keyrate import DEFAULT_PENALTY_C
from diqkd.link import LinkParams
from diqkd.protocol import EventLedger, EventRecord

from conftest import DATA

TABLE = str(DATA / "table1.csv")
CFG = str(DATA / "default.cfg")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report_value(text, key):
    for line in text.splitlines():
        if line.startswith(key + " = "):
            return line.split(" = ", 1)[1]
    raise KeyError(key)


def test_table_round_trip(table1):
    assert parse_correlation_table(format_correlation_table(table1)) == table1


@pytest.mark.parametrize("text,exc,line", [
    ("", ParseError, 1),
    ("x,y,n\n0,0,1\n", ParseError, 1),
    ("x,y,n,n_same\n0,0,a,1\n", ParseError, 2),
    ("x,y,n,n_same\n0,0,5\n", ParseError, 2),
])
def test_table_parse_errors(text, exc, line):
    with pytest.raises(exc) as info:
        parse_correlation_table(text)
    assert info.value.line == line


@pytest.mark.parametrize("body", [
    "4,0,5,1\n",
    "0,0,5,6\n",
    "0,0,5,1\n0,0,5,1\n",
    "0,0,5,1\n",
])
def test_table_schema_errors(body):
    with pytest.raises(SchemaError):
        parse_correlation_table("x,y,n,n_same\n" + body)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**12), st.integers(0, 3), st.integers(0, 1),
                          st.integers(0, 1), st.integers(0, 1)), max_size=50))
def test_ledger_round_trip(rows):
    led = EventLedger([EventRecord(i, *r) for i, r in enumerate(rows)])
    assert parse_ledger(format_ledger(led)) == led


def test_ledger_bad_values():
    with pytest.raises(SchemaError):
        parse_ledger("round_id,herald_time_ns,x,y,a,b\n0,0,0,0,2,0\n")
    with pytest.raises(SchemaError):
        parse_ledger("round_id,herald_time_ns,x,y,a,b\n3,0,0,0,0,0\n1,0,0,0,0,0\n")


def test_scan_round_trip_exact():
    pts = [WindowCurvePoint(755.0, 2.578 + 1e-13, 0.0779, 0.25, 0.0123456789)]
    assert parse_scan(format_scan(pts)) == pts


def test_config_unknown_key_line_number():
    with pytest.raises(ParseError) as info:
        parse_config_text("seed = 1\n\nbogus = 3\n")
    assert info.value.line == 3


def test_default_config_matches_code_defaults():
    cfg = build_run_config(load_config(CFG))
    base = RunConfig()
    assert cfg.link == LinkParams()
    assert cfg.model == EmissionTimeModel()
    assert cfg.window == base.window
    assert cfg.settings == base.settings
    assert cfg.convention == base.convention
    assert cfg.rounds == base.rounds
    assert cfg.penalty_c == DEFAULT_PENALTY_C


def test_every_model_field_documented_in_default_config():
    keys = set(load_config(CFG))
    assert {f.name for f in fields(EmissionTimeModel)} <= keys


def test_data_dir_override(monkeypatch, tmp_path):
    monkeypatch.setenv("DIQKD_DATA_DIR", str(tmp_path))
    assert data_dir() == tmp_path


def test_cli_analyze(capsys):
    code, out, _ = run(capsys, "analyze", "--table", TABLE)
    assert code == 0
    assert report_value(out, "S") == "2.57783 +/- 0.0754074"
    assert "# table_sha256: " in out


def test_cli_bundled_table_by_name(capsys):
    code, out, _ = run(capsys, "analyze", "--table", "table1.csv")
    assert code == 0


def test_cli_bayes_csv(capsys):
    code, out, _ = run(capsys, "bayes", "--table", TABLE, "--csv")
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "s_min,q0_max,q1_max,tail"
    assert row.startswith("2.42615,0.105548,")


def test_cli_keyrate_and_anchor_label(capsys):
    code, out, _ = run(capsys, "keyrate", "--S", "2.578", "--Q", "0.0779")
    assert code == 0
    assert report_value(out, "anchor_model") == "paper-anchored model, not a security bound"


def test_cli_finite_key_csv(capsys, tmp_path):
    out_path = tmp_path / "fk.csv"
    assert main(["finite-key", "--S", "2.578", "--Q", "0.0779", "--eps", "1e-5", "--out", str(out_path)]) == 0
    assert out_path.read_text() == "eps,n_min\n1e-05,175002\n"


def test_cli_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["simulate", "--seed", "3", "--rounds", "300", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    led = parse_ledger(a.read_text())
    times = [r.herald_time_ns for r in led]
    assert len(led) == 300 and all(u < v for u, v in zip(times, times[1:]))


def test_cli_window_scan(capsys):
    code, out, _ = run(capsys, "window-scan", "--start", "750", "--stop", "760", "--step", "5")
    assert code == 0
    pts = parse_scan(out)
    assert [p.t_s_ns for p in pts] == [750.0, 755.0, 760.0]


@pytest.mark.parametrize("argv,code", [
    (["nope"], 1),
    ([], 1),
    (["simulate", "--rounds", "3"], 1),
    (["analyze"], 1),
    (["analyze", "--table", "/no/such/file.csv"], 1),
    (["keyrate", "--S", "1.9", "--Q", "0.1"], 1),
    (["keyrate", "--S", "3.0", "--Q", "0.1"], 1),
    (["finite-key", "--S", "2.3", "--Q", "0.1"], 1),
    (["rate-budget"], 0),
])
def test_cli_exit_codes(capsys, argv, code):
    assert main(argv) == code
