import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from cvtele.cli import main, parse_params
from cvtele.verify import GAME_FIXTURES


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def csv_rows(text):
    lines = text.splitlines()
    assert lines[-1].startswith("# version=")
    return list(csv.DictReader(io.StringIO("\n".join(lines[:-1]))))


def test_sweep_basel_writes_monotone_csv(tmp_path):
    scen = write(tmp_path / "s.json", {"version": 1, "sweep": {
        "experiment": "strong_fixed_state", "state": {"kind": "basel"},
        "sigma_grid": [1.0, 0.1, 0.01, 0.001], "floor": 0.999}})
    out = tmp_path / "out.csv"
    assert main(["sweep", scen, "--out", str(out)]) == 0
    eps = [float(r["infidelity"]) for r in csv_rows(out.read_text())]
    assert np.all(np.diff(eps) < 0)


def test_sweep_output_is_byte_identical(tmp_path):
    scen = write(tmp_path / "s.json", {"version": 1, "sweep": {
        "experiment": "adaptive_serial", "channel": {"kind": "thermal", "params": {"eta": 0.5, "n_b": 0.2}},
        "sigma_grid": [0.3, 0.1], "instances": 3, "seed": 4}})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", scen, "--out", str(a), "--threads", "1"]) == 0
    assert main(["sweep", scen, "--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_malformed_json_exit_2(tmp_path, caplog):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1,\n "sweep": {"experiment": }}')
    assert main(["sweep", str(bad)]) == 2
    assert "line 2" in caplog.text and "column" in caplog.text


def test_unknown_field_exit_2(tmp_path):
    scen = write(tmp_path / "s.json", {"version": 1, "sweep": {"experiment": "strong_fixed_state", "grid": [1]}})
    assert main(["sweep", scen]) == 2
    scen = write(tmp_path / "t.json", {"version": 1, "sweep": {}, "extra": 1})
    assert main(["sweep", scen]) == 2
    scen = write(tmp_path / "u.json", {"version": 7, "sweep": {}})
    assert main(["sweep", scen]) == 2


def test_truncation_floor_exit_3(tmp_path, caplog):
    scen = write(tmp_path / "s.json", {"version": 1, "sweep": {
        "experiment": "strong_fixed_state", "state": {"kind": "basel"}, "sigma_grid": [1.0], "basel_cutoff": 50}})
    assert main(["sweep", scen]) == 3
    assert "row 0" in caplog.text


def test_bounds_thermal(capsys):
    assert main(["bounds", "--channel", "thermal", "--params", "eta=0.5,n_b=0", "--sigma-grid", "1,0.1,0.01"]) == 0
    rows = csv_rows(capsys.readouterr().out)
    e = [float(r["bound_value"]) for r in rows]
    assert len(rows) == 3 and np.all(np.diff(e) < 0)


def test_bounds_additive_noise_formula_column(capsys):
    assert main(["bounds", "--channel", "additive_noise", "--params", "xi=1", "--sigma-grid", "0.5,0.1"]) == 0
    for r in csv_rows(capsys.readouterr().out):
        s = float(r["sigma_bar"])
        assert float(r["closed_form"]) == pytest.approx(math.sqrt(1 - 4 * (1 + s) / (2 + s) ** 2), abs=1e-15)
        assert float(r["bound_value"]) == pytest.approx(float(r["closed_form"]), abs=1e-14)


def test_bounds_pure_amplifier(capsys):
    assert main(["bounds", "--channel", "pure_amplifier", "--params", "gain=2", "--sigma-grid", "0.1"]) == 0
    (row,) = csv_rows(capsys.readouterr().out)
    assert float(row["bound_value"]) == pytest.approx(math.sqrt(1 - 1 / (2 * 0.1 + 1)), abs=1e-14)


def test_bounds_oracle_column(capsys):
    assert main(["bounds", "--channel", "thermal", "--params", "eta=0.5,n_b=0.5", "--sigma-grid", "0.3",
                 "--oracle"]) == 0
    (row,) = csv_rows(capsys.readouterr().out)
    assert float(row["oracle_value"]) <= float(row["bound_value"])


def test_bounds_errors():
    assert main(["bounds", "--channel", "identity", "--sigma-grid", "0.1"]) == 2
    assert main(["bounds", "--channel", "thermal", "--params", "eta=0.5", "--sigma-grid", "0.1"]) == 2
    assert main(["bounds", "--channel", "thermal", "--params", "eta=0.5,n_b=0", "--sigma-grid", "-1"]) == 2


def test_parse_params():
    assert parse_params("eta=0.5, n_b=1") == {"eta": 0.5, "n_b": 1.0}
    assert parse_params('{"xi": 2}') == {"xi": 2}


@pytest.mark.parametrize("name", list(GAME_FIXTURES))
def test_game_fixtures(tmp_path, name):
    cfg, expected = GAME_FIXTURES[name]
    scen = write(tmp_path / "g.json", {"version": 1, "game": dict(cfg, rounds=10_000, games=20)})
    out = tmp_path / "g.out"
    assert main(["game", scen, "--seed", "3", "--summary-only", "--out", str(out)]) == 0
    summary = json.loads(out.read_text())["summary"]
    key = "teleporter_wins" if expected == "teleporter" else "distinguisher_wins"
    assert summary[key] == 20


def test_game_is_byte_identical(tmp_path):
    cfg, _ = GAME_FIXTURES["ideal_distinguisher_first"]
    scen = write(tmp_path / "g.json", {"version": 1, "game": dict(cfg, rounds=300, games=2)})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["game", scen, "--seed", "8", "--out", str(a)])
    main(["game", scen, "--seed", "8", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_game_invalid_config(tmp_path):
    scen = write(tmp_path / "g.json", {"version": 1, "game": {"variant": "gaussian_channel",
                                                               "reveal_order": "teleporter_first"}})
    assert main(["game", scen]) == 2


def test_skc(capsys):
    assert main(["skc", "--eta", "0.5", "--uses", "100", "--eps", "0.1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["bound"] == pytest.approx(1.0316397573511114, abs=1e-12)
    assert main(["skc", "--eta", "0.5", "--uses", "100", "--eps", "0.1", "--n-b", "1", "--variance", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["bound"] == pytest.approx(0.24245826802900322, abs=1e-12)
    assert main(["skc", "--eta", "0.5", "--eps", "0.1", "--n-b", "1"]) == 2
    assert main(["skc", "--eta", "1.5", "--eps", "0.1"]) == 2


def test_verify_fast_report(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--level", "fast", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["passed"]
    assert all(c["identities"] for c in doc["checks"])
    assert all(c["level"] == "fast" for c in doc["checks"])


def test_module_entry_point_logs_to_stderr():
    res = subprocess.run([sys.executable, "-m", "cvtele", "skc", "--eta", "0.5", "--eps", "0.1"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["uses"] == "inf"
    bad = subprocess.run([sys.executable, "-m", "cvtele", "bounds", "--channel", "identity", "--sigma-grid", "1"],
                         capture_output=True, text=True)
    assert bad.returncode == 2 and bad.stdout == "" and "ERROR" in bad.stderr
