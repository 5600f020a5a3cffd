from __future__ import annotations

import csv
import json

import pytest

from davislab.cli import CSV_HEADER, main


@pytest.fixture
def market_file(tmp_path):
    p = tmp_path / "two_state.json"
    p.write_text(json.dumps({"probs": [0.5, 0.5], "dS": [2.0, -1.0], "endowment": [1.0, 1.0], "claim": [1.0, 0.0]}))
    return p


def read_summary(out):
    return json.loads((out / "summary.json").read_text())


def read_csv(path):
    text = path.read_text()
    assert text.startswith(CSV_HEADER)
    return list(csv.DictReader(text.splitlines()[1:]))


def test_davis_singleton(tmp_path, market_file):
    out = tmp_path / "davis"
    assert main(["davis", "--market", str(market_file), "--utility", "log", "--out", str(out)]) == 0
    s = read_summary(out)
    iv = s["result"]["interval"]
    assert iv["p_low"] == iv["p_high"] == pytest.approx(1 / 3)
    assert s["config"]["utility"] == "log"
    rows = read_csv(out / "davis.csv")
    assert {r["method"] for r in rows} == {"DualSweep", "Supergradient", "FiniteDifference"}


def test_solve_and_dual(tmp_path, market_file):
    assert main(["solve", "--market", str(market_file), "--out", str(tmp_path / "s")]) == 0
    assert read_summary(tmp_path / "s")["result"]["pi_hat"] == pytest.approx(0.25)
    assert main(["dual", "--market", str(market_file), "--utility", "power", "--gamma", "-1",
                 "--out", str(tmp_path / "d")]) == 0
    assert abs(read_summary(tmp_path / "d")["result"]["duality_gap"]) < 1e-12
    assert len(read_csv(tmp_path / "d" / "states.csv")) == 2


def test_superrep(tmp_path, market_file):
    assert main(["superrep", "--market", str(market_file), "--out", str(tmp_path / "r")]) == 0
    r = read_summary(tmp_path / "r")["result"]
    # complete two-state market: every claim is replicable at its Q-price
    assert r["price"] == pytest.approx(1 / 3) and r["unique"] == "Replicable"


def test_sweep_csv(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--family", "csw", "--levels", "200,500,1000", "--out", str(out)]) == 0
    rows = read_csv(out / "sweep.csv")
    assert [int(r["N"]) for r in rows] == [200, 500, 1000]
    assert list(rows[0]) == ["N", "y_N", "pairing_H", "du_plus", "du_minus", "gap"]


def test_malformed_json_exit_4_without_output(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "never"
    assert main(["solve", "--config", str(bad), "--out", str(out)]) == 4
    assert not out.exists()
    assert main(["solve", "--market", str(bad), "--out", str(out)]) == 4
    assert not (out / "summary.json").exists()


def test_unknown_config_field_rejected(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "solve", "family": "csw", "colour": "red"}))
    assert main(["solve", "--config", str(cfg)]) == 4


def test_bad_flags_exit_4(market_file, capsys):
    assert main(["davis", "--market", str(market_file), "--levels", "a,b"]) == 4
    assert main(["solve", "--market", str(market_file), "--utility", "power"]) == 4
    assert main([]) == 4


def test_arbitrage_exit_2(tmp_path, capsys):
    p = tmp_path / "arb.json"
    p.write_text(json.dumps({"probs": [0.5, 0.5], "dS": [1.0, 2.0]}))
    assert main(["solve", "--market", str(p)]) == 2
    assert "arbitrage" in capsys.readouterr().err


def test_nonpositive_endowment_exit_2(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"probs": [0.5, 0.5], "dS": [1.0, -1.0], "endowment": [1.0, -0.5]}))
    assert main(["solve", "--market", str(p)]) == 2


def test_round_trip_reproduces_results(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["mc", "--paths", "4000", "--seed", "3", "--out", str(out1)]) == 0
    assert main(["mc", "--config", str(out1 / "summary.json"), "--out", str(out2)]) == 0
    a, b = read_summary(out1), read_summary(out2)
    assert a["result"] == b["result"]
    assert (out1 / "mc.csv").read_text() == (out2 / "mc.csv").read_text()


def test_flags_override_config(tmp_path, market_file):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "solve", "market": str(market_file), "utility": "power", "gamma": 0.5}))
    assert main(["solve", "--config", str(cfg), "--utility", "log", "--out", str(tmp_path / "o")]) == 0
    assert read_summary(tmp_path / "o")["config"]["utility"] == "log"


def test_writes_only_inside_out(tmp_path, market_file, monkeypatch):
    monkeypatch.chdir(tmp_path)
    before = set(tmp_path.iterdir())
    assert main(["solve", "--market", str(market_file), "--out", str(tmp_path / "o")]) == 0
    assert set(tmp_path.iterdir()) - before == {tmp_path / "o"}
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["states.csv", "summary.json"]


def test_stdout_summary(market_file, capsys):
    assert main(["solve", "--market", str(market_file)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["config"]["command"] == "solve"


@pytest.mark.parametrize("example", ["ThreeState", "Example2"])
def test_reproduce(example, tmp_path, capsys):
    assert main(["reproduce", example, "--paths", "20000", "--out", str(tmp_path / example)]) == 0
    err = capsys.readouterr().err
    assert "PASS" in err and "FAIL" not in err


def test_corrector_and_mc_tables(tmp_path):
    assert main(["corrector", "--paths", "20000", "--out", str(tmp_path / "c")]) == 0
    rows = read_csv(tmp_path / "c" / "corrector.csv")
    assert [float(r["eps"]) for r in rows] == [0.1, 0.05, 0.025]
