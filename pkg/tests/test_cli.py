import csv
import json
from pathlib import Path

import pytest

from varnum.cli import main
from varnum.scenario import deterministic_scenario, save_scenario, two_state_scenario


@pytest.fixture
def two_state(tmp_path):
    p = tmp_path / "two.json"
    save_scenario(two_state_scenario(), p)
    return p


def _write(tmp_path, name, d):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


def test_validate_ok(two_state):
    assert main(["validate", "--scenario", str(two_state)]) == 0


def test_validate_reducible(tmp_path, capsys):
    d = two_state_scenario().to_dict()
    d["process"] = {"kind": "markov", "P": [[1.0, 0.0], [0.5, 0.5]]}
    assert main(["validate", "--scenario", str(_write(tmp_path, "r.json", d))]) == 2
    assert "irreducible" in capsys.readouterr().err


def test_validate_singular(tmp_path, capsys):
    d = deterministic_scenario().to_dict()
    d["r_min"] = 0.0
    d["users"][0]["reward_utility"] = {"kind": "alpha_fair", "alpha": 2.0, "shift": 0.0}
    assert main(["validate", "--scenario", str(_write(tmp_path, "s.json", d))]) == 2
    assert "reward domain" in capsys.readouterr().err


def test_parse_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "users": [,\n}')
    assert main(["validate", "--scenario", str(p)]) == 4
    assert "bad.json:2" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["validate", "--scenario", str(tmp_path / "nope.json")]) == 4


def test_run_avr_deterministic(two_state, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main(["run-avr", "--scenario", str(two_state), "--horizon", "300", "--seed", "4",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert json.loads(lines[0])["meta"]["seed"] == 4
    rows = [json.loads(x) for x in lines[1:]]
    assert len(rows) == 300
    assert "m_hat" in rows[99] and "m_hat" not in rows[98]
    assert "wall_time_s" in json.loads(Path(str(a) + ".meta.json").read_text())


def test_invalid_scenario_writes_nothing(tmp_path):
    d = two_state_scenario().to_dict()
    d["process"] = {"kind": "markov", "P": [[1.0, 0.0], [0.5, 0.5]]}
    out = tmp_path / "t.jsonl"
    assert main(["run-avr", "--scenario", str(_write(tmp_path, "r.json", d)), "--horizon", "5",
                 "--out", str(out)]) == 2
    assert not out.exists()
    assert list(tmp_path.glob(".t.jsonl*")) == []


def test_solve_optstat_both(two_state, tmp_path, capsys):
    out = tmp_path / "s.json"
    assert main(["solve-optstat", "--scenario", str(two_state), "--method", "both",
                 "--out", str(out)]) == 0
    assert "disagreement" in capsys.readouterr().out
    d = json.loads(out.read_text())
    assert [row[0] for row in d["direct"]["r_pi"]] == pytest.approx([1.0, 2.0], abs=1e-8)
    assert d["disagreement_inf"] <= 1e-6


def test_solve_offline(two_state, tmp_path):
    out = tmp_path / "o.json"
    assert main(["solve-offline", "--scenario", str(two_state), "--horizon", "50", "--seed", "1",
                 "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert len(d["r"]) == 50 and d["kkt_residual"] <= 1e-6


def test_solve_slot(tmp_path):
    p = tmp_path / "d.json"
    save_scenario(deterministic_scenario(), p)
    out = tmp_path / "slot.json"
    assert main(["solve-slot", "--scenario", str(p), "--constraint-index", "0", "--theta", "1,0",
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["r_star"][0] == pytest.approx(1.3660254037844386)


def test_compare_rows(two_state, tmp_path):
    out = tmp_path / "gaps.csv"
    assert main(["compare", "--scenario", str(two_state), "--horizons", "100,1000,5000",
                 "--seed", "0", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 3
    assert list(rows[0]) == ["T", "phi_avr", "phi_oracle", "gap"]
    assert all(float(r["gap"]) >= -1e-6 for r in rows)
