import csv
import json

import pytest

from qbm_entanglement import io as qio
from qbm_entanglement.cli import PRESETS, load_config, main


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_markovian_json(capsys):
    assert main(["markovian", "--preset", "fig1"]) == 0
    out = _json_out(capsys)
    assert out["tau1"] == pytest.approx(0.668184, abs=1e-5)
    assert out["tau2"] == "undefined"
    assert out["xi_c"] == pytest.approx(0.976340, abs=1e-5)


def test_markovian_zero_temperature_spells_inf(capsys):
    assert main(["markovian", "--gamma", "0.2", "--temp", "0", "--xi", "1"]) == 0
    assert _json_out(capsys)["tau1"] == "inf"


def test_unknown_config_key_exit_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"bath": {"gamma": 1.0, "gama": 2.0}}))
    assert main(["stationary", "--config", str(p)]) == 2
    assert "bath.gama" in capsys.readouterr().err


def test_invalid_value_exit_2(capsys):
    assert main(["stationary", "--gamma", "1", "--Gamma", "0"]) == 2
    assert "Gamma" in capsys.readouterr().err


def test_malformed_json_exit_2(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert main(["stationary", "--config", str(p)]) == 2


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name):
    cfg = load_config(None, name, {})
    assert cfg.Gamma > 0 and cfg.T >= 0


def test_stationary_entangled(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"output": {"format": "JSON"}}))
    assert main(["stationary", "--config", str(p), "--gamma", "2", "--Gamma", "10", "--temp", "0.25"]) == 0
    out = _json_out(capsys)
    assert out["entangled"] is True and out["ERx"] > 0 and out["ENinf"] > 0


def test_stationary_csv_row(capsys):
    assert main(["stationary", "--gamma", "0.1", "--Gamma", "10", "--temp", "0.25"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert tuple(rows[0]) == qio.SCAN_HEADER and rows[1][-1] == "false"


def test_critical_temp(capsys):
    assert main(["critical-temp", "--gamma", "2", "--Gamma", "10"]) == 0
    assert _json_out(capsys)["T_c"] == pytest.approx(0.2702, rel=2e-3)


def _scan_cfg(tmp_path):
    p = tmp_path / "scan.json"
    p.write_text(json.dumps({"bath": {"T": 0.25}, "scan": {"gamma_grid": [0.5, 2.0], "Gamma_grid": [1.0, 10.0], "n_jobs": 2}}))
    return str(p)


def test_scan_rows_and_determinism(tmp_path):
    cfg = _scan_cfg(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["scan", "--config", cfg, "--out", str(a)]) == 0
    assert main(["scan", "--config", cfg, "--out", str(b), "--n-jobs", "1"]) == 0
    assert a.read_text() == b.read_text()
    rows = qio.read_scan_csv(a)
    assert [(r["gamma"], r["Gamma"]) for r in rows] == [(0.5, 1.0), (0.5, 10.0), (2.0, 1.0), (2.0, 10.0)]
    assert rows[-1]["entangled"] is True


def test_scan_resume_completes_partial_file(tmp_path):
    cfg = _scan_cfg(tmp_path)
    full, part = tmp_path / "full.csv", tmp_path / "part.csv"
    assert main(["scan", "--config", cfg, "--out", str(full)]) == 0
    lines = full.read_text().splitlines()
    # two finished rows, one failed row and a truncated line from a killed run
    failed = ",".join(lines[3].split(",")[:3] + [qio.ERROR_MARK] * 8)
    part.write_text("\n".join(lines[:3] + [failed, lines[4][:10]]))
    assert main(["scan", "--config", cfg, "--out", str(part), "--resume"]) == 0
    assert part.read_text() == full.read_text()


def test_resume_rejects_foreign_file(tmp_path):
    cfg = _scan_cfg(tmp_path)
    p = tmp_path / "x.csv"
    p.write_text("a,b\n")
    assert main(["scan", "--config", cfg, "--out", str(p), "--resume"]) == 2


def test_unwritable_output_exit_4(tmp_path):
    out = tmp_path / "missing" / "dir" / "x.json"
    assert main(["markovian", "--preset", "fig1", "--out", str(out)]) == 4


def test_quick_evolve_writes_trajectory_and_summary(tmp_path, capsys):
    p = tmp_path / "e.json"
    p.write_text(json.dumps({"model": "markovian_reference", "bath": {"gamma": 0.5, "Gamma": 10.0, "T": 0.5},
                             "time": {"t_max": 100.0, "n_points": 121}}))
    out = tmp_path / "traj.csv"
    assert main(["evolve", "--config", str(p), "--out", str(out)]) == 0
    summary = _json_out(capsys)
    assert summary["tau_s"] > 0 and summary["EN_inf"] == 0.0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == qio.TRAJECTORY_HEADER and len(rows) == 122
    assert json.loads((tmp_path / "traj.summary.json").read_text()) == summary
