import csv
import io
import json
import os
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from synchrotherm import cli
from synchrotherm.artifacts import csv_text, format_number, write_atomic
from synchrotherm.config import (
    CONFIG_SCHEMA,
    REPORT_SCHEMA,
    initial_populations,
    validate_document,
)
from synchrotherm.errors import ConfigError

DISPERSIVE = {
    "version": 1,
    "model": {"kind": "dispersive", "qubit_gap": 1.0, "resonator_freq": 5.0, "dispersive_shift": 0.1, "n_max": 6},
    "bath": {"family": "flat", "coupling": 1.0, "beta": 1.0},
}
ND = {
    "version": 1,
    "model": {
        "kind": "nd",
        "level_energies": [0.0, 0.7, 1.6],
        "osc_freqs": [1.0],
        "couplings": [[0.0], [0.4], [0.9]],
        "n_max": 12,
    },
    "bath": {"family": "ohmic_exp_cutoff", "coupling": 1.0, "cutoff": 10.0, "beta": 1.0},
    "initial_state": "label:0,0",
}


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_minimal_dispersive_config_gets_defaults():
    cfg = cli.parse_config(["analyze", "c.json"], files={"c.json": DISPERSIVE})
    assert cfg.command == "analyze"
    assert cfg.initial_state == "ground"
    assert cfg.bath.cutoff == 1.0
    assert cfg.thresholds == {}
    assert cfg.fmt == "json"


def test_negative_frequency_names_field_path():
    doc = json.loads(json.dumps(ND))
    doc["model"]["osc_freqs"] = [-1.0]
    with pytest.raises(ConfigError) as info:
        cli.parse_config(["analyze", "c.json"], files={"c.json": doc})
    assert any(p.startswith("model.osc_freqs[0]") for p in info.value.problems)


def test_times_and_t_max_conflict():
    with pytest.raises(ConfigError, match="conflicts"):
        cli.parse_config(["evolve", "c.json", "--times", "0,1", "--t-max", "3"], files={"c.json": DISPERSIVE})


def test_all_violations_reported_together():
    doc = json.loads(json.dumps(ND))
    doc["version"] = 3
    doc["extra"] = True
    doc["model"]["osc_freqs"] = [0.0]
    doc["bath"]["family"] = "lorentzian"
    problems = validate_document(doc)
    assert len(problems) >= 4
    assert any("expected schema version 1" in p for p in problems)
    assert any("'extra'" in p for p in problems)


def test_coupling_shape_is_checked():
    doc = json.loads(json.dumps(ND))
    doc["model"]["couplings"] = [[0.0], [0.4]]
    assert any("couplings" in p for p in validate_document(doc))


def test_initial_state_presets():
    e = np.array([0.3, -1.0, 2.0])
    assert initial_populations("ground", e).tolist() == [0, 1, 0]
    assert np.allclose(initial_populations("uniform", e), 1 / 3)
    assert initial_populations("level:2", e).tolist() == [0, 0, 1]
    assert initial_populations("label:1,0", e, [(0, (0,)), (1, (0,)), (1, (1,))]).tolist() == [0, 1, 0]
    with pytest.raises(ConfigError):
        initial_populations("level:5", e)
    with pytest.raises(ConfigError):
        initial_populations([0.5, 0.6, 0.0], e)


def test_shortest_round_trip_numbers():
    for x in (0.1, 1 / 3, 1e-300, 2.5e17, -0.0):
        assert float(format_number(x)) == x
    assert format_number(0.1) == "0.1"
    assert format_number(np.int64(4)) == "4"
    assert csv_text(["a", "b"], [(1, 0.5)]) == "a,b\n1,0.5\n"


def test_atomic_write_leaves_no_partial_file(tmp_path, monkeypatch):
    target = tmp_path / "out.csv"
    target.write_text("old\n", encoding="utf-8")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        write_atomic(target, "new contents\n")
    assert target.read_text(encoding="utf-8") == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]


def test_analyze_nd_is_canonical_and_report_round_trips(tmp_path):
    cfg = write(tmp_path, "nd.json", ND)
    out, edges = tmp_path / "report.json", tmp_path / "edges.csv"
    assert cli.main(["analyze", str(cfg), "-o", str(out), "--edges", str(edges)]) == 0
    report = json.loads(out.read_text(encoding="utf-8"))
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["kind"] == "canonical"
    assert report["connected"] and report["stationary"]
    assert report["residual"] <= report["residual_bound"]
    assert report["null_space_discrepancy"] <= 1e-8
    assert sum(report["populations"]) == pytest.approx(1.0)
    rows = list(csv.reader(io.StringIO(edges.read_text(encoding="utf-8"))))
    assert rows[0] == ["i", "f", "delta", "W"]
    assert len(rows) > 1


def test_analyze_dispersive_is_mixture_with_sideband_components(tmp_path, capsys):
    doc = dict(DISPERSIVE, initial_state="uniform")
    assert cli.main(["analyze", str(write(tmp_path, "d.json", doc))]) == 0
    report = json.loads(capsys.readouterr().out)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["kind"] == "mixture"
    assert len(report["components"]) == doc["model"]["n_max"] + 1
    assert report["degenerate_pairs"] and report["warnings"]


def test_analyze_generic_model(tmp_path, capsys):
    from synchrotherm.spectral_core import matrix_to_json

    doc = {
        "version": 1,
        "model": {
            "kind": "generic",
            "H_a": matrix_to_json(np.diag([0.5, -0.5])),
            "H_b": matrix_to_json(np.diag([0.0, 1.1, 2.2])),
            "V_ab": matrix_to_json(0.1 * np.kron(np.diag([1.0, -1.0]), np.ones((3, 3)))),
            "A_ops": [matrix_to_json(np.array([[0.0, 1.0], [1.0, 0.0]]))],
        },
        "bath": {"family": "flat", "coupling": 0.5, "beta": 2.0},
    }
    assert cli.main(["analyze", str(write(tmp_path, "g.json", doc))]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["kind"] == "canonical"
    assert report["n_levels"] == 6


def test_unverifiable_steady_state_exits_3(tmp_path, capsys):
    # all mass on one level of the degenerate n=5 sideband: the rate equation freezes it there
    doc = dict(DISPERSIVE, initial_state="label:1,5")
    assert cli.main(["analyze", str(write(tmp_path, "d.json", doc))]) == 3
    assert "not certified" in capsys.readouterr().err


def test_validation_failures_exit_2(tmp_path, capsys):
    bad = dict(DISPERSIVE, initial_state="level:99")
    assert cli.main(["analyze", str(write(tmp_path, "b.json", bad))]) == 2
    assert cli.main(["analyze", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["fc-table", "--alpha", "1"]) == 2
    assert cli.main(["blockade", "--range", "3,1"]) == 2
    err = capsys.readouterr().err
    assert "level 99" in err and "not found" in err


def test_evolve_csv(tmp_path):
    cfg = write(tmp_path, "nd.json", ND)
    out = tmp_path / "traj.csv"
    assert cli.main(["evolve", str(cfg), "--t-max", "60", "--samples", "7", "-o", str(out)]) == 0
    rows = list(csv.reader(io.StringIO(out.read_text(encoding="utf-8"))))
    assert rows[0][0] == "time" and rows[0][-1] == "tv_distance"
    assert len(rows) == 8
    assert len(rows[0]) == 2 + 39
    data = np.array(rows[1:], dtype=float)
    assert np.allclose(data[:, 1:-1].sum(axis=1), 1.0, atol=1e-9)
    assert data[-1, -1] <= 1e-6
    assert cli.main(["evolve", str(cfg), "--times", "0,0.5,1", "-o", str(out)]) == 0
    assert out.read_text(encoding="utf-8").count("\n") == 4


def test_evolve_default_horizon_reaches_steady_state(tmp_path, capsys):
    assert cli.main(["evolve", str(write(tmp_path, "d.json", DISPERSIVE)), "--samples", "3"]) == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert float(last.split(",")[-1]) <= 1e-8


def test_fc_table_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["fc-table", "--alpha", "1.5", "--n-max", "30", "--max-index", "4"]
    assert cli.main(args + ["-o", str(a)]) == 0
    assert cli.main(args + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(io.StringIO(a.read_text(encoding="utf-8"))))
    assert rows[0] == ["m", "n", "value"] and len(rows) == 26
    assert float(rows[1][2]) == pytest.approx(np.exp(-1.125), rel=1e-14)


def test_blockade_outputs_are_byte_identical(tmp_path):
    paths = [tmp_path / f"{k}.csv" for k in range(2)]
    for p in paths:
        assert cli.main(["blockade", "--groups", "3", "--m-max", "5", "--seed", "11", "-o", str(p),
                         "--summary", str(p.with_suffix(".json"))]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    summary = json.loads(paths[0].with_suffix(".json").read_text(encoding="utf-8"))
    assert len(summary["groups"]) == 3
    assert all(g["slope"] < 0 for g in summary["groups"])


def test_validate_exit_status_tracks_suite(capsys):
    code = cli.main(["validate"])
    lines = capsys.readouterr().out.strip().splitlines()
    checks = [ln for ln in lines if ln.startswith(("PASS", "FAIL"))]
    assert len(checks) == 10
    all_pass = all(ln.startswith("PASS") for ln in checks)
    assert code == (0 if all_pass else 3)


def test_example_configs_validate():
    root = Path(__file__).resolve().parents[1] / "configs"
    for path in root.glob("*.json"):
        doc = json.loads(path.read_text(encoding="utf-8"))
        assert validate_document(doc) == [], path.name
        jsonschema.validate(doc, CONFIG_SCHEMA)
