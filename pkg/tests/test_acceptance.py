"""Acceptance gate: every criterion at its stated tolerance and runtime limit.

Each test prints one ``PASS``/``FAIL`` line (visible with or without ``-s``).
"""

import csv
import io
import time
from pathlib import Path

import numpy as np
import pytest

from synchrotherm import cli, validation

FIXTURE = Path(__file__).parent / "fixtures" / "fc_grid_alpha1p5.csv"


def report(capsys, result):
    with capsys.disabled():
        print(f"\n[acceptance] {result.line}")
    return result


def golden_grid():
    rows = list(csv.reader(io.StringIO(FIXTURE.read_text(encoding="utf-8"))))
    assert rows[0] == ["m", "n", "value"]
    grid = np.zeros((11, 11))
    for m, n, v in rows[1:]:
        grid[int(m), int(n)] = float(v)
    return grid


def test_criterion_1_fc_oracle_equivalence(capsys):
    r = report(capsys, validation.check_fc_oracle())
    assert r.value <= 1e-8 and r.seconds < 5.0
    assert r.passed


def test_criterion_2_fc_grid_golden(capsys, tmp_path):
    t0 = time.perf_counter()
    oracle_csv, analytic_csv = tmp_path / "oracle.csv", tmp_path / "analytic.csv"
    base = ["fc-table", "--alpha", "1.5", "--n-max", "64", "--max-index", "10", "--abs"]
    assert cli.main(base + ["--method", "oracle", "-o", str(oracle_csv)]) == 0
    assert cli.main(base + ["-o", str(analytic_csv)]) == 0
    exact = oracle_csv.read_bytes() == FIXTURE.read_bytes()
    golden = golden_grid()
    analytic = np.zeros_like(golden)
    for m, n, v in list(csv.reader(io.StringIO(analytic_csv.read_text(encoding="utf-8"))))[1:]:
        analytic[int(m), int(n)] = float(v)
    err = float(np.abs(analytic - golden).max())
    dt = time.perf_counter() - t0
    ok = exact and err <= 1e-12 and dt < 1.0
    r = validation.CheckResult(
        "2 FC grid magnitudes", ok, err, 1e-12, dt, 1.0, f"oracle_bytes_identical={exact}"
    )
    report(capsys, r)
    assert exact
    assert err <= 1e-12
    assert dt < 1.0
    # ridge structure: the vacuum row peaks near the displaced occupation alpha^2 = 2.25
    assert int(np.argmax(golden[0])) == 2


def test_criterion_3_detailed_balance(capsys):
    r = report(capsys, validation.check_detailed_balance())
    assert r.value <= 1e-9 and r.seconds < 5.0
    assert r.passed


def test_criterion_4_synchro_thermalization(capsys):
    r = report(capsys, validation.check_synchro_thermalization())
    assert r.value <= 1e-6 and r.seconds < 30.0
    assert r.passed


def test_criterion_5_disconnected_case(capsys):
    r = report(capsys, validation.check_disconnected())
    assert "components=7" in r.detail
    assert r.value <= 1e-8 and r.seconds < 10.0
    assert r.passed


def test_criterion_6_blockade(capsys):
    r = report(capsys, validation.check_blockade())
    assert r.seconds < 10.0
    assert r.passed


def test_criterion_7_analytic_vs_dense(capsys):
    r = report(capsys, validation.check_dense_cross())
    assert r.seconds < 10.0
    assert r.value <= 1e-6


def test_criterion_8_mixture_stationarity(capsys):
    r = report(capsys, validation.check_mixture_degeneracy())
    assert r.value <= r.tolerance and r.seconds < 1.0
    assert r.passed
