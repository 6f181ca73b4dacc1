import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from goldens import GOLDEN_GAPS, VARIATIONAL_GAPS
from telegap import __version__
from telegap.cli import ConfigError, RunConfig, parse_float_list, parse_int_list, run


def _rows(path):
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    assert lines[0].startswith("# theta=")
    assert f"version=telegap {__version__}" in lines[0]
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_int_list_grammar():
    assert parse_int_list("3") == [3]
    assert parse_int_list("1..4") == [1, 2, 3, 4]
    assert parse_int_list("1,2,4") == [1, 2, 4]
    assert parse_int_list("1..2,5") == [1, 2, 5]
    for bad in ("", "a", "3..1", "1..", "1.5"):
        with pytest.raises(ConfigError):
            parse_int_list(bad)
    assert parse_float_list("1.5, 1.56") == [1.5, 1.56]
    with pytest.raises(ConfigError):
        parse_float_list("x")


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig("ed", thetas=[2.0], ells=[1]).validate()
    with pytest.raises(ConfigError):
        RunConfig("excite", thetas=[1.0], cells=[7]).validate()
    with pytest.raises(ConfigError):
        RunConfig("ed", thetas=[1.0], ells=[1], epsilon=-1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig("sweep-theta", thetas=[np.pi / 2], cells=[1]).validate()
    assert RunConfig("fidelity", thetas=[0.0], ells=[1]).validate().command == "fidelity"


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["ed", "--theta", "1.56"],
    ["ed", "--theta", "1.9", "--ell", "1"],
    ["ed", "--theta", "1.56", "--ell", "0"],
    ["ed", "--theta", "1.56", "--ell", "2..1"],
    ["excite", "--theta", "1.56", "--cells", "1", "--phi", "4"],
    ["fidelity", "--theta", "1.56", "--ell", "1", "--epsilon", "0"],
    ["sweep-theta", "--cells", "1", "--infidelity", "1.5"],
    ["appendix-check", "--theta", "1.0"],
])
def test_config_errors_exit_2(argv, capsys):
    assert run(argv) == 2
    err = capsys.readouterr().err
    assert err.startswith("telegap: error:")
    assert err.count("\n") == 1


def test_solver_failure_exit_3(capsys):
    assert run(["ed", "--theta", "1.3", "--ell", "2", "--tol", "1e-30"]) == 3
    assert "did not converge" in capsys.readouterr().err


def test_ed_gap_table(tmp_path, capsys):
    out, plot = tmp_path / "ed.csv", tmp_path / "ed.dat"
    assert run(["ed", "--theta", "1.56", "--ell", "1..3", "--k", "6", "--out", str(out),
                "--plot-out", str(plot)]) == 0
    assert capsys.readouterr().out.count("ell=") == 3
    rows = _rows(out)
    assert [int(r["ell"]) for r in rows] == [1, 2, 3]
    for r in rows:
        assert float(r["gap"]) == pytest.approx(GOLDEN_GAPS[int(r["ell"])], abs=1e-12)
        assert int(r["degeneracy"]) == 3
    for line in plot.read_text().splitlines():
        if line and not line.startswith("#"):
            assert len(line.split()) in (2, 3)


def test_epsilon_rescales_only_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["ed", "--theta", "1.2", "--ell", "1..2", "--out", str(a)]) == 0
    assert run(["ed", "--theta", "1.2", "--ell", "1..2", "--epsilon", "3", "--out", str(b)]) == 0
    ga = [float(r["gap"]) for r in _rows(a)]
    gb = [float(r["gap"]) for r in _rows(b)]
    np.testing.assert_allclose(gb, ga, rtol=1e-10)
    assert "epsilon=3" in b.read_text().splitlines()[0]


def test_fidelity_table(tmp_path):
    out = tmp_path / "fid.csv"
    assert run(["fidelity", "--theta", "1.56", "--ell", "1..50", "--out", str(out)]) == 0
    rows = _rows(out)
    w = [float(r["bell_weight"]) for r in rows]
    assert len(w) == 50
    assert w[0] > 0.9995
    assert all(x > y for x, y in zip(w, w[1:]))


def test_excite_example(tmp_path, capsys):
    out = tmp_path / "ex.csv"
    assert run(["excite", "--theta", "1.56", "--cells", "1,2", "--phi", "0", "--out", str(out)]) == 0
    rows = _rows(out)
    gaps = {int(r["m"]): float(r["gap"]) for r in rows}
    assert gaps[1] == pytest.approx(1.3e-11, rel=0.15)
    assert gaps[2] == pytest.approx(5.1e-12, rel=0.15)
    for m, g in VARIATIONAL_GAPS.items():
        assert gaps[m] == pytest.approx(g, rel=1e-9)
    assert all(int(r["degeneracy"]) == 3 for r in rows)
    assert capsys.readouterr().out.count("m=") == 2


def test_scan_cells_and_sweep(tmp_path, capsys):
    plot = tmp_path / "cells.dat"
    assert run(["scan-cells", "--theta", "1.56", "--cells", "1..2", "--plot-out", str(plot)]) == 0
    assert "embedding monotonicity: ok" in capsys.readouterr().out
    assert "# m gap inv_m2" in plot.read_text()
    out = tmp_path / "sweep.csv"
    assert run(["sweep-theta", "--cells", "1", "--infidelity", "1e-2,1e-3", "--out", str(out)]) == 0
    rows = _rows(out)
    np.testing.assert_allclose([1 - float(r["f_theta"]) for r in rows], [1e-2, 1e-3], rtol=1e-9)


def test_model_dump(tmp_path):
    out = tmp_path / "model.json"
    assert run(["model", "--theta", "1.56", "--ell", "2", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["units"] == "epsilon"
    assert len(doc["terms"]) == 5


def test_appendix_check(tmp_path, capsys):
    assert run(["appendix-check"]) == 0
    vals = [float(x) for x in capsys.readouterr().out.split(":")[1].split()]
    assert min(vals) > 1 - 1e-6


@pytest.mark.parametrize("argv", [
    ["ed", "--theta", "1.3", "--ell", "1..3"],
    ["excite", "--theta", "1.56", "--cells", "1,2"],
    ["sweep-theta", "--cells", "1", "--theta", "1.4,1.5"],
])
def test_deterministic_csv_is_byte_stable(tmp_path, argv):
    blobs = []
    for i, threads in enumerate(("1", "1", "2")):
        out = tmp_path / f"run{i}.csv"
        assert run(argv + ["--deterministic", "--threads", threads, "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "telegap.cli", "fidelity", "--theta", "0.7854", "--ell", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "bell_weight=" in proc.stdout
    bad = subprocess.run([sys.executable, "-m", "telegap.cli", "ed"], capture_output=True, text=True, check=False)
    assert bad.returncode == 2
    assert len(bad.stderr.strip().splitlines()) == 1
