import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from kleinlab.cli import main

RUNS = {
    "orbit": ["--group", "schottky", "--depth", "4"],
    "delta": ["--group", "schottky", "--depth", "6"],
    "measure": ["--group", "schottky", "--depth", "5", "--alpha", "0.66"],
    "shadow-lemma": ["--group", "schottky", "--depth", "5", "--alpha", "0.66"],
    "escape": ["--group", "cusped", "--ends", "cusped_ends", "--depth", "6", "--alpha", "0.9"],
    "extend": ["--group", "cusped", "--ends", "cusped_ends", "--end", "cusp", "--depth", "5", "--alpha", "0.9"],
    "decompose": ["--group", "cusped", "--ends", "cusped_ends", "--depth", "6", "--alpha", "0.9"],
    "classify": ["--group", "cusped", "--ends", "cusped_ends", "--depth", "6", "--sample", "20"],
}

FILES = {
    "orbit": ["orbit.csv", "limit_set.csv"],
    "delta": ["delta.json", "shells.csv"],
    "measure": ["measure.csv", "conformality.json"],
    "shadow-lemma": ["shadow.json", "ratios.csv"],
    "escape": ["escape.json"],
    "extend": ["extension.csv", "extension.json"],
    "decompose": ["decomposition.json"],
    "classify": ["classify.csv", "classify.json"],
}


def run(tmp_path, command, extra, name="out", workers=1):
    out = tmp_path / name
    code = main([command, *extra, "--out", str(out), "--workers", str(workers)])
    return code, out


def snapshot(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@pytest.mark.parametrize("command", sorted(RUNS))
def test_command_outputs(tmp_path, command, capsys):
    code, out = run(tmp_path, command, RUNS[command])
    assert code == 0
    for name in FILES[command] + ["run.json"]:
        assert (out / name).is_file(), name
    summary = json.loads(capsys.readouterr().out)
    assert json.loads((out / "run.json").read_text())["summary"] == summary


@pytest.mark.parametrize("command", sorted(RUNS))
def test_deterministic_across_workers(tmp_path, command):
    a = run(tmp_path, command, RUNS[command], "a", workers=1)
    b = run(tmp_path, command, RUNS[command], "b", workers=2)
    c = run(tmp_path, command, RUNS[command], "c", workers=1)
    assert a[0] == b[0] == c[0] == 0
    assert snapshot(a[1]) == snapshot(b[1]) == snapshot(c[1])


def test_cyclic_orbit_rows(tmp_path):
    code, out = run(tmp_path, "orbit", ["--group", "cyclic", "--depth", "7"])
    assert code == 0
    rows = list(csv.reader((out / "orbit.csv").open()))
    assert len(rows) - 1 == 2 * 7 + 1


def test_schottky_orbit_rows(tmp_path):
    code, out = run(tmp_path, "orbit", ["--group", "schottky", "--depth", "8"])
    assert code == 0
    rows = (out / "orbit.csv").read_text().splitlines()
    assert len(rows) - 1 == 1 + 2 * (3**8 - 1)


def test_measure_round_trip_through_decompose(tmp_path):
    code, out = run(tmp_path, "measure", ["--group", "cusped", "--depth", "5", "--alpha", "0.9"], "m")
    assert code == 0
    code, dec = run(tmp_path, "decompose", ["--group", "cusped", "--ends", "cusped_ends", "--depth", "5", "--measure", str(out / "measure.csv")], "d")
    assert code == 0
    rep = json.loads((dec / "decomposition.json").read_text())
    assert rep["additivity_error"] <= 1e-12 and rep["disjoint"]


def test_group_file_path(tmp_path):
    from kleinlab import fixtures

    path = tmp_path / "g.json"
    path.write_text(json.dumps(fixtures.cyclic().to_json()))
    code, out = run(tmp_path, "orbit", ["--group", str(path), "--depth", "3"])
    assert code == 0
    assert len((out / "orbit.csv").read_text().splitlines()) == 1 + 7


def test_classify_points_file(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("x1,x2\n0,-1\n0.6,0.8\n")
    code, out = run(tmp_path, "classify", ["--group", "cusped", "--ends", "cusped_ends", "--depth", "8", "--points", str(pts)])
    assert code == 0
    rows = list(csv.DictReader((out / "classify.csv").open()))
    assert rows[0]["verdict"] == "endpoint-like" and rows[0]["end"] == "cusp"
    assert json.loads((out / "classify.json").read_text())["disjointness"]["double_classifications"] == 0


@pytest.mark.parametrize(
    "argv, code",
    [
        (["measure", "--group", "schottky", "--depth", "3"], 3),  # missing alpha
        (["orbit", "--group", "no/such/file.json", "--depth", "3"], 3),
        (["orbit", "--group", "schottky"], 3),  # missing depth
        (["frobnicate", "--group", "schottky"], 3),
        (["orbit", "--group", "schottky", "--depth", "8", "--max-words", "100"], 2),
        (["escape", "--group", "schottky", "--ends", "cusped_ends", "--end", "funnel", "--depth", "8", "--alpha", "0.2"], 4),
        (["escape", "--group", "cusped", "--ends", "cusped_ends", "--end", "nope", "--depth", "3", "--alpha", "0.9"], 3),
    ],
)
def test_exit_codes(tmp_path, argv, code, capsys):
    assert main([*argv, "--out", str(tmp_path / "x")]) == code
    if code:
        assert "kleinlab" in capsys.readouterr().err


def test_console_script(tmp_path):
    out = tmp_path / "s"
    res = subprocess.run(
        [sys.executable, "-m", "kleinlab.cli", "orbit", "--group", "cyclic", "--depth", "2", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["rows"] == 5
