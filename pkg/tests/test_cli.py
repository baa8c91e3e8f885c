import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from gmt_trace_lab import cli
from gmt_trace_lab.reports import SCHEMA, csv_text

ROOT = Path(__file__).resolve().parents[1]
SCENES = ROOT / "scenes"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    doc = json.loads(out)
    assert doc["schema"] == SCHEMA
    return doc


SMOKE = {
    "voxelize": ["voxelize", "--scene", "builtin:disk", "--h", "0.05"],
    "density": ["density", "--scene", SCENES / "halfspace.json", "--point", "0,0,0", "--samples", "2000"],
    "classify": ["classify", "--scene", "builtin:disk", "--h", "0.05", "--n", "10", "--samples", "2000"],
    "geodesic": ["geodesic", "--scene", "builtin:unit-square", "--h", "0.05", "--alpha", "0.5",
                 "--pairs", "0.2,0.5:0.8,0.5", "--random", "5"],
    "wireframe-report": ["wireframe-report", "--c", "5", "--p", "9,12", "--q", "9,18"],
    "witness": ["witness", "--domain", "forest", "--p", "2"],
    "survey2d": ["survey2d", "--scene", "builtin:disk", "--h", "0.02", "--n", "20", "--samples", "2000"],
    "capacity": ["capacity", "--scene", "builtin:unit-square", "--set", "SET", "--p", "2", "--h", "0.05"],
    "rough-trace": ["rough-trace", "--scene", "builtin:unit-square", "--h", "0.0625",
                    "--bbox", "0,0:1,1", "--u", "step:0:0.5", "--point", "0,0.5"],
}


@pytest.fixture
def set_file(tmp_path):
    p = tmp_path / "set.json"
    p.write_text(json.dumps({"region": {"type": "ball", "center": [0.5, 0.5], "radius": 0.2}}))
    return p


@pytest.mark.parametrize("name", sorted(SMOKE))
def test_smoke_every_subcommand(name, capsys, set_file, tmp_path):
    argv = [set_file if a == "SET" else a for a in SMOKE[name]]
    doc = run_json(capsys, *argv)
    assert doc["kind"] == name
    code, _, err = run(capsys, *argv, "--out", tmp_path / "o")
    assert code == 0, err
    files = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert f"{name}.json" in files and f"{name}.csv" in files
    raw = (tmp_path / "o" / f"{name}.csv").read_bytes()
    assert raw.endswith(b"\r\n")
    rows = list(csv.reader(io.StringIO(raw.decode())))
    assert len(rows) >= 2 and all(len(r) == len(rows[0]) for r in rows)


def test_wireframe_report_values(capsys):
    doc = run_json(capsys, *SMOKE["wireframe-report"])
    crit = {r["p"]: r for r in doc["criteria"]}
    assert crit[9]["nonunique"] is True and crit[12]["unique"] is True
    integ = {(r["p"], r["q"]): r["integrable"] for r in doc["integrability"]}
    assert integ[(9, 9)] is True and integ[(9, 18)] is False
    assert doc["p0_window"]["lo"] == 9 and doc["p0_window"]["hi"] == 11


def test_density_halfspace_converges(capsys):
    doc = run_json(capsys, *SMOKE["density"])
    assert doc["verdict"] == "converged" and abs(doc["limit"] - 0.5) < 0.01
    assert doc["verdict_text"].startswith("converged-to ")


def test_exit_codes(capsys, tmp_path):
    code, _, err = run(capsys, "density", "--scene", tmp_path / "missing.json", "--point", "0,0")
    assert code == 2 and "missing.json" in err
    assert run(capsys, "density", "--scene", "builtin:disk", "--bogus")[0] == 64
    assert run(capsys, "nope")[0] == 64
    assert run(capsys, "geodesic", "--scene", "builtin:disk", "--h", "0.1", "--p", "2", "--random", "3")[0] == 2
    code, _, err = run(capsys, "voxelize", "--scene", "builtin:disk", "--h", "0.001", "--voxel-budget", "1000")
    assert code == 3 and "budget" in err
    bad = tmp_path / "bad.json"
    bad.write_text('{"domain": {"type": "ball", "center": [0, 0], "radius": -1}}')
    code, _, err = run(capsys, "voxelize", "--scene", bad, "--h", "0.1")
    assert code == 2 and "$.domain" in err
    code, _, err = run(capsys, "survey2d", "--scene", "builtin:two-disks", "--h", "0.05", "--n", "5")
    assert code == 2 and "connected" in err
    code, _, err = run(capsys, "witness", "--scene", "builtin:disk", "--p", "2")
    assert code == 2


def test_csv_flag_and_quoting(capsys):
    code, out, _ = run(capsys, *SMOKE["geodesic"], "--csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["x", "y", "alpha", "d_alpha", "euclid", "ratio"]
    assert csv_text(["a"], [['he said "hi", ok']]) == 'a\r\n"he said ""hi"", ok"\r\n'


def _csv_bytes(tmp_path, tag, *argv):
    out = tmp_path / tag
    assert cli.main([str(a) for a in argv] + ["--out", str(out)]) == 0
    return {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}


@pytest.mark.parametrize("name", ["classify", "survey2d", "geodesic", "rough-trace"])
def test_reproducible_and_worker_independent(name, tmp_path, capsys):
    argv = SMOKE[name]
    a = _csv_bytes(tmp_path, "a", *argv)
    b = _csv_bytes(tmp_path, "b", *argv)
    c = _csv_bytes(tmp_path, "c", *argv, "--workers", "3")
    assert a == b == c and a
    capsys.readouterr()


def test_slit_scene_file_resolves_slit(capsys):
    doc = run_json(capsys, "classify", "--scene", SCENES / "slit.json", "--points", "0.5,0.5;0.3,0.5",
                   "--samples", "2000")
    assert doc["labels"] == ["density-1", "density-1"]


def test_module_entry_point():
    env = dict(os.environ, PYTHONPATH=str(ROOT / "src"))
    res = subprocess.run([sys.executable, "-m", "gmt_trace_lab", "wireframe-report", "--c", "3", "--p", "5"],
                         capture_output=True, text=True, env=env, timeout=60)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["schema"] == SCHEMA
