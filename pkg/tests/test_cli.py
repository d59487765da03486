import json
import subprocess
import sys

import pytest

from bandgap_forge.cli import run
from bandgap_forge.io import load_json, read_csv

VACUUM = {"lattice": {"a1": [1, 0], "a2": [0, 1]}, "centers": [], "lambdas": [], "coefficients": [],
          "shape": {"kind": "disk", "params": [1]}, "r": 0}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def crystal(tmp_path_factory):
    d = tmp_path_factory.mktemp("design")
    assert run(["design", "--in", write(d / "in.json", {"targets": [1.0]}), "--out", str(d)]) == 0
    return d / "crystal.json"


def test_design_outputs(crystal, capsys):
    spec = load_json(crystal)
    assert set(spec) == {"metadata", "lattice", "centers", "lambdas", "coefficients", "shape", "r"}
    assert spec["metadata"]["config"]["command"] == "design"
    report = load_json(crystal.with_name("design_report.json"))
    assert report["verified"] is True


def test_certify_vacuum_exit_1(tmp_path, capsys):
    code = run(["certify-tm", "--in", write(tmp_path / "v.json", VACUUM), "--out", str(tmp_path), "--grid", "2",
                "--mesh", "16"])
    assert code == 1
    assert "no gap" in capsys.readouterr().out
    assert load_json(tmp_path / "certificate_r0.json")["passed"] is False


def test_usage_errors(tmp_path, capsys):
    assert run(["design", "--bogus"]) == 2
    assert "usage:" in capsys.readouterr().err
    assert run(["nonsense"]) == 2
    assert run(["design", "--in", str(tmp_path / "missing.json")]) == 2
    assert run(["design", "--in", write(tmp_path / "b.json", {"targets": [1.0], "colour": 1})]) == 2
    assert run(["bands", "--in", write(tmp_path / "c.json", {**VACUUM, "run": {"kind": "XX"}})]) == 2
    assert run(["bands", "--in", write(tmp_path / "d.json", VACUUM), "--mesh", "3"]) == 2
    assert run(["converge", "--in", write(tmp_path / "e.json", VACUUM), "--r-list", "0.1,abc"]) == 2
    (tmp_path / "f.json").write_text("{not json")
    assert run(["design", "--in", str(tmp_path / "f.json")]) == 2


def test_jobs_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("BANDGAP_FORGE_JOBS", "0")
    assert run(["selfenergy", "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("BANDGAP_FORGE_JOBS", "2")
    assert run(["selfenergy", "--out", str(tmp_path)]) == 0
    assert load_json(tmp_path / "selfenergy.json")["metadata"]["config"]["jobs"] == 2


def test_help_documents_columns(capsys):
    assert run(["bands", "--help"]) == 0
    out = capsys.readouterr().out
    assert "theta_index, s1, s2, band, value, err" in out
    assert run(["converge", "--help"]) == 0
    assert "r, inv_log_r, resolvent_error, F_error, C_error" in capsys.readouterr().out


def test_gfun_and_edges(tmp_path):
    assert run(["gfun", "--in", write(tmp_path / "g.json", {"E": [-1.0, 2.0]}), "--out", str(tmp_path),
                "--grid", "2"]) == 0
    cols, rows, header = read_csv(tmp_path / "gfun.csv")
    assert cols == ["E", "theta1", "theta2", "g", "dg_dE"] and len(rows) == 8
    assert header[1].startswith("# config:")
    assert run(["edges", "--in", write(tmp_path / "e.json", {"alpha": 0.0}), "--out", str(tmp_path)]) == 0
    e = load_json(tmp_path / "edges.json")
    assert e["edges"]["E0"] < 0 < e["edges"]["E2"] and e["has_gap"] is True


def test_bands_script_and_png(crystal, tmp_path):
    out = tmp_path / "b"
    args = ["bands", "--in", str(crystal), "--out", str(out), "--grid", "3", "--mesh", "32", "--bands", "3"]
    assert run(args) == 0
    cols, rows, _ = read_csv(out / "bands_tm.csv")
    assert cols == ["theta_index", "s1", "s2", "band", "value", "err"] and len(rows) == 27
    assert (out / "bands_tm.png").read_bytes()[:4] == b"\x89PNG"
    script = out / "plot_bands_tm.py"
    assert script.read_text().splitlines()[1].startswith("# config:")
    subprocess.run([sys.executable, str(script), str(tmp_path / "re.png")], check=True)
    assert (tmp_path / "re.png").exists()
    # identical config -> identical bytes
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert run(args) == 0
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}
    assert run(["gaps", "--in", str(crystal), "--out", str(out), "--grid", "3", "--mesh", "32", "--bands", "3"]) == 0
    assert any(a < 1.0 < b for a, b in load_json(out / "gaps.json")["gaps"])


def test_converge_outputs(crystal, tmp_path):
    assert run(["converge", "--in", str(crystal), "--out", str(tmp_path), "--r-list", "0.1,0.05,0.02"]) == 0
    cols, rows, _ = read_csv(tmp_path / "converge.csv")
    assert cols == ["r", "inv_log_r", "resolvent_error", "F_error", "C_error", "fitted_kappa"]
    assert len(rows) == 3
    assert (tmp_path / "converge.png").exists()


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "bandgap_forge", "selfenergy", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert p.returncode == 0 and p.stdout.startswith("selfenergy: C=-2.467401100")
    p = subprocess.run([sys.executable, "-m", "bandgap_forge", "--nope"], capture_output=True, text=True)
    assert p.returncode == 2 and "usage" in p.stderr
