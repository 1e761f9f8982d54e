import json
import math
import subprocess
import sys

import numpy as np
import pytest

from gikn.cli import main
from gikn.models import builtin, dump_model


def rot(a):
    return [[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]]


def write_matrices(path, mats):
    path.write_text(json.dumps([np.asarray(m).tolist() for m in mats]))
    return str(path)


def data_files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.json"}


def test_spectrum_stdout(capsys):
    assert main(["spectrum", "--model", "builtin:flipflop2", "--word", "001"]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0] == "# command: spectrum"
    assert any(line.startswith("# model: sha256:") for line in lines)
    body = [line for line in lines if not line.startswith("#")]
    assert body[0] == "j,chi_j,L_j"
    chi = [float(r.split(",")[1]) for r in body[1:]]
    assert chi[0] + chi[1] == pytest.approx(math.log(0.25) / 3, abs=1e-14)


def test_spectrum_window_column(tmp_path):
    assert main(["spectrum", "--model", "builtin:flipflop2", "--word", "001", "--window", "30",
                 "--out", str(tmp_path)]) == 0
    text = (tmp_path / "spectrum.csv").read_text()
    assert "L_j_window_30" in text
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "spectrum" and "spectrum.csv" in man["files"]
    assert man["model_sha256"] == builtin("flipflop2").fingerprint


def test_model_file(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(dump_model(builtin("dominated2")))
    assert main(["spectrum", "--model", str(p), "--word", "01", "--out", str(tmp_path / "o")]) == 0


def test_tower_run(tmp_path):
    out = tmp_path / "t"
    assert main(["tower", "--model", "builtin:flipflop2", "--word", "001", "--levels", "3",
                 "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "cylinders.csv", "manifest.json", "report.csv", "tower.csv"]
    report = (out / "report.csv").read_text()
    assert ",fail," not in report and report.count(",pass,") == 7
    cyl = (out / "cylinders.csv").read_text().splitlines()
    assert "level,L,word,frequency" in cyl


def test_tower_base_only(capsys):
    assert main(["tower", "--model", "builtin:flipflop2", "--levels", "0"]) == 0
    assert "base,0,pass" in capsys.readouterr().out


def test_tower_infeasible(capsys):
    assert main(["tower", "--model", "builtin:dominated2", "--levels", "2"]) == 2
    assert "infeasible at level 1" in capsys.readouterr().err


def test_tower_failed_verification(capsys):
    # a tolerance no finite tower meets
    assert main(["tower", "--model", "builtin:flipflop2", "--levels", "2", "--tol", "1e-9"]) == 2
    cap = capsys.readouterr()
    assert "c,,fail," in cap.out and "verification failed" in cap.err


def test_equalize(tmp_path):
    m = write_matrices(tmp_path / "mats.json",
                       [np.array(rot(0.04644456609992893)) @ np.diag([1.05, 1 / 1.05])] * 20)
    out = tmp_path / "e"
    assert main(["equalize", "--matrices", m, "--epsilon", "0.05", "--grid", "32",
                 "--out", str(out)]) == 0
    summary = dict(line.split(",") for line in (out / "summary.csv").read_text().splitlines()
                   if not line.startswith("#"))
    assert 0 < float(summary["t_star"]) < 1
    assert float(summary["endpoint_gap"]) < 1e-6
    rows = [r for r in (out / "equalize.csv").read_text().splitlines() if not r.startswith("#")]
    assert rows[0] == "t,chi_1,chi_2" and len(rows) == 33


def test_equalize_refusal_and_budget(tmp_path, capsys):
    dom = write_matrices(tmp_path / "dom.json", [np.diag([0.5, 2.0])] * 20)
    assert main(["equalize", "--matrices", dom, "--epsilon", "0.01"]) == 3
    assert "refused" in capsys.readouterr().err
    m = write_matrices(tmp_path / "m.json",
                       [np.array(rot(0.04644456609992893)) @ np.diag([1.05, 1 / 1.05])] * 20)
    assert main(["equalize", "--matrices", m, "--epsilon", "1e-4"]) == 2


def test_classify(tmp_path, capsys):
    assert main(["classify", "--model", "builtin:pinch3"]) == 0
    assert "label: c" in capsys.readouterr().out
    inv = tmp_path / "inv.txt"
    inv.write_text("0\n1\n")
    assert main(["classify", "--model", "builtin:flipflop2", "--inventory", str(inv)]) == 0
    assert "label: a" in capsys.readouterr().out
    p = tmp_path / "m.json"
    p.write_text(dump_model(builtin("pinch3")))
    assert main(["classify", "--model", str(p)]) == 1


def test_classify_non_hyperbolic_refused(tmp_path):
    p = tmp_path / "m.json"
    doc = json.loads(dump_model(builtin("dominated2")))
    doc["generators"][0] = [[1.0, 0.0], [0.0, 2.0]]
    p.write_text(json.dumps(doc))
    inv = tmp_path / "inv.txt"
    inv.write_text("0")
    assert main(["classify", "--model", str(p), "--inventory", str(inv)]) == 3


@pytest.mark.parametrize("argv", [
    [],
    ["spectrum", "--model", "builtin:nope", "--word", "0"],
    ["spectrum", "--model", "builtin:flipflop2"],
    ["spectrum", "--model", "builtin:flipflop2", "--word", "012"],
    ["spectrum", "--model", "/no/such/file.json", "--word", "0"],
    ["tower", "--model", "builtin:flipflop2", "--levels", "-1"],
    ["tower", "--model", "builtin:flipflop2", "--levels", "x"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1


def test_workers_env(monkeypatch):
    monkeypatch.setenv("GIKN_WORKERS", "zero")
    assert main(["classify", "--model", "builtin:pinch3"]) == 1
    monkeypatch.setenv("GIKN_WORKERS", "4")
    assert main(["classify", "--model", "builtin:pinch3"]) == 0


def test_determinism(tmp_path):
    argv = ["tower", "--model", "builtin:flipflop2", "--levels", "4"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert data_files(a) == data_files(b)
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["files"] == mb["files"]


def test_entry_point():
    r = subprocess.run([sys.executable, "-m", "gikn.cli", "classify", "--model",
                        "builtin:dominated2"], capture_output=True, text=True)
    assert r.returncode == 0 and "label: hyperbolic" in r.stdout
