import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from patchlab.cli import main
from patchlab.fieldops import build_grid, read_snapshot, write_snapshot
from patchlab.lp_core import holder_norm


@pytest.fixture
def grid():
    return build_grid(2, 2.5, 64)


def _disk_field(grid, tmp_path):
    x, y = grid.mesh()
    r2 = x * x + y * y
    u = np.stack([np.sin(np.pi * x) * (1 - r2), np.cos(np.pi * y) * (1 - r2)])
    path = tmp_path / "u.bin"
    write_snapshot(path, u, grid, 0.5)
    return path, u


def test_analyze_norm_csv(tmp_path, grid):
    x, y = grid.mesh()
    f = np.exp(-8 * (x * x + y * y))
    write_snapshot(tmp_path / "f.bin", f, grid)
    rc = main(["analyze", "norm", "--space", "C:0.5", "--field", str(tmp_path / "f.bin"), "--out",
               str(tmp_path / "n.csv")])
    assert rc == 0
    lines = (tmp_path / "n.csv").read_text().splitlines()
    assert lines[0] == "level,block_norm,weighted"
    weighted = max(float(ln.split(",")[2]) for ln in lines[1:])
    assert weighted == pytest.approx(holder_norm(f, grid, 0.5), rel=1e-12)


def test_analyze_vector_field_has_component_column(tmp_path, grid):
    path, _ = _disk_field(grid, tmp_path)
    assert main(["analyze", "norm", "--space", "B:0.5,2,2", "--field", str(path), "--out",
                 str(tmp_path / "n.csv")]) == 0
    lines = (tmp_path / "n.csv").read_text().splitlines()
    assert lines[0].startswith("component,level")
    assert {ln.split(",")[0] for ln in lines[1:]} == {"0", "1"}


def test_bad_norm_space_is_usage_error(tmp_path, grid):
    path, _ = _disk_field(grid, tmp_path)
    assert main(["analyze", "norm", "--space", "L:2", "--field", str(path)]) == 2


def test_extend_keeps_interior(tmp_path):
    # the extension shell needs room around the unit disk
    grid = build_grid(2, 4.0, 64)
    path, u = _disk_field(grid, tmp_path)
    out = tmp_path / "e.bin"
    rc = main(["extend", "--op", "Pc", "--in", str(path), "--out", str(out), "--report", str(tmp_path / "r.csv")])
    assert rc == 0
    ext = read_snapshot(out)
    assert ext.time == 0.5
    x, y = grid.mesh()
    inside = x * x + y * y < 0.9
    assert np.allclose(ext.values[:, inside], u[:, inside], atol=1e-12)
    assert (tmp_path / "r.csv").read_text().startswith("op,r,")


def test_extend_rejects_scalar_field(tmp_path, grid):
    write_snapshot(tmp_path / "s.bin", np.zeros(grid.shape), grid)
    assert main(["extend", "--op", "P", "--in", str(tmp_path / "s.bin"), "--out", str(tmp_path / "o.bin")]) == 2


def test_velocity_appends_report_rows(tmp_path):
    g = build_grid(2, 2.5, 64)
    x, y = g.mesh()
    om = np.where((x - 0.1) ** 2 + y * y < 0.16, 1.0, 0.0)
    write_snapshot(tmp_path / "om.bin", om, g)
    args = ["velocity", "--omega", str(tmp_path / "om.bin"), "--domain", "disk:1", "--out", str(tmp_path / "v.bin")]
    assert main(args) == 0
    assert main(args) == 0
    v = read_snapshot(tmp_path / "v.bin")
    assert v.ncomp == 2
    rows = (tmp_path / "v.csv").read_text().splitlines()
    assert rows[0].startswith("r,s,lip") and len(rows) == 3 and rows[1] == rows[2]


def test_velocity_domain_mismatch(tmp_path, grid):
    write_snapshot(tmp_path / "om.bin", np.zeros(grid.shape), grid)
    rc = main(["velocity", "--omega", str(tmp_path / "om.bin"), "--domain", "ball:1", "--out", str(tmp_path / "v")])
    assert rc == 2


def test_run_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "mode": "2d",\n  "grid": {\n    "n": 100\n  }\n}\n')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "power of two" in err
    cfg.write_text("")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "usage:" in capsys.readouterr().err


def test_run_seed_override_and_sample_every(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "mode": "axisym", "domain": {"kind": "cylinder"}, "grid": {"nr": 16, "nz": 32},
        "patch": {"kind": "ring", "center": [1.0, -0.5], "radius": 0.3},
        "integrator": {"t_end": 0.5, "dt_factor": 0.9},
    }))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "7", "--sample-every", "1"]) == 0
    echo = json.loads((out / "config.json").read_text())
    assert echo["seed"] == 7 and echo["integrator"]["sample_every"] == 1
    assert json.loads((out / "status.json").read_text())["completed"] is True
    assert main(["run", "--config", str(cfg), "--out", str(out), "--sample-every", "0"]) == 2


def test_scenarios_lists_builtins(capsys):
    assert main(["scenarios"]) == 0
    names = [ln.split("\t")[0] for ln in capsys.readouterr().out.splitlines()]
    assert "rankine-disk" in names and "desk-3d" in names


def test_verify_unknown_suite():
    assert main(["verify", "nope"]) == 2


def test_verify_lp_fast_json(capsys):
    assert main(["verify", "lp", "--fast", "--json"]) == 0
    checks = [json.loads(ln) for ln in capsys.readouterr().out.splitlines()]
    assert checks and all(c["passed"] and c["suite"] == "lp" for c in checks)


@pytest.mark.skipif(shutil.which("patchlab") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["patchlab", "scenarios"], capture_output=True, text=True)
    assert res.returncode == 0 and "kirchhoff-free" in res.stdout
    res = subprocess.run([sys.executable, "-m", "patchlab.cli", "verify"], capture_output=True, text=True)
    assert res.returncode == 2
