import json

import numpy as np
import pytest

from patchlab.config import BUILTINS, builtin, load_config, parse_config, stream
from patchlab.errors import ConfigurationError, StepError
from patchlab.scenario import run_scenario

SMALL = {"grid": {"n": 64, "diagnostics_n": 64, "particles_n": 64},
         "integrator": {"t_end": 0.3, "sample_every": 2}}


def _text(**sections):
    data = {"schema": "patchlab/1", "mode": "2d", "patch": {"kind": "circle", "center": [0.0, 0.0], "radius": 0.5}}
    data.update(sections)
    return json.dumps(data, indent=2)


def test_minimal_config_fills_defaults():
    cfg = parse_config(_text())
    assert cfg.grid.n == 256 and cfg.system.s == 0.5 and cfg.seed == 0


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_roundtrip(name):
    cfg = load_config(f"builtin:{name}")
    assert cfg.name == name
    assert parse_config(cfg.to_json()) == cfg


def test_unknown_key_reports_its_line():
    text = _text(grid={"n": 64, "resolution": 3})
    with pytest.raises(ConfigurationError) as err:
        parse_config(text)
    line = next(i for i, ln in enumerate(text.splitlines(), 1) if "resolution" in ln)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_bad_grid_size_reports_its_line():
    text = _text(grid={"extent": 2.5, "n": 100})
    with pytest.raises(ConfigurationError) as err:
        parse_config(text)
    assert "power of two" in str(err.value)
    assert err.value.line == next(i for i, ln in enumerate(text.splitlines(), 1) if '"n"' in ln)


@pytest.mark.parametrize("text,needle", [
    ("", "empty"),
    ("{", "invalid JSON"),
    ("[]", "non-empty JSON object"),
    ('{"mode": "4d"}', "mode"),
    ('{"patch": {"r": 1.5}}', "patch.r"),
    ('{"integrator": {"dt_factor": 2}}', "dt_factor"),
    ('{"mode": "free-space", "domain": {"kind": "window"}, "patch": {"kind": "circle", "radius": 0.2, "outer": 1}}',
     "exterior"),
])
def test_invalid_configs(text, needle):
    with pytest.raises(ConfigurationError, match=needle):
        parse_config(text)


def test_unknown_builtin_and_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config("builtin:nope")
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / "none.json"))


def test_streams_are_independent_and_reproducible():
    a = stream(1, "holder-pairs").random(5)
    assert np.array_equal(a, stream(1, "holder-pairs").random(5))
    assert not np.array_equal(a, stream(1, "lp-corpus").random(5))
    assert not np.array_equal(a, stream(2, "holder-pairs").random(5))


# -- runs ---------------------------------------------------------------------------


def test_run_directory_layout_and_determinism(tmp_path):
    cfg = builtin("rankine-disk", **SMALL)
    a = run_scenario(cfg, tmp_path / "a")
    b = run_scenario(cfg, tmp_path / "b")
    assert a.completed and a.exit_code == 0
    for name in ("config.json", "timeseries.csv", "envelope.csv", "status.json"):
        assert (tmp_path / "a" / name).is_file()
    assert (tmp_path / "a" / "timeseries.csv").read_bytes() == (tmp_path / "b" / "timeseries.csv").read_bytes()
    assert parse_config((tmp_path / "a" / "config.json").read_text()) == cfg
    status = json.loads((tmp_path / "a" / "status.json").read_text())
    assert status["partial"] is False and status["samples"] == len(a.rows)
    header = (tmp_path / "a" / "timeseries.csv").read_text().splitlines()[0]
    assert header.split(",")[:3] == ["t", "lip", "omega_sup"]
    assert any(p.name.startswith("omega_") for p in (tmp_path / "a" / "snapshots").iterdir())


def test_refused_step_gives_partial_run(tmp_path, monkeypatch):
    import patchlab.dynamics.runner as runner

    real = runner.advance
    calls = {"n": 0}

    def flaky(state, *args, **kw):
        calls["n"] += 1
        if calls["n"] > 2:
            raise StepError("CFL limit exceeded")
        return real(state, *args, **kw)

    monkeypatch.setattr(runner, "advance", flaky)
    out = run_scenario(builtin("rankine-disk", **SMALL), tmp_path)
    assert not out.completed and out.exit_code == 3
    status = json.loads((tmp_path / "status.json").read_text())
    assert status["partial"] is True and "CFL" in status["error"]
    assert status["steps"] == 2


def test_axisym_run_writes_bound(tmp_path):
    cfg = builtin("axisym-ring", grid={"nr": 16, "nz": 32}, integrator={"t_end": 1.0, "sample_every": 1})
    out = run_scenario(cfg, tmp_path)
    assert out.completed and out.extras["bound_holds"]
    lines = (tmp_path / "axisym.csv").read_text().splitlines()
    assert lines[0] == "t,omega_sup,bound,holds" and all(ln.endswith(",1") for ln in lines[1:])
