import json
import os
from pathlib import Path

import pytest

from roughsing import io as rio

MIN = {"Omega": {"type": "harmonic", "m": 2}}


def test_minimal_config_gets_defaults():
    cfg = rio.parse_config(MIN)
    assert cfg["c_n"] == 1.0
    assert cfg["tolerances"] == rio.DEFAULT_TOLERANCES
    assert cfg["grid"] == {"n": 2, "M": 256, "L": 8.0}
    assert cfg["b"]["direction"] == [1.0, 0.0]
    assert cfg["experiment"]["name"] == "decay"
    assert cfg["Omega"]["S"] == 64 and cfg["Omega"]["project"] is False


@pytest.mark.parametrize("data,field", [
    ({}, "Omega"),
    ({"Omega": {"type": "harmonic", "m": 2}, "colour": 1}, "<root>.colour"),
    ({"Omega": {"type": "harmonic", "m": 2, "x": 1}}, "Omega.x"),
    ({"Omega": {"type": "harmonic"}}, "Omega.m"),
    ({"Omega": {"type": "blob"}}, "Omega.type"),
    ({**MIN, "grid": {"M": 100}}, "grid.M"),
    ({**MIN, "grid": {"n": 3}}, "grid.n"),
    ({**MIN, "weight": {"type": "power"}}, "weight.alpha"),
    ({**MIN, "experiment": {"name": "decay", "jmaxx": 2}}, "experiment.jmaxx"),
    ({**MIN, "experiment": {"name": "nope"}}, "experiment.name"),
    ({**MIN, "seed": -1}, "seed"),
    ({**MIN, "c_n": 0}, "c_n"),
    ({**MIN, "schedule": [1, 2]}, "schedule"),
    ({**MIN, "krange": [2, 1]}, "krange"),
    ({**MIN, "tolerances": {"slope": 1}}, "tolerances.slope"),
    ({**MIN, "b": {"type": "linear", "direction": [1.0]}}, "b.direction"),
])
def test_schema_errors_name_the_field(data, field):
    with pytest.raises(rio.ConfigError) as exc:
        rio.parse_config(data)
    assert str(exc.value).startswith(field)


def test_duplicate_key(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"Omega": {"type": "harmonic", "m": 2}, "seed": 1, "seed": 2}')
    with pytest.raises(rio.ConfigError, match="duplicate"):
        rio.load_config(p)


def test_bad_json_and_missing_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    with pytest.raises(rio.ConfigError, match="invalid JSON"):
        rio.load_config(p)
    with pytest.raises(rio.ConfigError, match="cannot read"):
        rio.load_config(tmp_path / "none.json")


def test_config_roundtrip(tmp_path):
    cfg = rio.load_config(_write(tmp_path, {**MIN, "seed": 7, "weight": {"type": "power", "alpha": 0.3}}))
    out = tmp_path / "eff.json"
    rio.write_config(cfg, out)
    again = rio.load_config(out)
    assert again == cfg and again.hash == cfg.hash


def test_overrides_and_experiment_selection(tmp_path):
    cfg = rio.load_config(_write(tmp_path, MIN), "scaling", {"grid": {"M": 64}})
    assert cfg.experiment == "scaling" and cfg["grid"]["M"] == 64 and cfg["grid"]["L"] == 8.0
    assert cfg.resolve("x.csv") == tmp_path / "x.csv"


def test_hash_ignores_key_order():
    a = rio.RunConfig(rio.parse_config({"seed": 1, **MIN}))
    b = rio.RunConfig(rio.parse_config({**MIN, "seed": 1}))
    assert a.hash == b.hash


def _write(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def _record(rows=(), kind="decay", fits=None):
    cfg = rio.RunConfig(rio.parse_config(MIN))
    if fits is None:
        fits = {"decay": {"slope": -1.0, "intercept": 0.5}}
    return rio.RunRecord(cfg, ["j", "N_prev", "norm"], rows, fits, kind=kind)


def test_record_files(tmp_path):
    rec = _record([{"j": 2, "N_prev": 2, "norm": 0.5}, {"j": 1, "N_prev": 0, "norm": 1.0}])
    paths = rio.write_record(rec, tmp_path / "run")
    lines = paths["csv"].read_text().splitlines()
    assert lines == ["j,N_prev,norm", "1,0,1.0", "2,2,0.5"]
    man = json.loads(paths["manifest"].read_text())
    for key in ("config_hash", "seed", "timestamp", "code_version", "backend", "config", "fits"):
        assert key in man
    assert "set logscale y" in paths["plot"].read_text()
    assert not [p for p in (tmp_path / "run").iterdir() if p.name.endswith(".tmp")]


def test_empty_rows_header_only(tmp_path):
    paths = rio.write_record(_record(kind=None), tmp_path)
    assert paths["csv"].read_text() == "j,N_prev,norm\n"
    assert "plot" not in paths


def test_rerun_is_byte_identical(tmp_path):
    rows = [{"j": 1, "N_prev": 0, "norm": 0.1 + 0.2}]
    a = rio.write_record(_record(rows), tmp_path / "a")
    b = rio.write_record(_record(rows), tmp_path / "b")
    assert a["csv"].read_bytes() == b["csv"].read_bytes()
    ma, mb = (json.loads(p["manifest"].read_text()) for p in (a, b))
    ma.pop("timestamp"), mb.pop("timestamp")
    assert ma == mb


def test_unwritable_target(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        rio.write_record(_record(), blocker / "sub")


def test_atomic_write_leaves_old_file_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "t.txt"
    target.write_text("old")

    def boom(*a):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        rio._atomic_write(target, "new")
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["t.txt"]


def test_plot_scripts():
    cfg = rio.RunConfig(rio.parse_config(MIN))
    sc = rio.RunRecord(cfg, ["alpha", "ap", "norm"], [], {"scaling": {"slope": 1.0, "intercept": 0.2}})
    text = rio.emit_plot_script(sc, "scaling")
    assert "set logscale xy" in text and "x**2" in text and "'results.csv'" in text
    mul = rio.RunRecord(cfg, ["side", "i", "k", "max_abs"], [], {"multiplier-high": {"slope": 2}})
    assert "strcol(1) eq 'high'" in rio.emit_plot_script(mul, "multiplier")
    with pytest.raises(ValueError, match="columns"):
        rio.emit_plot_script(rio.RunRecord(cfg, ["alpha", "norm"], [], {"scaling": {}}), "scaling")
    with pytest.raises(ValueError, match="fit"):
        rio.emit_plot_script(rio.RunRecord(cfg, ["ap", "norm"], []), "scaling")
    with pytest.raises(ValueError):
        rio.emit_plot_script(sc, "pie")


def test_code_version_nonempty():
    assert rio.code_version()
