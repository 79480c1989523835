import json

import numpy as np
import pytest

from torwave.config import ConfigError, RunConfig, build_config, load_config_file
from torwave.geometry import FieldGrid, periodic_nodes
from torwave.io import read_field, strip_runtime, write_csv, write_field, write_json


def test_json_writer_handles_numpy_and_special_values(tmp_path):
    path = write_json(tmp_path / "x.json", {"a": np.float64(0.1), "b": np.arange(3), "c": np.bool_(True),
                                            "d": float("inf"), "e": 1 + 2j, "f": (1, 2)})
    back = json.loads(path.read_text())
    assert back == {"a": 0.1, "b": [0, 1, 2], "c": True, "d": "inf", "e": {"re": 1.0, "im": 2.0}, "f": [1, 2]}


def test_strip_runtime_is_recursive():
    payload = {"runtime_s": 1.0, "rows": [{"runtime_ms": 3, "x": 1}], "nested": {"runtime_s": 2, "y": 2}}
    assert strip_runtime(payload) == {"rows": [{"x": 1}], "nested": {"y": 2}}


def test_csv_uses_round_trip_float_text(tmp_path):
    val = 0.1 + 0.2
    path = write_csv(tmp_path / "x.csv", ["v"], [[val], [np.float64(val)]])
    lines = path.read_text().splitlines()
    assert lines == ["v", repr(val), repr(val)]
    assert float(lines[1]) == val


def test_field_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    grid = FieldGrid(rng.normal(size=(4, 6, 5)), periodic_nodes(4, -np.pi), periodic_nodes(6),
                     np.linspace(0.5, 1.0, 5), 0.25, {"t": 0.25})
    write_field(tmp_path / "f.csv", grid)
    back = read_field(tmp_path / "f.csv")
    assert np.array_equal(back.values, grid.values)
    assert np.array_equal(back.tau, grid.tau)
    assert np.array_equal(back.phi1, grid.phi1)
    assert back.time_stamp == 0.25 and back.meta == {"t": 0.25}


def test_config_defaults_and_layering(tmp_path, monkeypatch):
    monkeypatch.delenv("TORWAVE_OUTPUT_DIR", raising=False)
    assert build_config().to_dict() == RunConfig().to_dict()
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"h": 0.1, "extra_option": 3}))
    cfg = build_config(path, {"h": 0.02, "seed": None})
    assert cfg.h == 0.02 and cfg.seed == 0
    assert cfg.options == {"extra_option": 3}
    monkeypatch.setenv("TORWAVE_OUTPUT_DIR", str(tmp_path / "o"))
    assert build_config().output_dir == str(tmp_path / "o")


def test_toml_sections_are_flattened(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[truncation]\nm_max = 4\n[cutoffs]\nb = 7.0\n")
    assert load_config_file(path) == {"m_max": 4, "b": 7.0}


@pytest.mark.parametrize("bad", [{"r": 2.0, "R": 1.0}, {"b": 4.0}, {"h": 1.5}, {"eps0": 0.0},
                                 {"threads": 0}, {"m_max": -1}, {"k_max": 0.0}])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        build_config(overrides=bad)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "absent.toml")
