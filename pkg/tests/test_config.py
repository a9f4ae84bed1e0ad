import math
import textwrap

import numpy as np
import pytest

from rydpulse.config import (ConfigError, GeometryConfig, config_hash, load_config,
                             parse_config, toml_loads)
from rydpulse.pulse import save_pulse
from rydpulse.tables import load_table


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def test_full_config(tmp_path):
    save_pulse(load_table("I")[0].pulse, tmp_path / "cz.toml")
    path = write(tmp_path, """
        [geometry]
        kind = "perfect"
        n_atoms = 2
        [pulse]
        file = "cz.toml"
        [target]
        name = "CZ"
        [objective]
        gamma = 1e-4
        [optimizer]
        restarts = 7
        mode = "time"
        duration_range = [2.0, 5.0]
        [scan]
        deltas = [-0.01, 0.0, 0.01]
        pairs = [[0, 1]]
    """)
    cfg = load_config(path)
    assert cfg.pulse_spec().duration == pytest.approx(7.61140652)
    assert cfg.objective.gamma == 1e-4
    assert cfg.optimizer.restarts == 7 and cfg.optimizer.duration_range == (2.0, 5.0)
    assert cfg.scan.deltas == (-0.01, 0.0, 0.01)
    assert cfg.with_seed(5).optimizer.seed == 5
    assert cfg.with_seed(5).hash != cfg.hash
    assert cfg.with_seed(None) is cfg


def test_defaults_and_hash_is_canonical():
    a = parse_config({"target": {"name": "CZ"}, "geometry": {"kind": "perfect"}})
    b = parse_config({"geometry": {"kind": "perfect"}, "target": {"name": "CZ"}})
    assert a.hash == b.hash
    assert a.scan.restarts == 500
    assert config_hash({"x": 1}) != config_hash({"x": 2})


def test_geometry_keys():
    g = GeometryConfig.from_dict({"v_matrix": [32.0, 0.5, 32.0]})
    assert g.kind == "matrix" and g.n_atoms == 3
    assert g.build().v[0, 2] == 0.5
    g = GeometryConfig.from_dict({"positions": [[0, 0], [1, 0]], "c6_over_hbar_omega0": -32.0})
    assert g.build().v[0, 1] == 32.0
    assert GeometryConfig.from_dict({"positions": [[0, 0], [1, 0]], "c6_over_hbar_omega0": -32.0,
                                     "signed": True}).build().v[0, 1] == -32.0
    g = GeometryConfig.from_dict({"kind": "isosceles", "v_nn": 32, "v_nnn": 4})
    assert g.build().v[0, 2] == pytest.approx(4.0)
    assert GeometryConfig.from_dict({"kind": "line", "n_atoms": 3, "v_nn": 32,
                                     "perfect_blockade": True}).build().perfect_blockade


def test_inline_pulse_and_ansatz_section():
    cfg = parse_config({"pulse": {"ansatz": "antisymmetric", "omega0_T": 1.0, "A1": 0.0,
                                  "alpha1": 0.0}})
    assert cfg.pulse_spec().duration == 1.0
    cfg = parse_config({"ansatz": {"ansatz": "general", "k": 3}})
    assert cfg.pulse.k == 3 and cfg.pulse.ansatz == "general"


def test_g3_target_section():
    cfg = parse_config({"geometry": {"kind": "equilateral", "v_nn": 32},
                        "target": {"name": "mine", "theta": math.pi, "theta_prime": "free",
                                   "lam": 0.0}})
    assert cfg.target.build().free_params == ("phi", "theta_prime")


@pytest.mark.parametrize("data", [
    {"bogus": {}},
    {"geometry": {"kind": "hexagon"}},
    {"geometry": {"kind": "perfect", "colour": 1}},
    {"pulse": {"file": "x.toml"}, "ansatz": {"k": 1}},
    {"target": {"name": "nope"}},
    {"target": {"theta": 1.0}},
    {"objective": {"gamma": -1.0}},
    {"optimizer": {"restarts": 0}},
    {"optimizer": {"learning_rate": 1.0}},
    {"scan": {"restarts": 0}},
    {"geometry": {"kind": "perfect", "n_atoms": 3}, "target": {"name": "CZ"}},
    {"geometry": "perfect"},
    {"geometry": {"v_matrix": [1.0, 2.0]}},
    {"pulse": {"ansatz": "curvy"}},
])
def test_config_errors(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.toml")
    cfg = load_config(write(tmp_path, '[pulse]\nfile = "absent.toml"\n'))
    with pytest.raises(ConfigError):
        cfg.pulse_spec()
    with pytest.raises(ConfigError):
        toml_loads("[[[")
