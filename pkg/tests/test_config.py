import json
import logging

import numpy as np
import pytest

from disentangle.config import ConfigError, GenericSystem, config_hash, initial_vector, parse_run_config
from disentangle.twospin import TwoSpinParams

BASE = {
    "system": "twospin",
    "params": {"omega_a": 1.0, "omega_b": 5.0, "omega_1": 0.6, "delta": 0.8, "g": 0.2},
    "initial_state": "bell",
    "disentangler": {"gamma_d": 0.5},
    "integrator": {"t_final": 2.0, "record_every": 0.5},
    "seed": 3,
}


def write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2) if isinstance(doc, dict) else doc)
    return path


def test_parse_twospin(tmp_path):
    cfg, doc = parse_run_config(write(tmp_path, BASE))
    assert cfg.frame == "double"
    assert isinstance(cfg.params, TwoSpinParams) and cfg.params.gamma_d == 0.5
    assert cfg.integrator.t_final == 2.0
    assert np.allclose(cfg.initial_state, [1, 0, 0, 1] / np.sqrt(2))
    assert doc == BASE


def test_hash_is_canonical():
    shuffled = dict(reversed(list(BASE.items())))
    assert config_hash(shuffled) == config_hash(BASE)
    assert config_hash({**BASE, "seed": 4}) != config_hash(BASE)


@pytest.mark.parametrize("entry,expected", [
    ("product:01", [0, 1, 0, 0]),
    ("plus-x", [0.5, 0.5, 0.5, 0.5]),
    ([1, 0, 0, [0, 1]], np.array([1, 0, 0, 1j]) / np.sqrt(2)),
])
def test_initial_presets(entry, expected):
    assert np.allclose(initial_vector(entry, "twospin", (2, 2), 0), expected)


def test_random_preset_is_seeded():
    a = initial_vector("random", "generic", (3, 2), 11)
    assert np.array_equal(a, initial_vector("random", "generic", (3, 2), 11))
    assert np.linalg.norm(a) == pytest.approx(1.0)


def test_renormalization_warns(caplog):
    with caplog.at_level(logging.WARNING):
        v = initial_vector([1, 0, 0, 1], "twospin", (2, 2), 0)
    assert "renormalized" in caplog.text
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_truncated_initial():
    assert np.allclose(initial_vector("plus-x", "twospin-truncated", (2, 2), 0),
                       [1 / np.sqrt(2), 1 / np.sqrt(2)])
    assert np.allclose(initial_vector([0.6, 0.8], "twospin-truncated", (2, 2), 0), [0.6, 0.8])
    with pytest.raises(ConfigError, match="b = c = 0"):
        initial_vector("product:01", "twospin-truncated", (2, 2), 0)


def test_generic_inline_and_file(tmp_path):
    h = np.diag([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    np.save(tmp_path / "h.npy", h)
    doc = {"system": "generic", "params": {"n1": 2, "n2": 3, "hamiltonian_file": "h.npy"},
           "initial_state": "random"}
    cfg, _ = parse_run_config(write(tmp_path, doc))
    assert isinstance(cfg.params, GenericSystem)
    assert np.array_equal(cfg.params.hamiltonian, h)
    doc["params"] = {"n1": 2, "n2": 2, "hamiltonian": {"real": np.eye(4).tolist(),
                                                      "imag": np.zeros((4, 4)).tolist()}}
    cfg, _ = parse_run_config(write(tmp_path, doc))
    assert cfg.params.hamiltonian.shape == (4, 4)


@pytest.mark.parametrize("mutate,match", [
    (lambda d: d.update(system="spin"), "system"),
    (lambda d: d.update(frame="sideways"), "frame"),
    (lambda d: d["params"].update(g="big"), "params.g"),
    (lambda d: d["params"].pop("g"), "missing"),
    (lambda d: d.update(initial_state="product:05"), "out of range"),
    (lambda d: d.update(initial_state="ghz"), "unknown preset"),
    (lambda d: d["integrator"].update(rtol=0.5), "rtol"),
    (lambda d: d["disentangler"].update(gamma_d=-1), "gamma_d"),
    (lambda d: d.update(seed=-2), "seed"),
    (lambda d: d.update(colour="red"), "unknown field"),
    (lambda d: d["params"].update(gamma_d=2.0), "conflicts"),
    (lambda d: d.pop("initial_state"), "initial_state"),
])
def test_invalid_configs(tmp_path, mutate, match):
    doc = json.loads(json.dumps(BASE))
    mutate(doc)
    with pytest.raises(ConfigError, match=match):
        parse_run_config(write(tmp_path, doc))


def test_error_carries_line_number(tmp_path):
    doc = json.loads(json.dumps(BASE))
    doc["params"]["g"] = "big"
    path = write(tmp_path, doc)
    with pytest.raises(ConfigError) as info:
        parse_run_config(path)
    lines = path.read_text().splitlines()
    assert '"g"' in lines[info.value.line - 1]


def test_malformed_json(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_run_config(write(tmp_path, '{\n  "system": "twospin",\n  oops\n}'))
    assert info.value.line == 3
    with pytest.raises(ConfigError, match="cannot read"):
        parse_run_config(tmp_path / "missing.json")


def test_non_hermitian_generic(tmp_path):
    doc = {"system": "generic", "initial_state": "bell",
           "params": {"n1": 2, "n2": 2, "hamiltonian": [[0, 1, 0, 0], [0, 0, 0, 0],
                                                       [0, 0, 0, 0], [0, 0, 0, 0]]}}
    with pytest.raises(ConfigError, match="Hermitian"):
        parse_run_config(write(tmp_path, doc))
