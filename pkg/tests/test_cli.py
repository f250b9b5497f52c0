import csv
import json
import math

import numpy as np
import pytest

from disentangle import __version__, disentangler
from disentangle.cli import main, worker_count

PARAMS = {"omega_a": 1.0, "omega_b": 5.0, "omega_1": 0.6, "delta": 0.8, "g": 0.2}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def read_csv(path):
    lines = open(path).read().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return comments, rows


def test_simulate_twospin_header(tmp_path):
    cfg = write(tmp_path, {"system": "twospin", "params": PARAMS, "initial_state": "bell",
                           "disentangler": {"gamma_d": 0.3},
                           "integrator": {"t_final": 1.0, "record_every": 0.25}})
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--config", cfg, "--output", str(out)]) == 0
    comments, rows = read_csv(out)
    assert comments[0] == f"# disentangle {__version__} trajectory"
    assert comments[1].startswith("# config-sha256 ")
    header = open(out).read().splitlines()[2]
    assert header == ("t,norm,Q,expP,re_c00,im_c00,re_c01,im_c01,"
                      "re_c10,im_c10,re_c11,im_c11")
    assert [float(r["t"]) for r in rows] == [0, 0.25, 0.5, 0.75, 1.0]
    assert float(rows[0]["Q"]) == pytest.approx(0.5)


def test_simulate_is_byte_identical(tmp_path):
    cfg = write(tmp_path, {"system": "generic", "initial_state": "random", "seed": 9,
                           "params": {"n1": 2, "n2": 3,
                                      "hamiltonian": np.diag(np.arange(6.0)).tolist()},
                           "disentangler": {"gamma_d": 1.0},
                           "integrator": {"t_final": 1.0, "record_every": 0.1}})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--config", cfg, "--output", str(a)])
    main(["simulate", "--config", cfg, "--output", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert "re_c12" in a.read_text()


def test_simulate_logistic_q_column(tmp_path):
    cfg = write(tmp_path, {"system": "generic", "initial_state": [0.6, 0, 0, 0.8],
                           "params": {"n1": 2, "n2": 2, "hamiltonian": np.zeros((4, 4)).tolist()},
                           "disentangler": {"gamma_d": 1.0},
                           "integrator": {"t_final": 5.0, "record_every": 0.1, "rtol": 1e-10}})
    out = tmp_path / "q.csv"
    assert main(["simulate", "--config", cfg, "--output", str(out)]) == 0
    _, rows = read_csv(out)
    t = np.array([float(r["t"]) for r in rows])
    e = np.exp(-2 * t)
    x = 0.36 * e / (1 - 0.36 + 0.36 * e)
    assert np.max(np.abs(np.array([float(r["Q"]) for r in rows]) - 2 * x * (1 - x))) <= 1e-8


def test_simulate_product_stays_product(tmp_path):
    cfg = write(tmp_path, {"system": "twospin", "params": {**PARAMS, "g": 0.0},
                           "initial_state": "product:10", "frame": "lab",
                           "disentangler": {"gamma_d": 1.0},
                           "integrator": {"t_final": 5.0, "record_every": 0.5}})
    out = tmp_path / "p.csv"
    assert main(["simulate", "--config", cfg, "--output", str(out)]) == 0
    _, rows = read_csv(out)
    assert max(float(r["Q"]) for r in rows) <= 1e-10


def test_simulate_truncated_bloch(tmp_path):
    cfg = write(tmp_path, {"system": "twospin-truncated", "params": PARAMS,
                           "initial_state": "plus-x", "disentangler": {"gamma_d": 0.2},
                           "integrator": {"t_final": 2.0, "record_every": 1.0}})
    out = tmp_path / "b.csv"
    assert main(["simulate", "--config", cfg, "--output", str(out)]) == 0
    assert open(out).read().splitlines()[2] == "t,Px,Py,Pz,Q"
    _, rows = read_csv(out)
    assert float(rows[0]["Px"]) == pytest.approx(1.0)


def test_config_error_exit(tmp_path, capsys):
    cfg = write(tmp_path, {"system": "twospin", "params": {**PARAMS, "g": "x"},
                           "initial_state": "bell"})
    assert main(["simulate", "--config", cfg]) == 2
    assert "line" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_numerical_failure_exit(tmp_path, capsys):
    # fixed points of a field with no x or z component do not exist
    cfg = write(tmp_path, {"omega_vec": [0, 1, 0], "disentangler": {"gamma_d": 0.1}})
    assert main(["fixed-points", "--config", cfg]) == 2
    cfg = write(tmp_path, {"system": "twospin", "params": PARAMS, "initial_state": "bell",
                           "integrator": {"t_final": 1000.0}})
    from disentangle import integrator
    orig = integrator.integrate

    def capped(*a, **k):
        return orig(*a, **{**k, "max_steps": 5})

    evolve_mod = __import__("disentangle.evolve", fromlist=["integrate"])
    evolve_mod.integrate, saved = capped, evolve_mod.integrate
    try:
        assert main(["simulate", "--config", cfg]) == 3
    finally:
        evolve_mod.integrate = saved
    assert "numerical failure" in capsys.readouterr().err


def test_sweep_smoke(tmp_path):
    cfg = write(tmp_path, {"params": PARAMS, "disentangler": {"gamma_d": 0.0},
                           "sweep": {"delta": [0.4, 0.8], "omega1": [0.3, 0.6]}})
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", cfg, "--output", str(out), "--workers", "1"]) == 0
    lines = open(out).read().splitlines()
    assert lines[2].startswith("delta,omega1,omega_r,omega_x,omega_z,theta_h,n_fixed,"
                               "theta_1,phi_1,stab_1,")
    _, rows = read_csv(out)
    assert len(rows) == 4
    for r in rows:
        th = float(r["theta_h"])
        roots = [float(r[f"theta_{k}"]) for k in range(1, int(r["n_fixed"]) + 1)]
        assert min(abs(x - th) for x in roots) <= 1e-10


def test_sweep_matching_line(tmp_path):
    cfg = write(tmp_path, {"params": PARAMS, "disentangler": {"gamma_d": 0.0},
                           "sweep": {"delta": {"start": 0.1, "stop": 1.5, "num": 8},
                                     "omega1": {"start": 0.1, "stop": 1.2, "num": 8}}})
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", cfg, "--output", str(out), "--workers", "1"]) == 0
    _, rows = read_csv(out)
    det = np.array([abs(float(r["omega_r"]) - PARAMS["omega_a"]) for r in rows]).reshape(8, 8)
    th = np.array([float(r["theta_h"]) for r in rows]).reshape(8, 8)
    # along each omega_1 column the best-matched delta has theta_h closest to pi/2
    for j in range(8):
        assert np.argmin(det[:, j]) == np.argmin(np.abs(th[:, j] - math.pi / 2))


def test_sweep_bad_axis(tmp_path):
    cfg = write(tmp_path, {"params": PARAMS, "sweep": {"delta": [0.4], "omega1": [0.3, 0.6]}})
    assert main(["sweep", "--config", cfg]) == 2


def test_fixed_points_command(tmp_path):
    cfg = write(tmp_path, {"omega_vec": [0.3, 0.0, 0.1], "disentangler": {"gamma_d": 0.2}})
    out = tmp_path / "fp.csv"
    assert main(["fixed-points", "--config", cfg, "--output", str(out)]) == 0
    _, rows = read_csv(out)
    assert sorted(r["stability"] for r in rows) == ["stable", "unstable"]
    assert all(float(r["residual"]) <= 1e-10 for r in rows)
    cfg = write(tmp_path, {"params": PARAMS, "disentangler": {"gamma_d": 0.2}})
    assert main(["fixed-points", "--config", cfg, "--output", str(out)]) == 0


def test_verify_quick(tmp_path, capsys):
    report = tmp_path / "r.json"
    assert main(["verify", "--quick", "--seed", "1", "--json", str(report)]) == 0
    text = capsys.readouterr().out
    assert "max_residual=" in text
    data = json.loads(report.read_text())
    assert data["passed"] and all(c["passed"] for c in data["checks"])
    assert {"name", "max_residual", "tolerance"} <= set(data["checks"][0])


def test_verify_catches_tampered_sign(monkeypatch, capsys):
    orig = disentangler.apply_m_d
    monkeypatch.setattr(disentangler, "apply_m_d", lambda *a, **k: -orig(*a, **k))
    assert main(["verify", "--quick"]) == 1
    out = capsys.readouterr().out
    line = next(l for l in out.splitlines() if "m_d_witness_overlap" in l)
    assert line.startswith("FAIL")


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("DISENT_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("DISENT_THREADS", "junk")
    assert worker_count() >= 1
