import json
import subprocess
import sys

import numpy as np
import pytest

from fullcount.cli import EXIT_CODES, main, read_csv, run


def _write(tmp_path, name, cfg):
    p = tmp_path / name
    if name.endswith(".json"):
        p.write_text(json.dumps(cfg))
    else:
        p.write_text(cfg)
    return p


POISSON = """
model = "two_spins_same"
channel = 0
order = 2
[params]
gamma = 2.0
h = 0.0
"""


def test_cumulants_poisson_point(tmp_path):
    cfg = _write(tmp_path, "run.toml", POISSON)
    out = tmp_path / "out.csv"
    assert main(["cumulants", "--config", str(cfg), "--out", str(out)]) == 0
    meta, rows = read_csv(out)
    assert meta["task"] == "cumulants" and meta["model"] == "two_spins_same"
    assert len(rows) == 1
    assert abs(rows[0]["kappa_1"] - 0.5) < 1e-12
    assert rows[0]["fano_paper"] == 1.0
    assert rows[0]["phase_transition"] is False


def test_floats_round_trip(tmp_path):
    cfg = _write(tmp_path, "run.json", {"model": "two_spins_inverse", "params": {"gamma": 1.3, "h": 0.7}})
    out = tmp_path / "o.csv"
    main(["cumulants", "--config", str(cfg), "--out", str(out), "--order", "3"])
    _, rows = read_csv(out)
    meta, cols, direct = run(json.loads(cfg.read_text()), "cumulants", order=3)
    for c in cols:
        assert rows[0][c] == direct[0][c]


def test_sweep_rows_sorted_and_jobs_invariant(tmp_path):
    cfg = _write(tmp_path, "s.toml", """
model = "two_spins_inverse"
[params]
gamma = 1.0
h = 0.0
[sweep]
axes = [{name = "h", start = 0, stop = 2, steps = 4}, {name = "gamma", start = 0.5, stop = 3, steps = 3}]
""")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", str(cfg), "--out", str(a), "--jobs", "1"]) == 0
    assert main(["sweep", "--config", str(cfg), "--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    _, rows = read_csv(a)
    assert len(rows) == 12
    keys = [(r["h"], r["gamma"]) for r in rows]
    assert keys == sorted(keys)


def test_global_model_reports_both_fixed_points(tmp_path):
    cfg = _write(tmp_path, "g.json", {"model": "two_spins_global", "params": {"gamma": 0.1}})
    meta, cols, rows = run(json.loads(cfg.read_text()), "cumulants")
    assert len(rows) == 2 and all(r["phase_transition"] for r in rows)
    assert sum(np.isnan(r["fano_paper"]) for r in rows) == 1


def test_theta_task(tmp_path):
    cfg = {"model": "two_spins_global", "params": {"gamma": 0.1},
           "theta": {"start": -1.5, "stop": 0.5, "steps": 9}}
    _, cols, rows = run(cfg, "theta")
    assert cols == ["s", "theta"] and len(rows) == 9
    assert all(r["theta"] == pytest.approx(0.0, abs=1e-12) for r in rows if r["s"] >= 0)
    assert rows[0]["theta"] > 0


def test_traj_byte_reproducible(tmp_path):
    cfg = _write(tmp_path, "t.toml", """
model = "poisson_qubit"
[params]
gamma = 1.0
[traj]
T = 20.0
n_traj = 150
initial = 0
""")
    outs = []
    for name in ("x.csv", "y.csv"):
        out = tmp_path / name
        assert main(["traj", "--config", str(cfg), "--out", str(out), "--seed", "42"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    other = tmp_path / "z.csv"
    main(["traj", "--config", str(cfg), "--out", str(other), "--seed", "43"])
    assert other.read_bytes() != outs[0]


def test_kerr_task():
    cfg = {"kerr": {"delta": 1.0, "gamma": 0.5, "g": 0.01},
           "intensity": {"start": 0.0, "stop": 12.0, "steps": 121}}
    meta, _, rows = run(cfg, "kerr")
    lo, hi = map(float, meta["bistable_window"].split(","))
    for r in rows:
        assert r["n_stable"] == (2 if lo < r["intensity"] < hi else 1)


def test_gaussian_model_cumulants():
    cfg = {"model": "squeezed_pair_gaussian",
           "params": {"omega": 1.0, "g": 0.2, "gamma1": 1.0, "gamma2": 1.0}}
    _, _, rows = run(cfg, "cumulants")
    assert abs(rows[0]["kappa_1"] - 0.08 / 4.84) < 1e-12


@pytest.mark.parametrize("cfg,code", [
    ({"model": "nope"}, "config"),
    ({"model": "two_spins_same", "params": {"gamma": 1.0}}, "config"),
    ({"model": "squeezed_pair_gaussian",
      "params": {"omega": 0.1, "g": 1.0, "gamma1": 0.1, "gamma2": 0.1}}, "instability"),
    ({"model": "squeezed_pair",
      "params": {"omega": 1.0, "g": 0.1, "gamma1": 1.0, "gamma2": 1.0, "cutoff": 9},
      "task": "theta"}, "dimension_cap"),
])
def test_exit_codes(tmp_path, cfg, code):
    task = cfg.pop("task", "cumulants")
    p = _write(tmp_path, "bad.json", cfg)
    assert main([task, "--config", str(p)]) == EXIT_CODES[code]


def test_missing_config_file(tmp_path):
    assert main(["cumulants", "--config", str(tmp_path / "missing.toml")]) == EXIT_CODES["config"]


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, "run.toml", POISSON)
    out = subprocess.run([sys.executable, "-m", "fullcount.cli", "cumulants", "--config", str(cfg)],
                         capture_output=True, text=True, check=True).stdout
    assert out.startswith("# ") and "fano_paper" in out
