"""Scenario validation, artifact formats and CLI behavior."""

import json
import subprocess
import sys

import numpy as np
import pytest

from conicscatter import harness as hh


def base_config(**over):
    cfg = {
        "version": 1,
        "seed": 3,
        "experiment": "trajectory",
        "metric": {"name": "flat"},
        "start": {"r": 5.0, "theta": 0.0, "rho": -1.0, "omega": 0.0},
        "trajectory": {"t_end": -10.0, "tol": 1e-10, "n_samples": 33},
    }
    cfg.update(over)
    return cfg


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_validate_ok():
    sc = hh.validate_config(base_config())
    assert sc.kind == "trajectory"
    assert sc.metric.name == "flat"


@pytest.mark.parametrize(
    "mutate, anchor",
    [
        (lambda c: c.pop("version"), "version"),
        (lambda c: c.update(version=99), "version"),
        (lambda c: c.update(experiment="nope"), "experiment"),
        (lambda c: c["metric"].update(name="nope"), "metric"),
        (lambda c: c["start"].update(r=0.5), "start.r"),
        (lambda c: c["trajectory"].update(t_end=5.0), "trajectory.t_end"),
        (lambda c: c.pop("trajectory"), "trajectory"),
        (lambda c: c["metric"]["params"].update(nonsense=1) if c["metric"].setdefault("params", {}) is not None else None, "metric"),
    ],
)
def test_validate_errors_carry_key_paths(mutate, anchor):
    cfg = base_config()
    mutate(cfg)
    with pytest.raises(hh.ConfigError) as exc:
        hh.validate_config(cfg)
    assert anchor in str(exc.value)


def test_load_config_json_error_line_anchored(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "version": 1,\n  "experiment": \n}\n')
    with pytest.raises(hh.ConfigError) as exc:
        hh.load_config(bad)
    assert ":3:" in str(exc.value) or ":4:" in str(exc.value)


def test_cartesian_start_accepted():
    cfg = base_config()
    cfg["start"] = {"cartesian": {"x": [3.0, 4.0], "xi": [1.0, 0.0]}}
    sc = hh.validate_config(cfg)
    assert sc.kind == "trajectory"


# ---------------------------------------------------------------------------
# experiments and artifacts
# ---------------------------------------------------------------------------


def test_trajectory_csv_format(tmp_path):
    sc = hh.validate_config(base_config(), out_dir=tmp_path)
    res = hh.run_scenario(sc)
    csv = tmp_path / res["csv"]
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == "t,r,theta_unwrapped,rho,omega,p_rel_drift"
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    assert data.shape[1] == 6
    # flat radial: r(t) = 5 - 2t
    assert np.allclose(data[:, 1], 5.0 - 2.0 * data[:, 0], atol=1e-7)
    assert np.all(data[:, 5] < 1e-8)
    summary = json.loads((tmp_path / "trajectory_trajectory.json").read_text())
    assert summary["config"]["seed"] == 3  # effective config echoed


def test_scatter_json_schema(tmp_path):
    cfg = base_config(experiment="scatter-data")
    cfg["start"] = {"cartesian": {"x": [3.0, 4.0], "xi": [1.0, 0.0]}}
    del cfg["trajectory"]
    sc = hh.validate_config(cfg, out_dir=tmp_path)
    res = hh.run_scenario(sc)
    out = json.loads((tmp_path / "scatter_data_scatter.json").read_text())
    for key in ("r_minus", "theta_minus", "rho_minus", "omega_minus", "err", "beta_fit", "status"):
        assert key in out
    assert out["status"] == "ok"
    assert abs(out["r_minus"] - (-3.0)) < 1e-6
    assert abs(out["theta_minus"] - np.pi) < 1e-6
    assert abs(out["rho_minus"] - (-1.0)) < 1e-6
    assert abs(out["omega_minus"] - (-4.0)) < 1e-6


def test_scatter_rejects_trapped(tmp_path):
    cfg = base_config(experiment="scatter-data")
    cfg["start"] = {"r": 5.0, "theta": 0.0, "rho": 1.0, "omega": 0.0}  # inward: chart exit
    del cfg["trajectory"]
    sc = hh.validate_config(cfg, out_dir=tmp_path)
    with pytest.raises(hh.NumericFailure):
        hh.run_scenario(sc)


def test_diffeo_report(tmp_path):
    cfg = {
        "version": 1,
        "experiment": "diffeo-check",
        "metric": {"name": "bump"},
        "diffeo": {
            "center": {"r": 50.0, "theta": 1.2, "rho": -1.0, "omega": 0.1},
            "half_widths": [2.0, 0.3, 0.15, 0.15],
            "t_ladder": [-16.0, -64.0],
            "n_samples": 4,
            "tol": 1e-8,
        },
    }
    sc = hh.validate_config(cfg, out_dir=tmp_path, seed=7)
    res = hh.run_scenario(sc)
    assert res["passed"]
    assert max(float(v) for v in res["sup_deviation"].values()) < 0.5


def test_evolve_free_dump(tmp_path):
    cfg = {
        "version": 1,
        "experiment": "evolve-free",
        "metric": {"name": "flat"},
        "quantum": {
            "grid": {"r_min": -10.0, "r_max": 40.0, "dr": 0.05, "n_theta": 8},
            "t_total": 0.8,
        },
        "state": {"kind": "gaussian", "r0": 12.0, "sigma": 1.0, "k_r": 3.0},
    }
    sc = hh.validate_config(cfg, out_dir=tmp_path)
    res = hh.run_scenario(sc)
    assert abs(res["norm_after"] - res["norm_before"]) < 1e-10
    header = json.loads((tmp_path / "evolve_free_state.json").read_text())
    modes = np.load(tmp_path / header["data"])
    assert modes.shape == (header["n_theta"], header["n_r"])
    assert modes.dtype == np.complex128


def test_run_deterministic_artifacts(tmp_path):
    cfg = base_config()
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        sc = hh.validate_config(cfg, out_dir=out)
        hh.run_scenario(sc)
    assert (a / "trajectory_trajectory.csv").read_bytes() == (b / "trajectory_trajectory.csv").read_bytes()
    assert (a / "trajectory_trajectory.json").read_bytes() == (b / "trajectory_trajectory.json").read_bytes()


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "conicscatter.harness", *args],
        capture_output=True,
        text=True,
    )


def test_cli_run_trajectory(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(base_config()))
    proc = run_cli("run", str(cfg_path), "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    assert "trajectory: ok" in proc.stdout


def test_cli_malformed_config_exit_2(tmp_path):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text("{broken")
    proc = run_cli("run", str(cfg_path))
    assert proc.returncode == 2
    assert "config error" in proc.stderr
    assert ":1:" in proc.stderr  # line anchor


def test_cli_schema_violation_exit_2(tmp_path):
    cfg = base_config()
    cfg["experiment"] = "unknown-kind"
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    proc = run_cli("run", str(cfg_path))
    assert proc.returncode == 2
    assert "experiment" in proc.stderr


def test_cli_numeric_failure_exit_1(tmp_path):
    cfg = base_config(experiment="scatter-data")
    cfg["start"] = {"r": 5.0, "theta": 0.0, "rho": 1.0, "omega": 0.0}
    del cfg["trajectory"]
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    proc = run_cli("run", str(cfg_path), "--out", str(tmp_path))
    assert proc.returncode == 1
    assert "numeric failure" in proc.stderr


def test_cli_validate(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(base_config()))
    proc = run_cli("validate", str(cfg_path))
    assert proc.returncode == 0
    assert "config ok" in proc.stdout


def test_cli_list_metrics():
    proc = run_cli("list-metrics")
    assert proc.returncode == 0
    for name in ("flat", "bump", "radial", "well"):
        assert name in proc.stdout


def test_cli_batch(tmp_path):
    batch = {
        "version": 1,
        "metric": {"name": "flat"},
        "experiments": [
            base_config(),
            base_config(start={"r": 6.0, "theta": 0.3, "rho": -0.8, "omega": 0.1}),
        ],
    }
    cfg_path = tmp_path / "batch.json"
    cfg_path.write_text(json.dumps(batch))
    proc = run_cli("run", str(cfg_path), "--out", str(tmp_path))
    assert proc.returncode == 0
    assert proc.stdout.count("trajectory: ok") == 2
