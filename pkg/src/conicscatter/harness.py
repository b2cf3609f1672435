"""Scenario runner: reproducible experiments over all modules.

A scenario is a single self-contained JSON document (versioned schema,
every physical and numerical parameter explicit).  The harness
validates the document up front, executes the requested experiment kind
and writes deterministic artifacts: CSV for trajectories and ladders,
JSON for scattering data, verdicts and reports, with the effective
configuration echoed into every JSON artifact.

Command line:

    conic-scatter run <config.json> [--out DIR] [--seed N] [--threads N]
    conic-scatter validate <config.json>
    conic-scatter list-metrics

Exit codes: 0 ok, 1 numeric failure, 2 config error, 3 inconclusive
theorem check.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import classical as cl
from . import geometry as geo
from . import microlocal as ml
from . import quantum as qu
from .profiles import plateau_bump, rising_plateau, smoothstep

__all__ = [
    "ConfigError",
    "NumericFailure",
    "Scenario",
    "TheoremCheckReport",
    "load_config",
    "validate_config",
    "run_scenario",
    "theorem_check",
    "build_state",
    "main",
]

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "trajectory",
    "scatter-data",
    "diffeo-check",
    "evolve-free",
    "evolve-curved",
    "wf-test",
    "smoothing-check",
    "theorem-check",
)


class ConfigError(Exception):
    """Schema violation; the message carries the offending key path."""


class NumericFailure(Exception):
    """An experiment failed its numeric contract."""


# ---------------------------------------------------------------------------
# config loading and validation
# ---------------------------------------------------------------------------


def _expect(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _get(cfg, path, key, typ, required=True, default=None):
    here = f"{path}.{key}" if path else key
    if key not in cfg:
        _expect(not required, here, "missing required key")
        return default
    val = cfg[key]
    if typ is float:
        _expect(isinstance(val, (int, float)) and not isinstance(val, bool), here, "expected a number")
        return float(val)
    if typ is int:
        _expect(isinstance(val, int) and not isinstance(val, bool), here, "expected an integer")
        return val
    _expect(isinstance(val, typ), here, f"expected {typ.__name__}")
    return val


def load_config(path) -> dict:
    """Parse a JSON scenario; parse errors carry line/column anchors."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _validate_point(cfg, path):
    if "cartesian" in cfg:
        cart = _get(cfg, path, "cartesian", dict)
        x = _get(cart, f"{path}.cartesian", "x", list)
        xi = _get(cart, f"{path}.cartesian", "xi", list)
        _expect(len(x) == 2 and len(xi) == 2, f"{path}.cartesian", "x and xi must have length 2")
        return cl.cartesian_to_polar(x, xi)
    vals = {}
    for key in ("r", "theta", "rho", "omega"):
        vals[key] = _get(cfg, path, key, float)
    _expect(vals["r"] > 1.0, f"{path}.r", "start must lie in the end chart (r > 1)")
    return cl.PhasePoint(**vals)


def _validate_metric(cfg, path="metric"):
    name = _get(cfg, path, "name", str)
    params = _get(cfg, path, "params", dict, required=False, default={})
    try:
        return geo.make_metric(name, **params)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _validate_potential(cfg, path="potential"):
    if cfg is None:
        return None
    name = _get(cfg, path, "name", str)
    if name == "none":
        return None
    params = _get(cfg, path, "params", dict, required=False, default={})
    try:
        return geo.make_potential(name, **params)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _validate_budgets(cfg, path, keys):
    for key in keys:
        if key in cfg:
            _expect(cfg[key] > 0, f"{path}.{key}", "budget must be positive")


@dataclass(frozen=True)
class Scenario:
    """Validated scenario: experiment kind plus resolved objects."""

    kind: str
    config: dict
    metric: geo.ScatteringMetric
    potential: Optional[geo.Potential]
    seed: int
    out_dir: Path
    prefix: str


def validate_config(cfg: dict, out_dir=None, seed=None) -> Scenario:
    """Check the document against the schema and resolve builtin objects.

    Required sections depend on the experiment kind and are verified up
    front so module errors cannot hide behind partial runs.
    """
    _expect(isinstance(cfg, dict), "", "config must be a JSON object")
    version = _get(cfg, "", "version", int)
    _expect(version == SCHEMA_VERSION, "version", f"unsupported schema version {version}")
    kind = _get(cfg, "", "experiment", str)
    _expect(kind in EXPERIMENT_KINDS, "experiment", f"unknown kind {kind!r}; known: {EXPERIMENT_KINDS}")
    metric = _validate_metric(_get(cfg, "", "metric", dict))
    potential = _validate_potential(cfg.get("potential"))

    needs = {
        "trajectory": ["start", "trajectory"],
        "scatter-data": ["start"],
        "diffeo-check": ["diffeo"],
        "evolve-free": ["quantum", "state"],
        "evolve-curved": ["quantum", "state"],
        "wf-test": ["quantum", "state", "wf"],
        "smoothing-check": ["start", "theorem"],
        "theorem-check": ["start", "theorem"],
    }[kind]
    for section in needs:
        _expect(section in cfg, section, f"required for experiment {kind!r}")

    if "start" in cfg:
        _validate_point(cfg["start"], "start")
    if kind == "trajectory":
        t_end = _get(cfg["trajectory"], "trajectory", "t_end", float)
        _expect(t_end < 0, "trajectory.t_end", "backward integration requires t_end < 0")
        _validate_budgets(cfg["trajectory"], "trajectory", ["tol", "n_samples"])
    if kind == "diffeo-check":
        dcfg = cfg["diffeo"]
        _validate_point(_get(dcfg, "diffeo", "center", dict), "diffeo.center")
        hw = _get(dcfg, "diffeo", "half_widths", list)
        _expect(len(hw) == 4 and all(w > 0 for w in hw), "diffeo.half_widths", "need 4 positive widths")
        ladder = _get(dcfg, "diffeo", "t_ladder", list)
        _expect(all(t < 0 for t in ladder), "diffeo.t_ladder", "ladder times must be negative")
    if "quantum" in cfg:
        qcfg = cfg["quantum"]
        grid = _get(qcfg, "quantum", "grid", dict)
        for key in ("r_min", "r_max", "dr", "n_theta"):
            _expect(key in grid, f"quantum.grid.{key}", "missing")
        _expect(grid["r_max"] > grid["r_min"], "quantum.grid", "r_max must exceed r_min")
        _expect(grid["dr"] > 0 and grid["n_theta"] > 0, "quantum.grid", "positive resolution required")
        scheme = qcfg.get("scheme", "chebyshev")
        _expect(scheme in ("chebyshev", "crank-nicolson"), "quantum.scheme", f"unknown scheme {scheme!r}")
    if "wf" in cfg:
        wcfg = cfg["wf"]
        wkind = _get(wcfg, "wf", "kind", str, required=False, default="wf")
        _expect(wkind in ("wf", "fs", "wf-rh"), "wf.kind", "must be wf | fs | wf-rh")
        _validate_point(_get(wcfg, "wf", "point", dict), "wf.point")
    if "theorem" in cfg:
        tcfg = cfg["theorem"]
        t0 = _get(tcfg, "theorem", "t0", float, required=False, default=0.5)
        _expect(t0 > 0, "theorem.t0", "t0 must be positive")

    seed_val = seed if seed is not None else _get(cfg, "", "seed", int, required=False, default=0)
    out = _get(cfg, "", "output", dict, required=False, default={})
    out_path = Path(out_dir) if out_dir is not None else Path(out.get("dir", "."))
    prefix = out.get("prefix", kind.replace("-", "_"))
    return Scenario(
        kind=kind,
        config=cfg,
        metric=metric,
        potential=potential,
        seed=seed_val,
        out_dir=out_path,
        prefix=prefix,
    )


# ---------------------------------------------------------------------------
# deterministic artifact writers
# ---------------------------------------------------------------------------


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    # allow_nan=False keeps artifacts strict JSON (non-finite values must be
    # mapped to null by the producers)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(x)) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _dump_state(path_prefix: Path, state) -> dict:
    """Grid header JSON + one complex .npy of per-mode coefficients."""
    path_prefix.parent.mkdir(parents=True, exist_ok=True)
    modes = state.mode_coefficients()
    npy = path_prefix.with_suffix(".npy")
    np.save(npy, modes)
    header = {
        "format": "mode-coefficients",
        "r_min": float(state.grid.r[0]),
        "dr": state.grid.dr,
        "n_r": state.grid.n_r,
        "n_theta": state.grid.n_theta,
        "norm": state.norm(),
        "data": npy.name,
    }
    _write_json(path_prefix.with_suffix(".json"), header)
    return header


# ---------------------------------------------------------------------------
# state builders
# ---------------------------------------------------------------------------


def build_state(spec: dict, grid: qu.Grid2D, target: str, metric, path="state"):
    """Construct a grid state from its config description.

    Kinds: coherent (phase-space Gaussian), gaussian (smooth bump with
    optional oscillation), jump (radial conormal step times window),
    chirp (incoming focusing profile; see theorem_check for the
    placement rule).
    """
    kind = _get(spec, path, "kind", str)
    if kind == "coherent":
        center = _validate_point(_get(spec, path, "center", dict), f"{path}.center")
        eps_sc = _get(spec, path, "eps_sc", float)
        return qu.make_coherent_state(center, eps_sc, grid, target, metric)
    if kind == "gaussian":
        r0 = _get(spec, path, "r0", float)
        th0 = _get(spec, path, "theta0", float, required=False, default=0.0)
        sig = _get(spec, path, "sigma", float, required=False, default=0.5)
        sig_t = _get(spec, path, "sigma_theta", float, required=False, default=sig)
        k_r = _get(spec, path, "k_r", float, required=False, default=0.0)

        def fn(r, th):
            dth = np.angle(np.exp(1j * (th - th0)))
            return np.exp(
                -((r - r0) ** 2) / (2 * sig**2) - dth**2 / (2 * sig_t**2) + 1j * k_r * r
            )

        return qu.state_from_function(grid, fn, target, metric, normalize=True)
    if kind == "jump":
        r_jump = _get(spec, path, "r_jump", float)
        envelope = _get(spec, path, "envelope", float, required=False, default=1.5)
        theta0 = _get(spec, path, "theta0", float, required=False, default=0.0)
        theta_width = _get(spec, path, "theta_width", float, required=False, default=0.0)
        mollify = _get(spec, path, "mollify", float, required=False, default=3.0)

        def fn(r, th):
            step = smoothstep((r - r_jump) / (mollify * grid.dr))
            env = plateau_bump(r, r_jump, envelope, 2.0 * envelope)
            if theta_width > 0:
                dth = np.angle(np.exp(1j * (th - theta0)))
                ang = plateau_bump(dth, 0.0, theta_width, 2.0 * theta_width)
            else:
                ang = np.ones_like(th)
            return step * env * ang

        return qu.state_from_function(grid, fn, target, metric, normalize=True)
    if kind == "chirp":
        return _chirp_state(
            grid,
            target,
            metric,
            r_focus=_get(spec, path, "r_focus", float),
            t0=_get(spec, path, "t0", float),
            theta0=_get(spec, path, "theta0", float, required=False, default=0.0),
            theta_width=_get(spec, path, "theta_width", float, required=False, default=0.6),
            omega_ray=_get(spec, path, "omega_ray", float, required=False, default=0.0),
            rho_ray=_get(spec, path, "rho_ray", float, required=False, default=-1.0),
            r_max_tail=_get(spec, path, "r_max_tail", float, required=False, default=float(grid.r[-1])),
        )
    raise ConfigError(f"{path}.kind: unknown state kind {kind!r}")


def _chirp_state(grid, target, metric, r_focus, t0, theta0, theta_width, omega_ray, rho_ray,
                 r_max_tail, decay=1.25):
    """Incoming focusing profile with a power-law tail.

    Each radius r carries radial momentum -(r - r_focus)/(2 t0), so the
    whole tail arrives at r_focus at time t0; the angular phase puts the
    wavefront on the ray through (rho_ray, omega_ray).  The tail is
    tapered at r_max_tail to keep it clear of the absorbing layer.
    """

    def fn(r, th):
        dth = np.angle(np.exp(1j * (th - theta0)))
        s = (r_focus - r) / (2.0 * t0 * rho_ray)  # ray parameter, >= 0 on the tail
        amp = np.where(r > r_focus + 0.5, ((r - r_focus) / 4.0 + 1e-12) ** -decay, 0.0)
        ramp = rising_plateau(r, r_focus + 0.5, r_focus + 2.5)
        taper = 1.0 - smoothstep((r - (r_max_tail - 3.0)) / 2.0)
        phase = -((r - r_focus) ** 2) / (4.0 * t0) + s * omega_ray * dth
        ang = plateau_bump(dth, 0.0, theta_width, 2.0 * theta_width)
        return amp * ramp * taper * ang * np.exp(1j * phase)

    return qu.state_from_function(grid, fn, target, metric, normalize=True)


# ---------------------------------------------------------------------------
# experiment implementations
# ---------------------------------------------------------------------------


def _run_trajectory(sc: Scenario) -> dict:
    cfg = sc.config
    start = _validate_point(cfg["start"], "start")
    tcfg = cfg["trajectory"]
    tol = tcfg.get("tol", 1e-10)
    include_v = bool(cfg.get("classical", {}).get("include_potential", False))
    traj = cl.integrate_flow(
        sc.metric,
        sc.potential,
        start,
        float(tcfg["t_end"]),
        tol=tol,
        n_samples=int(tcfg.get("n_samples", 257)),
        include_potential=include_v,
    )
    e0 = cl.flow_energy(sc.metric, sc.potential, start.as_array(), include_v)
    e = cl.flow_energy(sc.metric, sc.potential, traj.y, include_v)
    drift = np.abs(e - e0) / max(abs(e0), 1e-300)
    csv = sc.out_dir / f"{sc.prefix}_trajectory.csv"
    _write_csv(
        csv,
        ["t", "r", "theta_unwrapped", "rho", "omega", "p_rel_drift"],
        np.column_stack([traj.t, traj.y, drift]),
    )
    summary = {
        "experiment": "trajectory",
        "chart_exit": traj.chart_exit,
        "exit_time": traj.exit_time,
        "energy_drift": traj.energy_drift,
        "csv": csv.name,
        "config": cfg,
    }
    _write_json(sc.out_dir / f"{sc.prefix}_trajectory.json", summary)
    if traj.energy_drift > 100.0 * tol:
        raise NumericFailure(f"energy drift {traj.energy_drift:.2e} exceeds budget {100 * tol:.2e}")
    return summary


def _run_scatter(sc: Scenario) -> dict:
    cfg = sc.config
    start = _validate_point(cfg["start"], "start")
    scfg = cfg.get("scatter", {})
    include_v = bool(cfg.get("classical", {}).get("include_potential", False))
    verdict = cl.detect_nontrapping(sc.metric, sc.potential, start, include_potential=include_v)
    if verdict.status != "nontrapped":
        raise NumericFailure(f"start is not backward nontrapped: {verdict.status} ({verdict.detail})")
    t0_lad = scfg.get("ladder_t0", 16.0)
    n_doub = int(scfg.get("ladder_doublings", 12))
    sd = cl.extract_scattering_data(
        sc.metric,
        sc.potential,
        start,
        tol=scfg.get("tol", 1e-10),
        t0_ladder=t0_lad,
        n_doublings=n_doub,
        include_potential=include_v,
    )
    t_ladder = -t0_lad * 2.0 ** np.arange(n_doub + 1)
    sheared = cl._integrate_sheared_batch(
        sc.metric, sc.potential, start.as_array()[None, :], t_ladder,
        tol=scfg.get("tol", 1e-10), include_potential=include_v,
    )[:, 0, :]
    ladder_rows = [
        {"t": float(t), "r": float(row[0]), "theta": float(row[1]),
         "rho": float(row[2]), "omega": float(row[3])}
        for t, row in zip(t_ladder, sheared)
    ]
    out = {
        "ladder": ladder_rows,
        "r_minus": sd.r_minus,
        "theta_minus": sd.theta_minus,
        "theta_winding": sd.theta_winding,
        "rho_minus": sd.rho_minus,
        "omega_minus": sd.omega_minus,
        "err": sd.err,
        "beta_fit": {k: (None if not np.isfinite(v) else v) for k, v in sd.beta_fit.items()},
        "status": sd.status,
        "escape": {"time": verdict.escape_time, "C_fit": verdict.C_fit},
        "config": cfg,
    }
    _write_json(sc.out_dir / f"{sc.prefix}_scatter.json", out)
    if sd.status != "ok":
        raise NumericFailure(f"scattering extraction flagged: {sd.status}")
    return out


def _run_diffeo(sc: Scenario) -> dict:
    dcfg = sc.config["diffeo"]
    window = cl.PhaseWindow(
        center=_validate_point(dcfg["center"], "diffeo.center"),
        half_widths=tuple(dcfg["half_widths"]),
    )
    report = cl.check_local_diffeo(
        sc.metric,
        sc.potential,
        window,
        t_ladder=dcfg["t_ladder"],
        n_samples=int(dcfg.get("n_samples", 24)),
        seed=sc.seed,
        tol=dcfg.get("tol", 1e-9),
    )
    out = {
        "experiment": "diffeo-check",
        "sup_deviation": {repr(t): v for t, v in sorted(report.sup_deviation.items())},
        "n_samples": report.n_samples,
        "n_chart_exit": report.n_chart_exit,
        "converged": report.converged,
        "passed": report.passed,
        "config": sc.config,
    }
    _write_json(sc.out_dir / f"{sc.prefix}_diffeo.json", out)
    return out


def _grid_from_config(qcfg: dict) -> qu.Grid2D:
    g = qcfg["grid"]
    return qu.Grid2D.build(float(g["r_min"]), float(g["r_max"]), float(g["dr"]), int(g["n_theta"]))


def _evolution_config(qcfg: dict) -> qu.EvolutionConfig:
    cap = qcfg.get("absorbing_layer")
    layer = qu.AbsorbingLayer(width=float(cap["width"]), strength=float(cap["strength"])) if cap else None
    return qu.EvolutionConfig(
        dt=float(qcfg.get("dt", 0.1)),
        t_total=float(qcfg.get("t_total", 0.5)),
        scheme=qcfg.get("scheme", "chebyshev"),
        absorbing_layer=layer,
    )


def _run_evolve(sc: Scenario, target: str) -> dict:
    qcfg = sc.config["quantum"]
    grid = _grid_from_config(qcfg)
    ecfg = _evolution_config(qcfg)
    state = build_state(sc.config["state"], grid, target, sc.metric)
    n0 = state.norm()
    if target == "free":
        out_state = qu.free_evolve(state, ecfg.t_total)
    else:
        out_state = qu.curved_evolve(state, sc.metric, sc.potential, ecfg)
    header = _dump_state(sc.out_dir / f"{sc.prefix}_state", out_state)
    out = {
        "experiment": f"evolve-{target}",
        "t_total": ecfg.t_total,
        "norm_before": n0,
        "norm_after": out_state.norm(),
        "state": header,
        "config": sc.config,
    }
    _write_json(sc.out_dir / f"{sc.prefix}_evolve.json", out)
    return out


def _detector_config(cfg: dict) -> ml.DetectorConfig:
    dcfg = cfg.get("detector", {})
    kwargs = {}
    for key in ("eps0", "threshold", "marginal_lo", "psi_margin", "noise_floor"):
        if key in dcfg:
            kwargs[key] = float(dcfg[key])
    if "n_rungs" in dcfg:
        kwargs["n_rungs"] = int(dcfg["n_rungs"])
    if "widths" in dcfg:
        kwargs["widths"] = tuple(float(w) for w in dcfg["widths"])
    return ml.DetectorConfig(**kwargs)


def _run_wf(sc: Scenario) -> dict:
    cfg = sc.config
    qcfg = cfg["quantum"]
    grid = _grid_from_config(qcfg)
    wcfg = cfg["wf"]
    target = wcfg.get("space", "free")
    state = build_state(cfg["state"], grid, target, sc.metric)
    point = _validate_point(wcfg["point"], "wf.point")
    det = _detector_config(cfg)
    kind = wcfg.get("kind", "wf")
    if kind == "wf":
        verdict = ml.wf_test(state, point, det)
    elif kind == "wf-rh":
        verdict = ml.wf_rh_test(state, point, det)
    else:  # fs over a coherent family
        spec = cfg["state"]
        _expect(spec.get("kind") == "coherent", "state.kind", "fs families are coherent")
        center = _validate_point(spec["center"], "state.center")
        fam = {
            float(e): qu.make_coherent_state(center, float(e), grid, target, sc.metric)
            for e in det.ladder()
        }
        verdict = ml.fs_test(fam, point, det)
    out = dict(verdict.to_dict())
    out["kind"] = kind
    out["config"] = cfg
    _write_json(sc.out_dir / f"{sc.prefix}_wf.json", out)
    return out


# ---------------------------------------------------------------------------
# theorem machinery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoremCheckReport:
    """Left/right verdicts at the paired points plus diagnostics."""

    left: ml.WFVerdict
    right: ml.WFVerdict
    agreement: str  # "agree" | "inconclusive" | "contradiction"
    scattering: cl.ScatteringData
    member: str

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
            "agreement": self.agreement,
            "scattering": {
                "r_minus": self.scattering.r_minus,
                "theta_minus": self.scattering.theta_minus,
                "theta_winding": self.scattering.theta_winding,
                "rho_minus": self.scattering.rho_minus,
                "omega_minus": self.scattering.omega_minus,
                "status": self.scattering.status,
            },
        }


def _agreement(left: ml.WFVerdict, right: ml.WFVerdict) -> str:
    if "marginal" in (left.decision, right.decision):
        return "inconclusive"
    return "agree" if left.decision == right.decision else "contradiction"


def _resample_for_detection(state, det: ml.DetectorConfig, point: cl.PhasePoint):
    """Band-limited radial upsampling to meet the 8-points rule at eps_min."""
    eps_min = float(det.ladder()[-1])
    k_probe = (abs(point.rho) + det.widths[2]) / eps_min
    need = 2.0 * np.pi / (8.0 * k_probe) if k_probe > 0 else np.inf
    factor = int(np.ceil(state.grid.dr / need)) if np.isfinite(need) else 1
    if factor <= 1:
        return state
    fine_vals = qu.resample_radial(state.values, factor)
    fine_r = state.grid.r[0] + np.arange(state.grid.n_r * factor) * (state.grid.dr / factor)
    fine_grid = qu.Grid2D(r=fine_r, n_theta=state.grid.n_theta)
    if isinstance(state, qu.CurvedState):
        return qu.CurvedState(fine_grid, fine_vals, state.metric)
    return qu.FreeState(fine_grid, fine_vals, state.h_theta)


def _theorem_grids(cfg_theorem: dict, sd: cl.ScatteringData, det: ml.DetectorConfig, t0: float,
                   member: str = "chirp"):
    """Aligned free/curved grids sized per family member.

    The singular member's incoming tail reaches out to roughly
    2 t0 (|rho-| + width) / eps_min, which with the detection ladder
    sets both the extent and the wavenumber content of the grid; the
    smooth control carries only low wavenumbers and runs on a coarse
    grid.  The outer 10% holds the absorbing layer and the periodic
    coefficient blend.
    """
    eps_min = float(det.ladder()[-1])
    if member == "smooth":
        r_max = cfg_theorem.get("r_max_smooth", max(38.0, sd.r_minus + 24.0))
        dr = cfg_theorem.get("dr_smooth", 0.08)
        n_theta = int(cfg_theorem.get("n_theta_smooth", 48))
    else:
        rho_reach = abs(sd.rho_minus) + 1.2 * det.widths[2]
        r_tail = sd.r_minus + 2.0 * t0 * rho_reach / eps_min
        r_max = cfg_theorem.get("r_max", r_tail / 0.90 + 5.0)
        k_content = max(rho_reach / eps_min, (r_max - sd.r_minus) / (2.0 * t0))
        ppw = cfg_theorem.get("points_per_wavelength", 3.0)
        dr = 2.0 * np.pi / (ppw * k_content)
        m_content = (abs(sd.omega_minus) + 1.2 * det.widths[3]) / eps_min
        n_theta = int(cfg_theorem.get("n_theta", max(40, int(np.ceil(2.4 * m_content)))))
    r_free_min = min(-2.0, sd.r_minus - 12.0)
    free_grid = qu.Grid2D.build(r_free_min, float(r_max), float(dr), n_theta)
    i0 = int(np.searchsorted(free_grid.r, 1.05))
    curved_grid = qu.Grid2D(r=free_grid.r[i0:], n_theta=free_grid.n_theta)
    return free_grid, curved_grid


def _theorem_member(sc: Scenario, member: str, sd, t0, det,
                    x0xi0: cl.PhasePoint, noise_floor: float) -> TheoremCheckReport:
    free_grid, curved_grid = _theorem_grids(sc.config.get("theorem", {}), sd, det, t0, member)
    theta_ray = sd.theta_minus
    if member == "chirp":
        u0 = _chirp_state(
            curved_grid,
            "curved",
            sc.metric,
            r_focus=sd.r_minus,
            t0=t0,
            theta0=theta_ray,
            theta_width=0.6,
            omega_ray=sd.omega_minus,
            rho_ray=sd.rho_minus,
            r_max_tail=float(curved_grid.r[0] + 0.90 * (curved_grid.r[-1] - curved_grid.r[0])),
        )
    elif member == "smooth":
        # mollified control: no incoming oscillatory structure and clear of
        # both detection windows (fixed-width compact windows read spurious
        # presence whenever they slice a state carrying mass at adjacent
        # momenta, so the control keeps a wide position/angle separation)
        r_ctr = max(x0xi0.r, sd.r_minus) + 12.0
        th_ctr = sd.theta_minus + np.pi

        def fn(r, th):
            dth = np.angle(np.exp(1j * (th - th_ctr)))
            return np.exp(-((r - r_ctr) ** 2) / (2 * 0.75**2) - dth**2 / (2 * 0.5**2))

        u0 = qu.state_from_function(curved_grid, fn, "curved", sc.metric, normalize=True)
    else:
        raise ConfigError(f"theorem.family: unknown member {member!r}")

    det_run = ml.DetectorConfig(
        eps0=det.eps0,
        n_rungs=det.n_rungs,
        threshold=det.threshold,
        marginal_lo=det.marginal_lo,
        widths=det.widths,
        psi_margin=det.psi_margin,
        noise_floor=noise_floor,
        kernel_tol=det.kernel_tol,
    )

    # left side: curved evolution, verdict at (x0, xi0)
    cap = qu.AbsorbingLayer(width=3.0, strength=40.0)
    prop = qu.CurvedPropagator(
        sc.metric, sc.potential, curved_grid, qu.EvolutionConfig(dt=0.125, absorbing_layer=cap)
    )
    left_state = prop.evolve(u0, t0)
    left_state = _resample_for_detection(left_state, det_run, x0xi0)
    left = ml.wf_test(left_state, x0xi0, det_run)

    # right side: free evolution of J* u0, verdict at the scattering data
    right_point = cl.PhasePoint(sd.r_minus, sd.theta_minus, sd.rho_minus, sd.omega_minus)
    j_star = qu.J_adjoint(u0, free_grid)
    right_state = qu.free_evolve(j_star, t0)
    right_state = _resample_for_detection(right_state, det_run, right_point)
    right = ml.wf_test(right_state, right_point, det_run)

    return TheoremCheckReport(
        left=left,
        right=right,
        agreement=_agreement(left, right),
        scattering=sd,
        member=member,
    )


def theorem_check(sc: Scenario) -> dict:
    """Desk-scale check of the singularity correspondence for one placement.

    Computes the scattering data of the configured nontrapped start,
    builds the singular/smooth test pair placed so the classical data
    hits the detection windows, evolves both sides and compares
    verdicts at the paired phase-space points.
    """
    cfg = sc.config
    tcfg = cfg["theorem"]
    t0 = float(tcfg.get("t0", 0.5))
    start = _validate_point(cfg["start"], "start")
    include_v = bool(cfg.get("classical", {}).get("include_potential", False))

    verdict = cl.detect_nontrapping(sc.metric, sc.potential, start, include_potential=include_v)
    if verdict.status != "nontrapped":
        raise NumericFailure(f"placement not nontrapped: {verdict.status}")
    sd = cl.extract_scattering_data(sc.metric, sc.potential, start, include_potential=include_v)

    det = _detector_config(cfg)
    if "detector" not in cfg:
        det = ml.DetectorConfig(eps0=1.0 / 3.0, n_rungs=5, widths=(2.0, 0.5, 0.3, 0.2), psi_margin=3.0)
    noise_floor = float(tcfg.get("noise_floor", 3e-4))

    members = tcfg.get("family", ["chirp", "smooth"])
    reports = []
    for member in members:
        reports.append(_theorem_member(sc, member, sd, t0, det, start, noise_floor))

    overall = "agree"
    if any(r.agreement == "contradiction" for r in reports):
        overall = "contradiction"
    elif any(r.agreement == "inconclusive" for r in reports):
        overall = "inconclusive"
    out = {
        "experiment": "theorem-check",
        "t0": t0,
        "agreement": overall,
        "members": [r.to_dict() for r in reports],
        "config": cfg,
    }
    _write_json(sc.out_dir / f"{sc.prefix}_theorem.json", out)
    return out


def _run_smoothing(sc: Scenario) -> dict:
    """Microlocal smoothing check: empty incoming rh-front implies a smooth point."""
    cfg = sc.config
    tcfg = cfg["theorem"]
    t0 = float(tcfg.get("t0", 0.5))
    start = _validate_point(cfg["start"], "start")
    sd = cl.extract_scattering_data(sc.metric, sc.potential, start)
    det = _detector_config(cfg)
    if "detector" not in cfg:
        det = ml.DetectorConfig(eps0=1.0 / 3.0, n_rungs=5, widths=(2.0, 0.5, 0.3, 0.2), psi_margin=3.0)
    noise_floor = float(tcfg.get("noise_floor", 3e-4))
    rh_point = cl.PhasePoint(-2.0 * t0 * sd.rho_minus, sd.theta_minus, sd.rho_minus, sd.omega_minus)
    # the radially homogeneous precondition needs the scaled windows on the grid
    eps_min = float(det.ladder()[-1])
    tcfg = dict(tcfg)
    tcfg.setdefault("r_max", (rh_point.r + 0.45) / eps_min / 0.90 + 5.0)
    free_grid, curved_grid = _theorem_grids(tcfg, sd, det, t0, member="chirp")

    # default u0: compact conormal jump placed inside the first scaled window gap
    state_spec = cfg.get("state", {"kind": "jump", "r_jump": max(4.0, sd.r_minus - 2.0), "envelope": 1.0})
    u0 = build_state(state_spec, curved_grid, "curved", sc.metric)

    rh_cfg = ml.DetectorConfig(
        eps0=det.eps0, n_rungs=det.n_rungs, widths=(0.4, 0.5, 0.3, 0.2), noise_floor=noise_floor
    )
    rh = ml.wf_rh_test(u0, rh_point, rh_cfg)

    cap = qu.AbsorbingLayer(width=3.0, strength=40.0)
    prop = qu.CurvedPropagator(
        sc.metric, sc.potential, curved_grid, qu.EvolutionConfig(dt=0.125, absorbing_layer=cap)
    )
    evolved = prop.evolve(u0, t0)
    det_run = ml.DetectorConfig(
        eps0=det.eps0, n_rungs=det.n_rungs, threshold=det.threshold,
        marginal_lo=det.marginal_lo, widths=det.widths, psi_margin=det.psi_margin,
        noise_floor=noise_floor, kernel_tol=det.kernel_tol,
    )
    evolved = _resample_for_detection(evolved, det_run, start)
    wf = ml.wf_test(evolved, start, det_run)

    implication_ok = True
    if rh.decision == "absent" and wf.decision == "present":
        implication_ok = False
    out = {
        "experiment": "smoothing-check",
        "t0": t0,
        "rh_verdict": rh.to_dict(),
        "wf_verdict": wf.to_dict(),
        "implication_holds": implication_ok,
        "config": cfg,
    }
    _write_json(sc.out_dir / f"{sc.prefix}_smoothing.json", out)
    if not implication_ok:
        raise NumericFailure("smoothing implication violated: empty rh-front but present verdict")
    return out


# ---------------------------------------------------------------------------
# dispatch / CLI
# ---------------------------------------------------------------------------


def run_scenario(sc: Scenario) -> dict:
    """Execute one validated scenario; deterministic given config + seed."""
    np.random.seed(sc.seed % 2**32)  # module-level fallback for any legacy draws
    runner = {
        "trajectory": _run_trajectory,
        "scatter-data": _run_scatter,
        "diffeo-check": _run_diffeo,
        "evolve-free": lambda s: _run_evolve(s, "free"),
        "evolve-curved": lambda s: _run_evolve(s, "curved"),
        "wf-test": _run_wf,
        "smoothing-check": _run_smoothing,
        "theorem-check": theorem_check,
    }[sc.kind]
    return runner(sc)


def _run_config_dict(cfg: dict, out_dir, seed) -> dict:
    sc = validate_config(cfg, out_dir=out_dir, seed=seed)
    return run_scenario(sc)


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    experiments = cfg.get("experiments")
    try:
        if experiments is None:
            results = [_run_config_dict(cfg, args.out, args.seed)]
        else:
            jobs = []
            for k, sub in enumerate(experiments):
                merged = {key: val for key, val in cfg.items() if key != "experiments"}
                merged.update(sub)
                seed = args.seed if args.seed is not None else merged.get("seed", 0)
                jobs.append((merged, args.out, (seed or 0) + k))
            for merged, *_ in jobs:
                validate_config(merged, out_dir=args.out)  # fail fast before the pool
            if args.threads > 1:
                with ProcessPoolExecutor(max_workers=args.threads) as pool:
                    results = list(pool.map(_pool_entry, jobs))
            else:
                results = [_run_config_dict(*job) for job in jobs]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    except (geo.GeometryError, qu.QuantumError, ml.MicrolocalError, cl.ChartExitError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    status = 0
    for res in results:
        kind = res.get("experiment", "experiment")
        line = f"{kind}: ok"
        if kind == "theorem-check":
            line = f"{kind}: {res['agreement']}"
            if res["agreement"] == "inconclusive":
                status = max(status, 3)
            elif res["agreement"] == "contradiction":
                status = max(status, 1)
        print(line)
    return status


def _pool_entry(job):
    return _run_config_dict(*job)


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
        validate_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print("config ok")
    return 0


def _cmd_list_metrics(_args) -> int:
    print("metrics:")
    for name, params in geo.metric_zoo().items():
        print(f"  {name}: " + (", ".join(f"{k}={v}" for k, v in params.items()) or "(no parameters)"))
    print("potentials:")
    for name, params in geo.potential_zoo().items():
        print(f"  {name}: " + ", ".join(f"{k}={v}" for k, v in params.items()))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="conic-scatter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")
    p_run.add_argument("--seed", type=int, default=None, help="seed override")
    p_run.add_argument("--threads", type=int, default=1, help="worker pool size for batches")
    p_run.set_defaults(fn=_cmd_run)
    p_val = sub.add_parser("validate", help="validate a scenario config")
    p_val.add_argument("config")
    p_val.set_defaults(fn=_cmd_validate)
    p_list = sub.add_parser("list-metrics", help="print the builtin metric zoo")
    p_list.set_defaults(fn=_cmd_list_metrics)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
