"""Hamiltonian flow on the end chart and classical scattering data.

The flow of the kinetic symbol p is integrated backward in time in the
polar phase-space coordinates (r, theta, rho, omega).  Composing with
the inverse of the one-dimensional free flow (r, rho) -> (r + 2 t rho,
rho) gives the sheared map

    S_t = (r(t) - 2 t rho(t), theta(t), rho(t), omega(t)),

whose t -> -infinity limit is the scattering data (r_-, theta_-, rho^-,
omega^-).  Convergence is algebraic with component-wise rates tied to
the metric decay exponent mu, so limits are obtained by fitting
y(t) = y_inf + c |t|^(-beta) on a geometric time ladder.

The potential V never enters the flow unless ``include_potential`` is
set; the scattering data of the kinetic flow is the object of interest
and V is lower order for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .geometry import (
    DomainError,
    Potential,
    ScatteringMetric,
    symbol_p,
    symbol_p_gradient,
)

__all__ = [
    "ChartExitError",
    "StiffnessError",
    "PhasePoint",
    "Trajectory",
    "ScatteringData",
    "VariationalState",
    "TrappingVerdict",
    "DiffeoReport",
    "PhaseWindow",
    "hamilton_rhs",
    "flow_energy",
    "integrate_flow",
    "integrate_flow_batch",
    "comparison_flow",
    "scattering_map_S_t",
    "extract_scattering_data",
    "jacobian_S_t",
    "check_local_diffeo",
    "detect_nontrapping",
    "radial_acceleration_squared",
    "fit_power_tail",
    "cartesian_to_polar",
    "polar_to_cartesian",
    "wrap_angle",
]

R_EXIT = 1.05  # chart-exit margin: computations stop once r <= R_EXIT


class ChartExitError(Exception):
    """Trajectory left the end chart; carries the last valid time."""

    def __init__(self, message, t_exit=None, state=None):
        super().__init__(message)
        self.t_exit = t_exit
        self.state = state


class StiffnessError(Exception):
    """Adaptive step-size underflow."""


# ---------------------------------------------------------------------------
# phase-space types
# ---------------------------------------------------------------------------


def wrap_angle(theta):
    """Reduce an angle (or array) to [0, 2*pi)."""
    w = np.mod(theta, 2.0 * np.pi)
    # np.mod can round up to the period itself for tiny negative inputs
    return np.where(w >= 2.0 * np.pi, 0.0, w)[()]


@dataclass(frozen=True)
class PhasePoint:
    """Polar phase-space point (r, theta, rho, omega).

    theta is stored as given (a continuous lift along trajectories);
    ``wrapped`` reduces it mod 2*pi.  Points on the free line may carry
    any real r; flow entry points must satisfy r > 1.
    """

    r: float
    theta: float
    rho: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.theta, self.rho, self.omega], dtype=float)

    @staticmethod
    def from_array(y) -> "PhasePoint":
        y = np.asarray(y, dtype=float)
        return PhasePoint(float(y[0]), float(y[1]), float(y[2]), float(y[3]))

    @property
    def wrapped(self) -> float:
        return float(wrap_angle(self.theta))


@dataclass(frozen=True)
class Trajectory:
    """Sampled backward flow history.

    ``t`` is strictly decreasing from 0 toward t_end and ``y`` holds the
    matching (r, theta, rho, omega) rows with theta unwrapped.
    """

    t: np.ndarray
    y: np.ndarray
    energy_drift: float
    t_span: tuple
    chart_exit: bool = False
    exit_time: Optional[float] = None

    @property
    def samples(self):
        return [(float(ti), PhasePoint.from_array(yi)) for ti, yi in zip(self.t, self.y)]

    @property
    def end_point(self) -> PhasePoint:
        return PhasePoint.from_array(self.y[-1])


@dataclass(frozen=True)
class ScatteringData:
    """Limits of the sheared flow with extrapolation diagnostics.

    theta_minus is reduced to [0, 2*pi); theta_winding counts full turns
    of the continuous lift.  ``err`` and ``beta_fit`` are per-component
    dictionaries keyed by r/theta/rho/omega.
    """

    r_minus: float
    theta_minus: float
    rho_minus: float
    omega_minus: float
    theta_winding: int
    err: dict
    beta_fit: dict
    mu_used: float
    status: str = "ok"

    def as_array(self) -> np.ndarray:
        theta = self.theta_minus + 2.0 * np.pi * self.theta_winding
        return np.array([self.r_minus, theta, self.rho_minus, self.omega_minus])


@dataclass(frozen=True)
class VariationalState:
    """Sheared-flow point together with its Jacobian w.r.t. the start."""

    point: PhasePoint
    jacobian: np.ndarray
    t: float


@dataclass(frozen=True)
class TrappingVerdict:
    status: str  # nontrapped | trapped | undecided
    escape_time: Optional[float]
    C_fit: Optional[float]
    virial_C: Optional[float] = None
    detail: str = ""


@dataclass(frozen=True)
class PhaseWindow:
    """Axis-aligned box in phase space."""

    center: PhasePoint
    half_widths: tuple  # (dr, dtheta, drho, domega)

    def sample(self, n: int, rng) -> np.ndarray:
        c = self.center.as_array()
        w = np.asarray(self.half_widths, dtype=float)
        return c[None, :] + rng.uniform(-1.0, 1.0, size=(n, 4)) * w[None, :]


# ---------------------------------------------------------------------------
# flow right-hand side
# ---------------------------------------------------------------------------


def _rhs_array(metric, V, y, include_potential):
    """Hamilton RHS for y[..., 0:4] = (r, theta, rho, omega).

    r is clamped just above the cone tip so that rejected trial stages
    of the adaptive integrator cannot poke outside the chart; accepted
    trajectory values never go below R_EXIT because of the terminal
    exit event.
    """
    r, theta, rho, omega = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    r = np.maximum(r, 1.0 + 1e-9)
    dp_r, dp_t, dp_rho, dp_omega = symbol_p_gradient(metric, r, theta, rho, omega)
    out = np.empty_like(y)
    out[..., 0] = dp_rho
    out[..., 1] = dp_omega
    out[..., 2] = -dp_r
    out[..., 3] = -dp_t
    if include_potential and V is not None:
        out[..., 2] -= V.d_dr(r, theta)
        out[..., 3] -= V.d_dtheta(r, theta)
    return out


def hamilton_rhs(
    metric: ScatteringMetric,
    V: Optional[Potential],
    state: PhasePoint,
    include_potential: bool = False,
) -> np.ndarray:
    """(dr/dt, dtheta/dt, drho/dt, domega/dt) at a phase point.

    Raises DomainError for r <= 1.  For the flat metric this reduces to
    (2 rho, 2 omega / r^2, 2 omega^2 / r^3, 0).
    """
    if state.r <= 1.0:
        raise DomainError("left the chart: hamilton_rhs requires r > 1")
    return _rhs_array(metric, V, state.as_array(), include_potential)


def flow_energy(metric, V, y, include_potential=False):
    """Conserved energy of the flow generator (kinetic p, plus V when included)."""
    y = np.asarray(y, dtype=float)
    p = symbol_p(metric, y[..., 0], y[..., 1], y[..., 2], y[..., 3])
    if include_potential and V is not None:
        p = p + V.value(y[..., 0], y[..., 1])
    return p


def radial_acceleration_squared(metric, V, y, include_potential=False, delta=1e-7):
    """d^2(r^2)/dt^2 along the flow, from 2 rdot^2 + 2 r rddot.

    rddot is the directional derivative of the dr/dt component along the
    Hamiltonian vector field, evaluated by a centered difference along
    the flow direction.
    """
    y = np.asarray(y, dtype=float)
    F = _rhs_array(metric, V, y, include_potential)
    scale = delta / np.maximum(np.linalg.norm(F, axis=-1, keepdims=True), 1e-12)
    Fp = _rhs_array(metric, V, y + scale * F, include_potential)
    Fm = _rhs_array(metric, V, y - scale * F, include_potential)
    rddot = (Fp[..., 0] - Fm[..., 0]) / (2.0 * scale[..., 0])
    return 2.0 * F[..., 0] ** 2 + 2.0 * y[..., 0] * rddot


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def _default_samples(t_end: float, n: int) -> np.ndarray:
    # denser near t=0, logarithmic toward t_end
    u = np.linspace(0.0, np.log1p(abs(t_end)), n)
    t = -(np.expm1(u))
    t[-1] = t_end
    return t


def integrate_flow(
    metric: ScatteringMetric,
    V: Optional[Potential],
    start: PhasePoint,
    t_end: float,
    tol: float = 1e-10,
    t_eval=None,
    n_samples: int = 257,
    method: str = "RK45",
    include_potential: bool = False,
) -> Trajectory:
    """Backward flow with adaptive embedded Runge-Kutta stepping.

    Returns a Trajectory sampled at ``t_eval`` (or a log-spaced default),
    with the relative energy drift measured on the samples.  A chart
    exit (r <= 1.05) terminates integration and flags the trajectory.
    """
    if t_end >= 0:
        raise ValueError("t_end must be negative (backward integration)")
    if start.r <= 1.0:
        raise DomainError("start must lie in the end chart (r > 1)")
    if t_eval is None:
        t_eval = _default_samples(t_end, n_samples)
    t_eval = np.asarray(t_eval, dtype=float)

    def rhs(t, y):
        return _rhs_array(metric, V, y, include_potential)

    def exit_event(t, y):
        return y[0] - R_EXIT

    exit_event.terminal = True
    exit_event.direction = -1

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        start.as_array(),
        method=method,
        rtol=tol,
        atol=tol * 1e-2,
        t_eval=t_eval,
        events=[exit_event],
        dense_output=True,
    )
    if sol.status == -1:
        raise StiffnessError(sol.message)
    chart_exit = sol.status == 1
    exit_time = float(sol.t_events[0][0]) if chart_exit and len(sol.t_events[0]) else None

    t = sol.t
    y = sol.y.T
    e = flow_energy(metric, V, y, include_potential)
    e0 = flow_energy(metric, V, start.as_array(), include_potential)
    drift = float(np.max(np.abs(e - e0)) / max(abs(e0), 1e-300))
    traj = Trajectory(
        t=t,
        y=y,
        energy_drift=drift,
        t_span=(float(t_end), 0.0),
        chart_exit=chart_exit,
        exit_time=exit_time,
    )
    object.__setattr__(traj, "_dense", sol.sol)
    return traj


def integrate_flow_batch(
    metric: ScatteringMetric,
    V: Optional[Potential],
    starts: np.ndarray,
    t_eval: np.ndarray,
    tol: float = 1e-10,
    method: str = "RK45",
    include_potential: bool = False,
) -> np.ndarray:
    """Integrate many trajectories jointly (shared adaptive steps).

    ``starts`` is (n, 4); returns (len(t_eval), n, 4).  All trajectories
    must remain inside the chart; a chart exit raises ChartExitError
    (callers with potentially-exiting windows fall back to single-
    trajectory integration).
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n = starts.shape[0]
    t_eval = np.asarray(t_eval, dtype=float)
    t_end = float(t_eval.min())

    def rhs(t, yflat):
        y = yflat.reshape(n, 4)
        return _rhs_array(metric, V, y, include_potential).ravel()

    def exit_event(t, yflat):
        return yflat.reshape(n, 4)[:, 0].min() - R_EXIT

    exit_event.terminal = True
    exit_event.direction = -1

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        starts.ravel(),
        method=method,
        rtol=tol,
        atol=tol * 1e-2,
        t_eval=np.sort(t_eval)[::-1],
        events=[exit_event],
    )
    if sol.status == -1:
        raise StiffnessError(sol.message)
    if sol.status == 1:
        raise ChartExitError(
            "a batch trajectory left the chart", t_exit=float(sol.t_events[0][0])
        )
    y = sol.y.T.reshape(len(sol.t), n, 4)
    # restore requested ordering
    idx = {float(tv): k for k, tv in enumerate(sol.t)}
    out = np.stack([y[idx[float(tv)]] for tv in t_eval], axis=0)
    return out


def _integrate_sheared_batch(
    metric, V, starts, t_eval, tol=1e-10, method="RK45", include_potential=False
):
    """Integrate the sheared system (R, theta, rho, omega) directly.

    Keeping R = r - 2 t rho as the integration variable avoids the
    relative-tolerance loss on r itself, which grows like |t| while the
    sheared components stay O(1).  Returns (len(t_eval), n, 4).
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n = starts.shape[0]
    t_eval = np.asarray(t_eval, dtype=float)
    t_end = float(t_eval.min())

    def rhs(t, yflat):
        w = yflat.reshape(n, 4)
        return _sheared_rhs(metric, V, t, w, include_potential).ravel()

    def exit_event(t, yflat):
        w = yflat.reshape(n, 4)
        r = w[:, 0] + 2.0 * t * w[:, 2]
        return r.min() - R_EXIT

    exit_event.terminal = True
    exit_event.direction = -1

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        starts.ravel(),
        method=method,
        rtol=tol,
        atol=tol,
        t_eval=np.sort(t_eval)[::-1],
        events=[exit_event],
    )
    if sol.status == -1:
        raise StiffnessError(sol.message)
    if sol.status == 1:
        raise ChartExitError("sheared batch left the chart", t_exit=float(sol.t_events[0][0]))
    y = sol.y.T.reshape(len(sol.t), n, 4)
    idx = {float(tv): k for k, tv in enumerate(sol.t)}
    return np.stack([y[idx[float(tv)]] for tv in t_eval], axis=0)


def comparison_flow(state: PhasePoint, t: float) -> PhasePoint:
    """Free radial flow (r, theta, rho, omega) -> (r + 2 t rho, theta, rho, omega)."""
    return PhasePoint(state.r + 2.0 * t * state.rho, state.theta, state.rho, state.omega)


def _shear(y, t):
    """Apply (r, ., ., .) -> (r - 2 t rho, ., ., .) to stacked states."""
    out = np.array(y, dtype=float, copy=True)
    out[..., 0] = out[..., 0] - 2.0 * t * out[..., 2]
    return out


def scattering_map_S_t(
    metric: ScatteringMetric,
    V: Optional[Potential],
    start: PhasePoint,
    t: float,
    tol: float = 1e-10,
    include_potential: bool = False,
) -> PhasePoint:
    """Sheared flow value S_t = (r(t) - 2 t rho(t), theta(t), rho(t), omega(t)).

    theta is returned unwrapped.  Chart exit raises ChartExitError with
    the last valid time.
    """
    if t == 0.0:
        return start
    traj = integrate_flow(metric, V, start, t, tol=tol, t_eval=[0.0, t], include_potential=include_potential)
    if traj.chart_exit:
        raise ChartExitError("flow left the chart before t", t_exit=traj.exit_time)
    return PhasePoint.from_array(_shear(traj.y[-1], t))


# ---------------------------------------------------------------------------
# rate-aware extrapolation
# ---------------------------------------------------------------------------


def _richardson_limit(yvals: np.ndarray, max_stages: int = 3):
    """Repeated dyadic-Richardson elimination with fitted stage exponents.

    Each stage estimates its exponent from the last difference ratios
    (the ladder is dyadic, so d_k / d_{k+1} -> 2^beta) and eliminates
    that power.  Returns (limit, err) with err the magnitude of the last
    correction applied.
    """
    cur = np.asarray(yvals, dtype=float)
    scale = max(np.max(np.abs(cur)), 1.0)
    err = float(np.max(cur) - np.min(cur))
    for _stage in range(max_stages):
        d = np.diff(cur)
        if len(d) < 3 or np.max(np.abs(d)) < 1e-12 * scale:
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = d[:-1] / d[1:]
        ratios = ratios[np.isfinite(ratios) & (ratios > 1.01)]
        if len(ratios) == 0:
            break
        beta = float(np.log2(np.median(ratios[-3:])))
        cur = cur[1:] + np.diff(cur) / (2.0**beta - 1.0)
        if len(cur) >= 2:
            err = float(abs(cur[-1] - cur[-2]))
    return float(cur[-1]), err


def fit_power_tail(t_abs: np.ndarray, yvals: np.ndarray, beta_fallback: float):
    """Fit y = y_inf + c |t|^(-beta) on a geometric ladder.

    The limit comes from exponent-fitted Richardson elimination (a plain
    three-parameter nonlinear fit cannot separate the next-order tail
    well enough for the flat-metric oracle tolerances); the exponent is
    then the log-log slope of |y - y_inf| over the rungs above the
    extrapolation noise floor, which is the least-squares solution for
    (c, beta) at the pinned limit.  On failure the Richardson value at
    the fallback exponent is used.  Returns (y_inf, c, beta, err,
    monotone); a flat ladder reports beta = inf.
    """
    t_abs = np.asarray(t_abs, dtype=float)
    yvals = np.asarray(yvals, dtype=float)
    scale = max(np.max(np.abs(yvals)), 1e-300)
    spread = float(np.max(yvals) - np.min(yvals))
    if spread < 1e-11 * max(scale, 1.0):
        return float(yvals[-1]), 0.0, np.inf, spread, True

    diffs = np.diff(yvals)
    mono = bool(np.all(diffs >= -1e-9 * scale) or np.all(diffs <= 1e-9 * scale))

    try:
        y_inf, err = _richardson_limit(yvals)
    except Exception:
        beta = beta_fallback
        ratio = 2.0 ** (-beta)
        y_inf = float(yvals[-1] + (yvals[-1] - yvals[-2]) * ratio / (1.0 - ratio))
        err = float(abs(yvals[-1] - y_inf))

    res = np.abs(yvals - y_inf)
    floor = max(30.0 * err, 1e-12 * max(scale, 1.0))
    mask = res > floor
    if mask.sum() >= 3:
        # fit on the tail half of the valid rungs: the asymptotic rate,
        # not the early-time mixture, is the reported exponent
        valid = np.flatnonzero(mask)
        tail = valid[max(0, len(valid) - max(4, len(valid) // 2)):]
        sl, ic = np.polyfit(np.log(t_abs[tail]), np.log(res[tail]), 1)
        beta = float(np.clip(-sl, 0.02, 10.0))
        c = float(np.sign(yvals[tail][-1] - y_inf) * np.exp(ic))
    else:
        beta = np.inf
        c = 0.0
    return float(y_inf), c, beta, float(err), mono


def extract_scattering_data(
    metric: ScatteringMetric,
    V: Optional[Potential],
    start: PhasePoint,
    tol: float = 1e-10,
    t0_ladder: float = 16.0,
    n_doublings: int = 12,
    include_potential: bool = False,
    method: str = "RK45",
) -> ScatteringData:
    """Scattering data by rate-aware extrapolation along t_k = -t0 2^k.

    One backward integration supplies S_t at every ladder time; each
    component is fitted with a free-exponent power law.  Expected rates:
    beta ~ mu for r/theta/omega (theta picks up (1+mu)/2 when the mixed
    block dominates) and beta ~ 1 + mu for rho.  Twelve doublings keep
    the extrapolated flat-metric limits at the 1e-7 level.
    """
    t_ladder = -t0_ladder * 2.0 ** np.arange(n_doublings + 1)
    sheared = _integrate_sheared_batch(
        metric,
        V,
        start.as_array()[None, :],
        t_eval=t_ladder,
        tol=tol,
        method=method,
        include_potential=include_potential,
    )[:, 0, :]
    t_abs = np.abs(t_ladder)

    names = ("r", "theta", "rho", "omega")
    limits, errs, betas = {}, {}, {}
    monotone_all = True
    for i, name in enumerate(names):
        y_inf, _c, beta, err, mono = fit_power_tail(t_abs, sheared[:, i], metric.mu)
        limits[name] = y_inf
        errs[name] = err
        betas[name] = beta
        monotone_all = monotone_all and mono

    status = "ok" if monotone_all else "extrapolation-unreliable"
    p0 = float(flow_energy(metric, V, start.as_array(), include_potential))
    if limits["rho"] >= 0:
        status = "invalid-incoming-momentum"
    if limits["rho"] ** 2 > p0 + 1e-6 + 100.0 * tol:
        status = "energy-bound-violated"

    theta_lift = limits["theta"]
    winding = int(np.floor(theta_lift / (2.0 * np.pi)))
    return ScatteringData(
        r_minus=limits["r"],
        theta_minus=float(wrap_angle(theta_lift)),
        rho_minus=limits["rho"],
        omega_minus=limits["omega"],
        theta_winding=winding,
        err=errs,
        beta_fit=betas,
        mu_used=metric.mu,
        status=status,
    )


# ---------------------------------------------------------------------------
# variational equations in the sheared frame
# ---------------------------------------------------------------------------


def _sheared_rhs(metric, V, t, w, include_potential):
    """RHS of the sheared flow (R, theta, rho, omega), R = r - 2 t rho."""
    y = np.array(w, dtype=float, copy=True)
    y[..., 0] = y[..., 0] + 2.0 * t * y[..., 2]
    F = _rhs_array(metric, V, y, include_potential)
    out = np.empty_like(F)
    out[..., 0] = F[..., 0] - 2.0 * y[..., 2] - 2.0 * t * F[..., 2]
    out[..., 1] = F[..., 1]
    out[..., 2] = F[..., 2]
    out[..., 3] = F[..., 3]
    return out


def _sheared_rhs_jacobian(metric, V, t, w, include_potential, delta=1e-6):
    """d(sheared RHS)/dw by central differences; w is (..., 4), result (..., 4, 4)."""
    w = np.asarray(w, dtype=float)
    out = np.empty(w.shape[:-1] + (4, 4))
    for j in range(4):
        step = delta * np.maximum(1.0, np.abs(w[..., j]))
        wp = np.array(w, copy=True)
        wm = np.array(w, copy=True)
        wp[..., j] += step
        wm[..., j] -= step
        Fp = _sheared_rhs(metric, V, t, wp, include_potential)
        Fm = _sheared_rhs(metric, V, t, wm, include_potential)
        out[..., :, j] = (Fp - Fm) / (2.0 * step[..., None])
    return out


def _integrate_variational_batch(
    metric, V, starts, t_eval, tol=1e-10, include_potential=False, method="RK45"
):
    """Sheared flow + Jacobian for a batch of starts.

    Returns (points, jacobians): (K, n, 4) and (K, n, 4, 4) at the
    requested (negative, decreasing-magnitude-unsorted) times.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n = starts.shape[0]
    t_eval = np.asarray(t_eval, dtype=float)
    t_end = float(t_eval.min())
    eye = np.broadcast_to(np.eye(4), (n, 4, 4))
    y0 = np.concatenate([starts, eye.reshape(n, 16)], axis=1).ravel()

    def rhs(t, yflat):
        z = yflat.reshape(n, 20)
        w = z[:, :4]
        J = z[:, 4:].reshape(n, 4, 4)
        dw = _sheared_rhs(metric, V, t, w, include_potential)
        A = _sheared_rhs_jacobian(metric, V, t, w, include_potential)
        dJ = np.einsum("nij,njk->nik", A, J)
        return np.concatenate([dw, dJ.reshape(n, 16)], axis=1).ravel()

    def exit_event(t, yflat):
        z = yflat.reshape(n, 20)
        r = z[:, 0] + 2.0 * t * z[:, 2]
        return r.min() - R_EXIT

    exit_event.terminal = True
    exit_event.direction = -1

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        y0,
        method=method,
        rtol=tol,
        atol=tol * 1e-2,
        t_eval=np.sort(t_eval)[::-1],
        events=[exit_event],
    )
    if sol.status == -1:
        raise StiffnessError(sol.message)
    if sol.status == 1:
        raise ChartExitError("variational batch left the chart", t_exit=float(sol.t_events[0][0]))
    z = sol.y.T.reshape(len(sol.t), n, 20)
    idx = {float(tv): k for k, tv in enumerate(sol.t)}
    order = [idx[float(tv)] for tv in t_eval]
    pts = z[order][:, :, :4]
    jac = z[order][:, :, 4:].reshape(len(t_eval), n, 4, 4)
    return pts, jac


def jacobian_S_t(
    metric: ScatteringMetric,
    V: Optional[Potential],
    start: PhasePoint,
    t: float,
    tol: float = 1e-10,
    include_potential: bool = False,
) -> VariationalState:
    """S_t value and its 4x4 Jacobian from the variational equations.

    The linearized system is integrated alongside the flow in the
    sheared coordinates, with jacobian(0) = I.
    """
    if t == 0.0:
        return VariationalState(point=start, jacobian=np.eye(4), t=0.0)
    if t > 0:
        raise ValueError("t must be <= 0")
    pts, jac = _integrate_variational_batch(
        metric, V, start.as_array()[None, :], [t], tol=tol, include_potential=include_potential
    )
    return VariationalState(point=PhasePoint.from_array(pts[0, 0]), jacobian=jac[0, 0], t=t)


@dataclass(frozen=True)
class DiffeoReport:
    """sup-norm record of ||J(t) - I|| over a sampled phase-space window."""

    t_ladder: tuple
    sup_deviation: dict
    n_samples: int
    n_chart_exit: int
    converged: bool
    passed: bool
    entries: tuple = ()


def check_local_diffeo(
    metric: ScatteringMetric,
    V: Optional[Potential],
    window: PhaseWindow,
    t_ladder: Sequence[float],
    n_samples: int = 24,
    seed: int = 0,
    tol: float = 1e-9,
    threshold: float = 0.5,
    include_potential: bool = False,
) -> DiffeoReport:
    """Sample ||J(t) - I|| over a window and compare with the threshold 1/2.

    Chart exits are recorded per-sample rather than raised; they mark
    windows that straddle trapped or core-bound trajectories.
    """
    rng = np.random.default_rng(seed)
    starts = window.sample(n_samples, rng)
    t_ladder = tuple(sorted(float(t) for t in t_ladder))  # most negative first
    try:
        _pts, jac = _integrate_variational_batch(
            metric, V, starts, list(t_ladder), tol=tol, include_potential=include_potential
        )
        exits = 0
        sup = {
            t: float(np.max(np.linalg.norm(jac[k] - np.eye(4), ord=2, axis=(1, 2))))
            for k, t in enumerate(t_ladder)
        }
    except ChartExitError:
        # fall back to per-sample integration, recording exits
        sup = {t: 0.0 for t in t_ladder}
        exits = 0
        for srow in starts:
            try:
                _p, j = _integrate_variational_batch(
                    metric, V, srow[None, :], list(t_ladder), tol=tol,
                    include_potential=include_potential,
                )
                for k, t in enumerate(t_ladder):
                    dev = float(np.linalg.norm(j[k, 0] - np.eye(4), ord=2))
                    sup[t] = max(sup[t], dev)
            except ChartExitError:
                exits += 1
    devs = [sup[t] for t in sorted(sup, reverse=True)]  # toward larger |t|
    converged = len(devs) < 3 or abs(devs[-1] - devs[-2]) <= 0.2 * max(devs[-1], 1e-12) + 2e-3
    passed = all(d < threshold for d in devs) and exits == 0
    return DiffeoReport(
        t_ladder=t_ladder,
        sup_deviation=sup,
        n_samples=n_samples,
        n_chart_exit=exits,
        converged=bool(converged),
        passed=bool(passed),
    )


# ---------------------------------------------------------------------------
# trapping detection
# ---------------------------------------------------------------------------


def detect_nontrapping(
    metric: ScatteringMetric,
    V: Optional[Potential],
    start: PhasePoint,
    T_max: float = 1e4,
    R_esc: float = 1e3,
    tol: float = 1e-9,
    include_potential: bool = False,
    virial_C_max: float = 1e3,
) -> TrappingVerdict:
    """Classify the backward trajectory as nontrapped / trapped / undecided.

    Nontrapped requires escape past R_esc with r increasing backward and
    the convexity surrogate d^2(r^2)/dt^2 >= 8 p0 - C r^(-mu) on the
    escaping tail.  Reaching -T_max below R_esc yields trapped when the
    orbit stayed in a bounded shell, otherwise undecided; a chart exit
    is undecided (documented behavior: the polar chart fails even on
    the trap-free flat plane for inward starts).
    """
    if start.r <= 1.0:
        raise DomainError("start must lie in the end chart (r > 1)")

    def rhs(t, y):
        return _rhs_array(metric, V, y, include_potential)

    def exit_event(t, y):
        return y[0] - R_EXIT

    exit_event.terminal = True
    exit_event.direction = -1

    def escape_event(t, y):
        return y[0] - R_esc

    escape_event.terminal = True
    escape_event.direction = 1

    sol = solve_ivp(
        rhs,
        (0.0, -abs(T_max)),
        start.as_array(),
        method="RK45",
        rtol=tol,
        atol=tol * 1e-2,
        events=[exit_event, escape_event],
        dense_output=True,
    )
    if sol.status == -1:
        raise StiffnessError(sol.message)

    if len(sol.t_events[0]):
        return TrappingVerdict(
            status="undecided",
            escape_time=None,
            C_fit=None,
            detail="chart exit before escape",
        )

    if len(sol.t_events[1]):
        t_esc = float(sol.t_events[1][0])
        y_esc = sol.y_events[1][0]
        rdot = _rhs_array(metric, V, y_esc, include_potential)[0]
        if rdot >= 0:
            return TrappingVerdict(
                status="undecided",
                escape_time=t_esc,
                C_fit=None,
                detail="crossed R_esc moving inward",
            )
        # escaping tail: sample the outer half of the run
        t_tail = np.linspace(t_esc, t_esc / 2.0, 64)
        y_tail = sol.sol(t_tail).T
        mask = y_tail[:, 0] > max(50.0, 2.0 * R_EXIT)
        y_tail = y_tail[mask]
        t_tail = t_tail[mask]
        C_fit = float(np.max((-y_tail[:, 0] + np.sqrt(y_tail[:, 0] ** 2 + 4.0 * np.abs(t_tail))) / 2.0))
        p0 = float(flow_energy(metric, V, start.as_array(), include_potential))
        virial_C = None
        if len(y_tail) >= 4:
            ddr2 = radial_acceleration_squared(metric, V, y_tail, include_potential)
            deficit = 8.0 * p0 - ddr2  # positive where below the asymptote
            virial_C = float(np.max(deficit * y_tail[:, 0] ** metric.mu, initial=0.0))
            if virial_C > virial_C_max:
                return TrappingVerdict(
                    status="undecided",
                    escape_time=t_esc,
                    C_fit=C_fit,
                    virial_C=virial_C,
                    detail="virial surrogate violated on tail",
                )
        return TrappingVerdict(status="nontrapped", escape_time=t_esc, C_fit=C_fit, virial_C=virial_C)

    # reached -T_max without escape
    t_late = np.linspace(-abs(T_max), -abs(T_max) / 4.0, 128)
    r_late = sol.sol(t_late)[0]
    if np.max(r_late) < R_esc / 4.0:
        return TrappingVerdict(
            status="trapped",
            escape_time=None,
            C_fit=None,
            detail=f"r stayed below {R_esc / 4.0:g} through -T_max",
        )
    return TrappingVerdict(
        status="undecided", escape_time=None, C_fit=None, detail="no escape by -T_max"
    )


# ---------------------------------------------------------------------------
# cartesian helpers (flat-plane identification)
# ---------------------------------------------------------------------------


def cartesian_to_polar(x, xi) -> PhasePoint:
    """Cotangent lift of Cartesian (x, xi) on the plane to (r, theta, rho, omega)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    r = float(np.hypot(x[0], x[1]))
    theta = float(np.arctan2(x[1], x[0]) % (2.0 * np.pi))
    rho = float((x[0] * xi[0] + x[1] * xi[1]) / r)
    omega = float(x[0] * xi[1] - x[1] * xi[0])
    return PhasePoint(r, theta, rho, omega)


def polar_to_cartesian(state: PhasePoint):
    """Inverse of cartesian_to_polar; returns (x, xi) arrays."""
    c, s = np.cos(state.theta), np.sin(state.theta)
    x = state.r * np.array([c, s])
    xi_r = state.rho * np.array([c, s])
    xi_t = (state.omega / state.r) * np.array([-s, c])
    return x, xi_r + xi_t
