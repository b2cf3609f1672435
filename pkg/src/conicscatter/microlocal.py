"""Wave-front-set detectors built on grid Weyl quantization.

Membership of a phase-space point in the wave front set (fixed state),
the frequency set (semiclassically indexed family) or the radially
homogeneous wave front set is decided by measuring

    || g^(-1/4) psi Op_eps(a) psi g^(1/4) u ||

on a dyadic ladder eps_k = eps0 2^(-k) and fitting the decay exponent
of the norms.  Rapid decay is operationalized as a fitted exponent at
or above the threshold N* = 4 with a declared marginal band [3, 4);
exponents near zero mean the point carries phase-space mass.

Symbols are tensorized windows a = b_r(r) b_th(theta) b_rho(rho)
b_om(omega), so the Weyl operator factorizes into two one-dimensional
kernels.  Each kernel is evaluated by direct quadrature of the Weyl
integral: the momentum profile enters through its Fourier transform on
the lattice of grid differences (a Toeplitz factor), the position
profile through midpoint values.  Position-only symbols reduce to exact
multiplication operators and a missing momentum profile gives the
identity in that slot, which pins the unit-test special cases.  The
kernel is only materialized on the radial slab where the position
factor and the Fourier tail are above a truncation tolerance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np

from .classical import PhasePoint, _rhs_array, integrate_flow
from .geometry import Potential, ScatteringMetric
from .profiles import descending_step, descending_step_d, plateau_bump, rising_plateau

__all__ = [
    "MicrolocalError",
    "TruncationError",
    "SymbolCutoff",
    "DetectorConfig",
    "HLadder",
    "WFVerdict",
    "weyl_apply",
    "fs_test",
    "wf_test",
    "wf_rh_test",
    "EscapeFunction",
    "build_escape_function",
    "escape_phi",
    "escape_phi_lagrange",
]


class MicrolocalError(Exception):
    pass


class TruncationError(MicrolocalError):
    """Scaled symbol support does not fit on the state's grid."""


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------


def _bump_factor(width: float):
    """1D plateau bump: 1 on |x| <= width/2, 0 beyond |x| >= width."""

    def b(x):
        return plateau_bump(x, 0.0, 0.5 * width, width)

    return b


@dataclass(frozen=True)
class SymbolCutoff:
    """Tensorized smooth window centered at a phase-space point.

    The value is a product of plateau bumps, equal to 1 at the center,
    nonnegative, and supported inside the per-coordinate widths.
    """

    center: PhasePoint
    widths: tuple  # (w_r, w_theta, w_rho, w_omega): support half-widths

    def __post_init__(self):
        if len(self.widths) != 4 or min(self.widths) <= 0:
            raise ValueError("need four positive widths")

    def factor(self, i: int) -> Callable:
        return _bump_factor(self.widths[i])

    def value(self, r, theta, rho, omega):
        c = self.center
        dth = np.angle(np.exp(1j * (np.asarray(theta) - c.theta)))
        return (
            self.factor(0)(np.asarray(r) - c.r)
            * self.factor(1)(dth)
            * self.factor(2)(np.asarray(rho) - c.rho)
            * self.factor(3)(np.asarray(omega) - c.omega)
        )


@dataclass(frozen=True)
class DetectorConfig:
    """Ladder and decision parameters of the wave-front detectors."""

    eps0: float = 0.25
    n_rungs: int = 5
    threshold: float = 4.0  # N*: absent iff exponent >= threshold
    marginal_lo: float = 3.0
    # wide position windows keep the psi truncation tails of smooth
    # states below the decision floor; momentum windows set the
    # phase-space selectivity
    widths: tuple = (1.2, 0.5, 0.35, 0.35)
    psi_margin: float = 2.0  # psi support extends this factor beyond the window
    noise_floor: float = 1e-7  # relative to the state norm; raise for solver-limited states
    kernel_tol: float = 1e-8  # Fourier-tail truncation of the Weyl kernel

    def ladder(self) -> np.ndarray:
        if self.n_rungs < 5:
            raise ValueError("ladder needs at least 5 rungs (K >= 4)")
        return self.eps0 * 2.0 ** (-np.arange(self.n_rungs, dtype=float))


@dataclass(frozen=True)
class HLadder:
    """Measured norms along the semiclassical ladder."""

    eps: np.ndarray
    norms: np.ndarray

    def __post_init__(self):
        if len(self.eps) < 5:
            raise ValueError("ladder needs at least 5 rungs")
        if not np.all(np.diff(self.eps) < 0):
            raise ValueError("ladder must be strictly decreasing in eps")


@dataclass(frozen=True)
class WFVerdict:
    """Fitted ladder decay and the membership decision."""

    point: PhasePoint
    ladder: HLadder
    decay_exponent: float
    decision: str  # absent | present | marginal
    threshold: float
    marginal_band: tuple
    detail: str = ""

    def to_dict(self) -> dict:
        finite = np.isfinite(self.decay_exponent)
        return {
            "point": {
                "r": self.point.r,
                "theta": self.point.theta,
                "rho": self.point.rho,
                "omega": self.point.omega,
            },
            "ladder": [
                {"eps": float(e), "norm": float(n)}
                for e, n in zip(self.ladder.eps, self.ladder.norms)
            ],
            # infinite exponents (ladders dead below the floor) serialize as null
            "exponent": float(self.decay_exponent) if finite else None,
            "decision": self.decision,
            "threshold": float(self.threshold),
        }


# ---------------------------------------------------------------------------
# 1D Weyl kernels
# ---------------------------------------------------------------------------

_FT_REACH_CACHE: dict = {}


def _ft_reach(tol: float) -> float:
    """s-range (for the unit-width bump) beyond which |B(s)| < tol |B(0)|."""
    key = round(float(np.log10(tol)), 3)
    if key not in _FT_REACH_CACHE:
        b = _bump_factor(1.0)
        xi = np.linspace(-1.0, 1.0, 4001)
        bxi = b(xi)
        s = np.linspace(0.0, 400.0, 8001)
        B = np.abs(np.exp(1j * np.outer(s, xi)) @ bxi)
        B /= B[0]
        above = np.nonzero(B > tol)[0]
        _FT_REACH_CACHE[key] = float(s[above[-1]]) if len(above) else 0.0
    return _FT_REACH_CACHE[key]


def _momentum_transform(profile: Callable, width: float, center: float, s_values):
    """B(s) = int b(xi - center) exp(i s xi) dxi on the difference lattice."""
    n_xi = 1024
    xi = np.linspace(-width, width, n_xi)
    bxi = profile(xi)
    s = np.asarray(s_values, dtype=float)
    out = np.empty(len(s), dtype=complex)
    chunk = 2048
    for i0 in range(0, len(s), chunk):
        sl = s[i0 : i0 + chunk]
        out[i0 : i0 + chunk] = np.exp(1j * np.outer(sl, xi)) @ bxi
    return out * (xi[1] - xi[0]) * np.exp(1j * s * center)


def _weyl_matrix_1d(
    x: np.ndarray,
    eps: float,
    pos_profile: Optional[Callable],
    pos_center: float,
    mom_profile: Optional[Callable],
    mom_center: float,
    mom_width: float,
    periodic: bool = False,
    pos_scale: float = 1.0,
):
    """Dense Weyl kernel K[i, j] on a uniform 1D axis.

    K = (dx / (2 pi eps)) b_pos(pos_scale * midpoint) B_mom((x_i - x_j) / eps);
    the Toeplitz Fourier factor is evaluated once on the difference
    lattice.  On the circle the +-2 pi images are summed.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    dx = x[1] - x[0] if n > 1 else 1.0
    if mom_profile is None:
        diag = np.ones(n) if pos_profile is None else pos_profile(pos_scale * x - pos_center)
        return np.diag(diag.astype(complex))
    offsets = np.arange(n)[:, None] - np.arange(n)[None, :]  # i - j
    shifts = [0.0]
    if periodic:
        shifts = [-2.0 * np.pi, 0.0, 2.0 * np.pi]
    K = np.zeros((n, n), dtype=complex)
    diffs = np.arange(-(n - 1), n) * dx
    for shift in shifts:
        B = _momentum_transform(mom_profile, mom_width, mom_center, (diffs + shift) / eps)
        Bmat = B[offsets + (n - 1)]
        if pos_profile is None:
            pos = 1.0
        else:
            mid = 0.5 * (x[:, None] + x[None, :]) - 0.5 * shift
            arg = pos_scale * mid - pos_center
            if periodic:
                # the position symbol lives on the circle
                arg = np.angle(np.exp(1j * arg))
            pos = pos_profile(arg)
        K = K + pos * Bmat
    return K * (dx / (2.0 * np.pi * eps))


def _radial_slab(symbol: SymbolCutoff, eps: float, grid, scaling: str, tol: float):
    """(i0, i1) radial index range where the kernel can act at this rung."""
    c, w = symbol.center, symbol.widths
    lo, hi = c.r - w[0], c.r + w[0]
    if scaling == "radially-homogeneous":
        lo, hi = lo / eps, hi / eps
    reach = _ft_reach(tol) / w[2] * eps  # Fourier-tail length in r units
    lo, hi = lo - reach, hi + reach
    i0 = int(np.searchsorted(grid.r, lo))
    i1 = int(np.searchsorted(grid.r, hi)) + 1
    return max(0, i0), min(grid.n_r, i1)


class _Slab:
    """Lightweight radial sub-grid view used by the quantization stage."""

    def __init__(self, r, n_theta):
        self.r = r
        self.n_theta = n_theta
        self.dr = float(r[1] - r[0]) if len(r) > 1 else 1.0
        self.theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        self.dtheta = 2.0 * np.pi / n_theta


def _check_resolution(symbol: SymbolCutoff, eps: float, grid):
    """Grid sanity at this rung: >= 8 radial points per oscillation of the
    scaled symbol momenta, and the angular mode band inside Nyquist with
    margin (the circle quadrature is exact for resolved modes)."""
    kmax = (abs(symbol.center.rho) + symbol.widths[2]) / eps
    if kmax > 0:
        need = 2.0 * np.pi / (8.0 * kmax)
        if grid.dr > need * (1 + 1e-12):
            raise MicrolocalError(
                f"grid under-resolves the symbol at eps={eps:g}: need dr <= {need:.3g}, "
                f"have {grid.dr:.3g}"
            )
    m_need = (abs(symbol.center.omega) + symbol.widths[3]) / eps
    if grid.n_theta < 2.2 * m_need:
        raise MicrolocalError(
            f"angular grid under-resolves the symbol at eps={eps:g}: "
            f"need n_theta >= {int(np.ceil(2.2 * m_need))}, have {grid.n_theta}"
        )


def _apply_radial_chunked(symbol, eps, values, slab, pos_scale, chunk=512):
    """values @ A_r.T without materializing the full radial kernel."""
    c, w = symbol.center, symbol.widths
    x = slab.r
    n = len(x)
    dx = slab.dr
    diffs = np.arange(-(n - 1), n) * dx
    B = _momentum_transform(symbol.factor(2), w[2], c.rho, diffs / eps)
    out = np.empty_like(values)
    pos_fn = symbol.factor(0)
    for i0 in range(0, n, chunk):
        i1 = min(n, i0 + chunk)
        rows = np.arange(i0, i1)
        offs = rows[:, None] - np.arange(n)[None, :] + (n - 1)
        mid = 0.5 * (x[rows][:, None] + x[None, :])
        Kc = pos_fn(pos_scale * mid - c.r) * B[offs]
        out[:, i0:i1] = values @ Kc.T
    return out * (dx / (2.0 * np.pi * eps))


def _apply_on_slab(symbol, eps, values, slab: _Slab, scaling: str):
    """Factorized Weyl application on a radial slab (all theta rows)."""
    c, w = symbol.center, symbol.widths
    pos_scale = eps if scaling == "radially-homogeneous" else 1.0
    if len(slab.r) > 2048:
        out = _apply_radial_chunked(symbol, eps, values, slab, pos_scale)
    else:
        A_r = _weyl_matrix_1d(
            slab.r, eps, symbol.factor(0), c.r, symbol.factor(2), c.rho, w[2],
            periodic=False, pos_scale=pos_scale,
        )
        out = values @ A_r.T
    A_t = _weyl_matrix_1d(
        slab.theta, eps, symbol.factor(1), c.theta, symbol.factor(3), c.omega, w[3],
        periodic=True,
    )
    return A_t @ out


def weyl_apply(
    symbol: SymbolCutoff,
    eps: float,
    state,
    scaling: str = "standard",
    kernel_tol: float = 1e-8,
):
    """Apply the Weyl quantization of the scaled window symbol to a grid state.

    standard: a(r, theta, eps D_r, eps D_theta); radially-homogeneous:
    a(eps r, theta, eps D_r, eps D_theta).  Linear, and self-adjoint for
    the real window profiles.  Requires >= 8 points per oscillation at
    the scaled momenta; emits a truncation warning when the scaled
    position support escapes the grid.
    """
    grid = state.grid
    _check_resolution(symbol, eps, grid)
    c = symbol.center
    r_lo, r_hi = c.r - symbol.widths[0], c.r + symbol.widths[0]
    if scaling == "radially-homogeneous":
        r_lo, r_hi = r_lo / eps, r_hi / eps
    elif scaling != "standard":
        raise ValueError("scaling must be 'standard' or 'radially-homogeneous'")
    if r_lo < grid.r[0] - 1e-9 or r_hi > grid.r[-1] + 1e-9:
        warnings.warn(
            f"symbol position support [{r_lo:.2f}, {r_hi:.2f}] escapes the grid "
            f"[{grid.r[0]:.2f}, {grid.r[-1]:.2f}]",
            stacklevel=2,
        )
    i0, i1 = _radial_slab(symbol, eps, grid, scaling, kernel_tol)
    out = np.zeros_like(state.values)
    if i1 > i0:
        slab = _Slab(grid.r[i0:i1], grid.n_theta)
        out[:, i0:i1] = _apply_on_slab(symbol, eps, state.values[:, i0:i1], slab, scaling)
    return state.copy_with(out)


# ---------------------------------------------------------------------------
# sandwich norms and verdicts
# ---------------------------------------------------------------------------


def _psi_windows(symbol: SymbolCutoff, cfg: DetectorConfig, scaling: str):
    """(psi_r, psi_theta) cutoffs: 1 on the scaled position supports.

    For the radially homogeneous test psi is a rising radial plateau
    covering the union of the scaled supports over the whole ladder
    (hence r-independent far out); otherwise a plateau bump around the
    window.
    """
    c = symbol.center
    w_r, w_t = symbol.widths[0], symbol.widths[1]
    m = cfg.psi_margin

    if scaling == "radially-homogeneous":
        lo = (c.r - w_r) / cfg.eps0

        def psi_r(r):
            r = np.asarray(r, dtype=float)
            start = max(lo - m * w_r / cfg.eps0, 1.0)
            if start >= lo:
                return np.ones_like(r)
            return rising_plateau(r, start, lo)

    else:

        def psi_r(r):
            return plateau_bump(np.asarray(r, dtype=float), c.r, w_r, m * w_r)

    def psi_t(theta):
        dth = np.angle(np.exp(1j * (np.asarray(theta) - c.theta)))
        return plateau_bump(dth, 0.0, w_t, m * w_t)

    return psi_r, psi_t


def _sandwich_norm(symbol, eps, state, scaling, cfg) -> float:
    """|| g^(-1/4) psi Op(a) psi g^(1/4) u ||_H = flat L2 norm of the core.

    The kernel is only needed on supp(psi) x supp(psi): psi masks both
    the input and the output, so the radial slab is intersected with the
    psi support (a large saving at coarse rungs, where the Fourier reach
    of the kernel is long).
    """
    grid = state.grid
    _check_resolution(symbol, eps, grid)
    i0, i1 = _radial_slab(symbol, eps, grid, scaling, cfg.kernel_tol)
    if scaling == "standard":
        c, w = symbol.center, symbol.widths
        lo = c.r - cfg.psi_margin * w[0]
        hi = c.r + cfg.psi_margin * w[0]
        i0 = max(i0, int(np.searchsorted(grid.r, lo)))
        i1 = min(i1, int(np.searchsorted(grid.r, hi)) + 1)
    if i1 <= i0:
        return 0.0
    psi_r, psi_t = _psi_windows(symbol, cfg, scaling)
    slab = _Slab(grid.r[i0:i1], grid.n_theta)
    psi = psi_t(slab.theta)[:, None] * psi_r(slab.r)[None, :]
    dens = np.sqrt(state.density) if np.ndim(state.density) else np.sqrt(float(state.density))
    half = np.broadcast_to(dens, state.values.shape)[:, i0:i1]
    core = psi * (half * state.values[:, i0:i1])
    out = psi * _apply_on_slab(symbol, eps, core, slab, scaling)
    return float(np.sqrt(np.sum(np.abs(out) ** 2) * grid.dr * grid.dtheta))


def _fit_ladder(eps: np.ndarray, norms: np.ndarray, ref_norm: float, cfg: DetectorConfig):
    """(exponent, detail) from the measured ladder.

    The exponent is the log-log slope over the tail half of the rungs
    above the noise floor (the asymptotic rate, not the early-rung
    mixture; superpolynomial decay accelerates downward so the tail is
    the conservative choice for the absent threshold).  Ladders that
    change direction beyond tolerance are flagged non-monotone.
    """
    floor = cfg.noise_floor * max(ref_norm, 1e-300)
    live = np.nonzero(norms > floor)[0]
    if len(live) < 3:
        return np.inf, "below noise floor"
    tail = live[max(0, len(live) - max(3, (len(live) + 1) // 2)):]
    if np.max(norms[tail]) <= 30.0 * floor:
        # the whole fitted tail sits at the window-leakage scale
        return np.inf, "below noise floor"
    slope = np.polyfit(np.log(eps[tail]), np.log(norms[tail]), 1)[0]
    detail = ""
    ratios = norms[tail][1:] / np.maximum(norms[tail][:-1], 1e-300)
    if np.any(ratios > 1.3) and np.any(ratios < 1.0 / 1.3):
        detail = "non-monotone ladder"
    return float(slope), detail


def _decide(exponent: float, cfg: DetectorConfig, detail: str) -> str:
    if exponent >= cfg.threshold:
        return "absent"
    if exponent >= cfg.marginal_lo or detail == "non-monotone ladder":
        return "marginal"
    return "present"


FamilyLike = Union[Callable, Mapping]


def _family_lookup(family: FamilyLike, eps: float):
    if callable(family):
        return family(eps)
    return family[eps]


def fs_test(
    u_family: FamilyLike,
    point: PhasePoint,
    cfg: DetectorConfig = DetectorConfig(),
    scaling: str = "standard",
) -> WFVerdict:
    """Frequency-set membership of an eps-indexed family at a phase point.

    The family is a callable eps -> state (or a mapping); each rung is
    measured with the density-weighted sandwich and the fitted decay
    exponent of the norms decides membership.
    """
    eps_ladder = cfg.ladder()
    symbol = SymbolCutoff(center=point, widths=cfg.widths)
    norms = []
    ref = 0.0
    for eps in eps_ladder:
        u = _family_lookup(u_family, float(eps))
        ref = max(ref, u.norm())
        norms.append(_sandwich_norm(symbol, float(eps), u, scaling, cfg))
    norms = np.asarray(norms)
    exponent, detail = _fit_ladder(eps_ladder, norms, ref, cfg)
    decision = _decide(exponent, cfg, detail)
    return WFVerdict(
        point=point,
        ladder=HLadder(eps=eps_ladder, norms=norms),
        decay_exponent=exponent,
        decision=decision,
        threshold=cfg.threshold,
        marginal_band=(cfg.marginal_lo, cfg.threshold),
        detail=detail,
    )


def wf_test(u, point: PhasePoint, cfg: DetectorConfig = DetectorConfig()) -> WFVerdict:
    """Wave-front-set membership of a fixed state (semiclassical ladder)."""
    return fs_test(lambda _eps: u, point, cfg, scaling="standard")


def wf_rh_test(u, point: PhasePoint, cfg: DetectorConfig = DetectorConfig()) -> WFVerdict:
    """Radially homogeneous variant: positions scale with 1/eps.

    The state must extend out to (center r + width) / eps_min; a grid
    that cannot hold the scaled support raises TruncationError.
    """
    eps_min = float(cfg.ladder()[-1])
    need = (point.r + cfg.widths[0]) / eps_min
    if u.grid.r[-1] < need - 1e-9:
        raise TruncationError(
            f"radially homogeneous test needs r_max >= {need:.1f}, grid ends at {u.grid.r[-1]:.1f}"
        )
    return fs_test(lambda _eps: u, point, cfg, scaling="radially-homogeneous")


# ---------------------------------------------------------------------------
# escape function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EscapeFunction:
    """Product of four shrinking window cutoffs following a reference ray.

    phi(t, z) = chi(|r - r(t)| / (5 d0 |t+T0|))
              * chi(|th - th(t)| / (d0 - C |t+T0|^-mu))
              * chi(|rho - rho(t)| / (d0 - C |t+T0|^-1-mu))
              * chi(|om - om(t)| / (d0 - C |t+T0|^-mu))

    with (r, th, rho, om)(t) the flow at time t + T0 from the reference
    start and chi a smooth nonincreasing step (1 below 1, 0 above 2).
    For T0 negative enough the Lagrange derivative d/dt + {p, .} of phi
    is nonpositive on t <= 0.
    """

    metric: ScatteringMetric
    V: Optional[Potential]
    start: PhasePoint
    delta0: float
    delta_prime: float
    C: float
    T0: float
    t_min: float
    _reference: Callable = field(repr=False, default=None)

    def reference(self, t):
        """Flow state at parameter t (flow time t + T0); shape (4, ...)."""
        return self._reference(np.asarray(t, dtype=float) + self.T0)

    def windows(self, t):
        t = np.asarray(t, dtype=float)
        s = np.abs(t + self.T0)
        mu = self.metric.mu
        w1 = 5.0 * self.delta0 * s
        w2 = self.delta0 - self.C * s ** (-mu)
        w3 = self.delta0 - self.C * s ** (-1.0 - mu)
        w4 = self.delta0 - self.C * s ** (-mu)
        if np.any(w2 <= 0) or np.any(w3 <= 0):
            raise MicrolocalError("T0 not negative enough: window widths collapsed")
        return w1, w2, w3, w4


def build_escape_function(
    metric: ScatteringMetric,
    V: Optional[Potential],
    start: PhasePoint,
    delta_prime: float = 0.1,
    C: float = 50.0,
    delta0: Optional[float] = None,
    T0: Optional[float] = None,
    t_min: float = -2e6,
    tol: float = 1e-10,
) -> EscapeFunction:
    """Escape function along the backward ray from ``start``.

    T0 defaults to -(2C/delta')^(1/mu), at which scale the shrinking
    window widths stay positive; the reference trajectory is integrated
    once and stored as a dense interpolant.
    """
    if delta0 is None:
        delta0 = 0.75 * delta_prime
    if not 0.5 * delta_prime < delta0 < delta_prime:
        raise ValueError("delta0 must lie in (delta'/2, delta')")
    if T0 is None:
        T0 = -((2.0 * C / delta_prime) ** (1.0 / metric.mu))
    traj = integrate_flow(metric, V, start, t_min + T0, tol=tol, n_samples=4097)
    if traj.chart_exit:
        raise MicrolocalError("reference trajectory left the chart; pick a nontrapped start")
    dense = traj._dense

    def reference(flow_t):
        return np.asarray(dense(np.asarray(flow_t, dtype=float)))

    return EscapeFunction(
        metric=metric,
        V=V,
        start=start,
        delta0=float(delta0),
        delta_prime=float(delta_prime),
        C=float(C),
        T0=float(T0),
        t_min=float(t_min),
        _reference=reference,
    )


def _phi_factors(ef: EscapeFunction, t, z):
    """chi factors and window data; z is (..., 4), t broadcastable."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    ref = np.moveaxis(ef.reference(t), 0, -1)
    w1, w2, w3, w4 = ef.windows(t)
    widths = np.stack(np.broadcast_arrays(w1, w2, w3, w4), axis=-1)
    delta = z - ref
    tau = np.abs(delta) / widths
    chi = descending_step(tau)
    return chi, tau, delta, widths


def escape_phi(ef: EscapeFunction, t, state) -> np.ndarray:
    """phi(t, state); accepts stacked states (..., 4) and broadcasting t."""
    z = state.as_array() if isinstance(state, PhasePoint) else np.asarray(state, dtype=float)
    chi, _tau, _d, _w = _phi_factors(ef, t, z)
    return np.prod(chi, axis=-1)[()]


def _prod_except(chi, i):
    out = np.ones_like(chi[..., 0])
    for j in range(chi.shape[-1]):
        if j != i:
            out = out * chi[..., j]
    return out


def escape_phi_lagrange(ef: EscapeFunction, t, state) -> np.ndarray:
    """Lagrange derivative (d/dt + {p, .}) of phi at (t, state).

    The explicit time dependence is differenced centrally (the reference
    data varies on the |T0| scale, so the step is benign); the
    phase-space gradient uses the closed-form chi derivative and is
    contracted with the Hamiltonian vector field.
    """
    z = state.as_array() if isinstance(state, PhasePoint) else np.asarray(state, dtype=float)
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)

    dt_step = 0.25
    phi_p = escape_phi(ef, t + dt_step, z)
    phi_m = escape_phi(ef, t - dt_step, z)
    dphi_dt = (phi_p - phi_m) / (2.0 * dt_step)

    chi, tau, delta, widths = _phi_factors(ef, t, z)
    dchi = descending_step_d(tau)  # <= 0
    grad = np.zeros_like(z)
    for i in range(4):
        grad[..., i] = (
            dchi[..., i] * np.sign(delta[..., i]) / widths[..., i] * _prod_except(chi, i)
        )

    F = _rhs_array(ef.metric, ef.V, z, include_potential=False)
    bracket = np.sum(F * grad, axis=-1)
    return (dphi_dt + bracket)[()]
