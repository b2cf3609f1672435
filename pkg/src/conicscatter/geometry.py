"""Asymptotically conic metrics on a surface end (1, inf) x S^1.

The end chart carries coordinates (r, theta) with conjugate momenta
(rho, omega).  A metric in this module has the block form

    g = (1 + m0) dr^2 + r m1 (dr dtheta + dtheta dr) + r^2 (h + m2) dtheta^2

where h(theta) > 0 is the boundary metric (a scalar at boundary
dimension 1) and the perturbations m0, m1, m2 decay in r with rates
r^(-1-mu), r^(-(1+mu)/2), r^(-mu) for an effective exponent
mu in (0, 1).  The kinetic symbol is the inverse quadratic form

    p(r, theta, rho, omega) = rho^2 + omega^2 / (h r^2)
        + a0 rho^2 + a1 rho omega / r + a2 omega^2 / r^2,

with correction coefficients a0, a1, a2 obtained from the 2x2 Cramer
inverse of the metric block.  All evaluation functions broadcast over
numpy arrays and are pure; metric objects are immutable after
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "DomainError",
    "MetricValidityError",
    "ResolutionError",
    "BoundaryMetric",
    "PerturbationTerm",
    "ScatteringMetric",
    "Potential",
    "SymbolCoeffs",
    "DecayReport",
    "metric_matrix",
    "metric_density",
    "inverse_symbol_coeffs",
    "symbol_p",
    "symbol_p_gradient",
    "validate_decay",
    "make_metric",
    "make_potential",
    "metric_zoo",
    "potential_zoo",
]


class GeometryError(Exception):
    """Base class for geometry failures."""


class DomainError(GeometryError):
    """Evaluation outside the end chart (r <= 1)."""


class MetricValidityError(GeometryError):
    """Metric matrix failed positive-definiteness / invertibility."""


class ResolutionError(GeometryError):
    """Sampling grid too coarse for the requested derivative order."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


def _fd_partial(fn, axis, rel_step=1e-6, min_step=1e-7):
    """Central finite-difference partial of fn(r, theta) in r (axis=0) or theta (axis=1)."""

    def d(r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if axis == 0:
            hstep = np.maximum(np.abs(r) * rel_step, min_step)
            return (fn(r + hstep, theta) - fn(r - hstep, theta)) / (2.0 * hstep)
        hstep = 1e-6
        return (fn(r, theta + hstep) - fn(r, theta - hstep)) / (2.0 * hstep)

    return d


@dataclass(frozen=True)
class BoundaryMetric:
    """Riemannian metric on the boundary circle.

    At boundary dimension 1 the metric is the single positive component
    h(theta); ``h_jk`` and ``h_det`` expose the matrix / determinant view
    used by the inner products and density factors.
    """

    h: Callable = lambda theta: np.ones_like(np.asarray(theta, dtype=float))
    dh_dtheta: Optional[Callable] = None
    dim: int = 1

    def __post_init__(self):
        if self.dim != 1:
            raise ValueError("only boundary dimension 1 is supported at runtime")
        if self.dh_dtheta is None:
            hfun = self.h

            def dh(theta, _h=hfun):
                theta = np.asarray(theta, dtype=float)
                return (_h(theta + 1e-6) - _h(theta - 1e-6)) / 2e-6

            object.__setattr__(self, "dh_dtheta", dh)

    def h_jk(self, theta):
        """Boundary metric as a (…, 1, 1) matrix."""
        val = np.asarray(self.h(np.asarray(theta, dtype=float)))
        return val[..., None, None]

    def h_det(self, theta):
        """det(h_jk); equals h itself at dimension 1."""
        return np.asarray(self.h(np.asarray(theta, dtype=float)))

    def validate(self, n_samples: int = 721, tol: float = 1e-12):
        """Check positivity, determinant consistency and 2*pi periodicity."""
        theta = np.linspace(0.0, 2.0 * np.pi, n_samples)
        hv = self.h_det(theta)
        if not np.all(hv > 0):
            raise MetricValidityError("boundary metric not positive")
        det = np.linalg.det(self.h_jk(theta))
        rel = np.max(np.abs(det - hv) / np.abs(hv))
        if rel > tol:
            raise MetricValidityError(f"h_det inconsistent with det(h_jk): rel err {rel:.2e}")
        per = np.max(np.abs(self.h_det(theta + 2.0 * np.pi) - hv))
        if per > tol * max(1.0, float(np.max(np.abs(hv)))):
            raise MetricValidityError("boundary metric not 2*pi periodic")


@dataclass(frozen=True)
class PerturbationTerm:
    """One decaying perturbation block m^l(r, theta) of the metric.

    ``order`` selects the block (0: dr^2, 1: mixed, 2: angular) and
    ``decay_mu`` is the declared decay exponent (|d_r^k m| <= C r^(-mu-k)).
    Analytic partials may be supplied; otherwise central differences are
    used, which is adequate for validation but slower for flow evaluation.
    """

    order: int
    decay_mu: float
    value: Callable
    d_dr: Optional[Callable] = None
    d_dtheta: Optional[Callable] = None
    label: str = ""

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError("perturbation order must be 0, 1 or 2")
        if self.decay_mu <= 0:
            raise ValueError("decay exponent must be positive")
        if self.d_dr is None:
            object.__setattr__(self, "d_dr", _fd_partial(self.value, 0))
        if self.d_dtheta is None:
            object.__setattr__(self, "d_dtheta", _fd_partial(self.value, 1))


@dataclass(frozen=True)
class ScatteringMetric:
    """Short-range perturbation of the cone dr^2 + r^2 h(theta) dtheta^2."""

    boundary: BoundaryMetric = field(default_factory=BoundaryMetric)
    perturbations: Sequence[PerturbationTerm] = ()
    mu: float = 0.5
    R_conic: float = 1.0
    name: str = "custom"

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValueError("effective decay exponent mu must lie in (0, 1)")
        object.__setattr__(self, "perturbations", tuple(self.perturbations))
        for term in self.perturbations:
            if term.order == 0 and term.decay_mu <= 1.0:
                raise MetricValidityError("short-range requires mu_0 > 1 for the dr^2 block")
            if term.order == 1 and term.decay_mu <= 0.5:
                raise MetricValidityError("short-range requires mu_1 > 1/2 for the mixed block")

    # -- perturbation sums per block --------------------------------------

    def m_values(self, r, theta):
        """(m0, m1, m2) at (r, theta), broadcast over arrays."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        shape = np.broadcast_shapes(r.shape, theta.shape)
        out = [np.zeros(shape), np.zeros(shape), np.zeros(shape)]
        for term in self.perturbations:
            out[term.order] = out[term.order] + term.value(r, theta)
        return out

    def m_partials(self, r, theta):
        """((d_r m0, d_theta m0), (d_r m1, ...), ...) at (r, theta)."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        shape = np.broadcast_shapes(r.shape, theta.shape)
        dr = [np.zeros(shape), np.zeros(shape), np.zeros(shape)]
        dth = [np.zeros(shape), np.zeros(shape), np.zeros(shape)]
        for term in self.perturbations:
            dr[term.order] = dr[term.order] + term.d_dr(r, theta)
            dth[term.order] = dth[term.order] + term.d_dtheta(r, theta)
        return dr, dth

    def is_rotationally_symmetric(self, n_samples: int = 64) -> bool:
        """True when all coefficients are numerically theta-independent."""
        theta = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
        r = np.full_like(theta, 7.3)
        h = self.boundary.h_det(theta)
        if np.ptp(h) > 1e-13:
            return False
        m0, m1, m2 = self.m_values(r, theta)
        return max(np.ptp(m0), np.ptp(m1), np.ptp(m2)) < 1e-13

    def validate(self, r_samples=None, n_theta: int = 64):
        """Positive-definiteness sweep over the sampled end chart."""
        self.boundary.validate()
        if r_samples is None:
            r_samples = np.geomspace(1.0 + 1e-6, 1e4, 80)
        theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
        rr, tt = np.meshgrid(r_samples, theta, indexing="ij")
        g = metric_matrix(self, rr, tt)
        # 2x2 PD <=> positive trace corner and positive determinant
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        if not (np.all(g[..., 0, 0] > 0) and np.all(det > 0)):
            raise MetricValidityError("metric not positive-definite on sampled domain")


@dataclass(frozen=True)
class Potential:
    """Short-range potential: |d_r^k d_theta^a V| <= C r^(2 - mu3 - k) with mu3 > 1."""

    value: Callable
    decay_mu3: float
    d_dr: Optional[Callable] = None
    d_dtheta: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        if self.decay_mu3 <= 1.0:
            raise ValueError("short-range potential requires mu3 > 1")
        if self.d_dr is None:
            object.__setattr__(self, "d_dr", _fd_partial(self.value, 0))
        if self.d_dtheta is None:
            object.__setattr__(self, "d_dtheta", _fd_partial(self.value, 1))


@dataclass(frozen=True)
class SymbolCoeffs:
    """Inverse-metric correction coefficients at a point (arrays broadcast).

    a0 multiplies rho^2, a1 multiplies rho*omega/r, a2 multiplies
    omega^2/r^2; all vanish identically for the exact cone.
    """

    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _check_chart(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 1.0):
        raise DomainError("end chart requires r > 1")
    return r


def metric_matrix(metric: ScatteringMetric, r, theta) -> np.ndarray:
    """Metric block (g_jk) at (r, theta) as a (..., 2, 2) array.

    Raises DomainError for r <= 1 and MetricValidityError when the result
    is not positive-definite.
    """
    r = _check_chart(r)
    theta = np.asarray(theta, dtype=float)
    m0, m1, m2 = metric.m_values(r, theta)
    h = metric.boundary.h_det(theta)
    g = np.empty(np.broadcast_shapes(r.shape, theta.shape) + (2, 2))
    g[..., 0, 0] = 1.0 + m0
    g[..., 0, 1] = r * m1
    g[..., 1, 0] = r * m1
    g[..., 1, 1] = r**2 * (h + m2)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    if not (np.all(g[..., 0, 0] > 0) and np.all(det > 0)):
        raise MetricValidityError("metric matrix not positive-definite at requested point")
    return g


def metric_density(metric: ScatteringMetric, r, theta):
    """sqrt(det g) = r sqrt((1+m0)(h+m2) - m1^2)."""
    r = _check_chart(r)
    theta = np.asarray(theta, dtype=float)
    m0, m1, m2 = metric.m_values(r, theta)
    h = metric.boundary.h_det(theta)
    disc = (1.0 + m0) * (h + m2) - m1**2
    if np.any(disc <= 0):
        raise MetricValidityError("metric degenerate at requested point")
    return r * np.sqrt(disc)


def _inverse_coeffs(metric: ScatteringMetric, r, theta):
    """(c_rr, c_rt, c_tt, h) with p = c_rr rho^2 + 2 c_rt rho omega / r + c_tt omega^2 / r^2."""
    m0, m1, m2 = metric.m_values(r, theta)
    h = metric.boundary.h_det(theta)
    D = (1.0 + m0) * (h + m2) - m1**2
    if np.any(D <= 0):
        raise MetricValidityError("metric block singular; cannot invert")
    c_rr = (h + m2) / D
    c_rt = -m1 / D
    c_tt = (1.0 + m0) / D
    return c_rr, c_rt, c_tt, h


def inverse_symbol_coeffs(metric: ScatteringMetric, r, theta) -> SymbolCoeffs:
    """Correction coefficients a0, a1, a2 of the inverse metric at (r, theta).

    For vanishing perturbations all three are exactly zero in floating
    point (conic exactness).
    """
    r = _check_chart(r)
    theta = np.asarray(theta, dtype=float)
    c_rr, c_rt, c_tt, h = _inverse_coeffs(metric, r, theta)
    return SymbolCoeffs(a0=c_rr - 1.0, a1=2.0 * c_rt, a2=c_tt - 1.0 / h)


def symbol_p(metric: ScatteringMetric, r, theta, rho, omega):
    """Kinetic symbol p = xi^T g^{-1} xi in polar phase-space coordinates."""
    r = _check_chart(r)
    theta = np.asarray(theta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    omega = np.asarray(omega, dtype=float)
    c_rr, c_rt, c_tt, _ = _inverse_coeffs(metric, r, theta)
    return c_rr * rho**2 + 2.0 * c_rt * rho * omega / r + c_tt * omega**2 / r**2


def symbol_p_gradient(metric: ScatteringMetric, r, theta, rho, omega):
    """(dp/dr, dp/dtheta, dp/drho, dp/domega), all analytic via the Cramer inverse."""
    r = _check_chart(r)
    theta = np.asarray(theta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    omega = np.asarray(omega, dtype=float)

    m0, m1, m2 = metric.m_values(r, theta)
    (dm0_r, dm1_r, dm2_r), (dm0_t, dm1_t, dm2_t) = metric.m_partials(r, theta)
    h = metric.boundary.h_det(theta)
    dh = np.asarray(metric.boundary.dh_dtheta(theta))

    D = (1.0 + m0) * (h + m2) - m1**2
    if np.any(D <= 0):
        raise MetricValidityError("metric block singular; cannot invert")
    dD_r = dm0_r * (h + m2) + (1.0 + m0) * dm2_r - 2.0 * m1 * dm1_r
    dD_t = dm0_t * (h + m2) + (1.0 + m0) * (dh + dm2_t) - 2.0 * m1 * dm1_t

    c_rr = (h + m2) / D
    c_rt = -m1 / D
    c_tt = (1.0 + m0) / D

    dc_rr_r = dm2_r / D - (h + m2) * dD_r / D**2
    dc_rt_r = -dm1_r / D + m1 * dD_r / D**2
    dc_tt_r = dm0_r / D - (1.0 + m0) * dD_r / D**2

    dc_rr_t = (dh + dm2_t) / D - (h + m2) * dD_t / D**2
    dc_rt_t = -dm1_t / D + m1 * dD_t / D**2
    dc_tt_t = dm0_t / D - (1.0 + m0) * dD_t / D**2

    dp_r = (
        dc_rr_r * rho**2
        + 2.0 * rho * omega * (dc_rt_r / r - c_rt / r**2)
        + omega**2 * (dc_tt_r / r**2 - 2.0 * c_tt / r**3)
    )
    dp_t = dc_rr_t * rho**2 + 2.0 * dc_rt_t * rho * omega / r + dc_tt_t * omega**2 / r**2
    dp_rho = 2.0 * c_rr * rho + 2.0 * c_rt * omega / r
    dp_omega = 2.0 * c_rt * rho / r + 2.0 * c_tt * omega / r**2
    return dp_r, dp_t, dp_rho, dp_omega


# ---------------------------------------------------------------------------
# decay-class validation
# ---------------------------------------------------------------------------


def _fd_derivative_sup_theta(value, r_grid, k, n_theta=32):
    """sup over theta of |d_r^k value| via order-k central differences, step r/100."""
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    rr = np.asarray(r_grid, dtype=float)[:, None]
    tt = theta[None, :]
    if k == 0:
        vals = np.abs(value(rr + 0.0 * tt, tt + 0.0 * rr))
        return vals.max(axis=1)
    step = rr / 100.0
    # central stencil: d^k f ~ sum_j (-1)^j C(k, j) f(r + (k/2 - j) h) / h^k
    acc = np.zeros((rr.shape[0], n_theta))
    from math import comb

    for j in range(k + 1):
        offset = (k / 2.0 - j) * step
        acc += (-1) ** j * comb(k, j) * value(rr + offset, tt + 0.0 * rr)
    return np.abs(acc / step**k).max(axis=1)


@dataclass(frozen=True)
class DecayReport:
    """Fitted log-log decay slopes of sup_theta |d_r^k m| against r."""

    decay_mu: float
    slopes: dict
    flagged: dict
    r_range: tuple

    @property
    def ok(self) -> bool:
        return not any(self.flagged.values())


def validate_decay(
    term: PerturbationTerm,
    k_max: int,
    r_grid=None,
    slope_margin: float = 0.1,
) -> DecayReport:
    """Fit the decay rate of a perturbation term and flag violations.

    For each derivative order k <= k_max the sup over theta of
    |d_r^k m(r, theta)| is computed by central finite differences with
    step r/100 and the log-log slope against r is fitted by least
    squares over r in [10, 1e3] (or the supplied grid).  Order k is
    flagged when the slope exceeds -(mu + k) + slope_margin.
    """
    if r_grid is None:
        r_grid = np.geomspace(10.0, 1e3, 25)
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.size < k_max + 3:
        raise ResolutionError("grid too coarse for requested derivative order")
    slopes, flagged = {}, {}
    logr = np.log(r_grid)
    for k in range(k_max + 1):
        sup = _fd_derivative_sup_theta(term.value, r_grid, k)
        if np.any(sup <= 0):
            # identically-zero derivative: decays faster than any power
            slopes[k] = -np.inf
            flagged[k] = False
            continue
        slope = np.polyfit(logr, np.log(sup), 1)[0]
        slopes[k] = float(slope)
        flagged[k] = bool(slope > -(term.decay_mu + k) + slope_margin)
    return DecayReport(
        decay_mu=term.decay_mu,
        slopes=slopes,
        flagged=flagged,
        r_range=(float(r_grid[0]), float(r_grid[-1])),
    )


# ---------------------------------------------------------------------------
# metric zoo
# ---------------------------------------------------------------------------


def _flat(**_params) -> ScatteringMetric:
    return ScatteringMetric(name="flat")


def _bump(eps: float = 0.1, mu: float = 0.5, **_params) -> ScatteringMetric:
    """Generic short-range perturbation exciting all three blocks.

    The decay rates follow the normalization mu0 = 1 + mu,
    mu1 = (1 + mu)/2, mu2 = mu.  Each block carries a nonvanishing
    angular mean so that the slow terms of every Hamilton equation have
    generically nonzero coefficients along trajectories (the angular
    parts alone would degenerate at the zeros of their theta-profiles).
    """
    mu0 = 1.0 + mu
    mu1 = 0.5 * (1.0 + mu)

    def m0(r, theta):
        return eps * (1.0 + 0.5 * np.cos(theta)) * r**(-mu0)

    def m0_r(r, theta):
        return -mu0 * eps * (1.0 + 0.5 * np.cos(theta)) * r**(-mu0 - 1.0)

    def m0_t(r, theta):
        return -0.5 * eps * np.sin(theta) * r**(-mu0)

    def m1(r, theta):
        return 1.4 * eps * r**(-mu1) * np.ones_like(np.asarray(theta, dtype=float))

    def m1_r(r, theta):
        return -1.4 * mu1 * eps * r**(-mu1 - 1.0) * np.ones_like(np.asarray(theta, dtype=float))

    def m1_t(r, theta):
        return np.zeros(np.broadcast_shapes(np.shape(r), np.shape(theta)))

    def m2(r, theta):
        return eps * np.cos(theta) * r**(-mu)

    def m2_r(r, theta):
        return -mu * eps * np.cos(theta) * r**(-mu - 1.0)

    def m2_t(r, theta):
        return -eps * np.sin(theta) * r**(-mu)

    terms = (
        PerturbationTerm(0, mu0, m0, m0_r, m0_t, label="radial"),
        PerturbationTerm(1, mu1, m1, m1_r, m1_t, label="mixed"),
        PerturbationTerm(2, mu, m2, m2_r, m2_t, label="angular"),
    )
    return ScatteringMetric(perturbations=terms, mu=mu, name="bump")


def _radial(eps: float = 0.1, mu: float = 0.5, **_params) -> ScatteringMetric:
    """Pure dr^2 perturbation m0 = eps r^(-1-mu)."""
    mu0 = 1.0 + mu

    def m0(r, theta):
        return eps * r**(-mu0) * np.ones_like(np.asarray(theta, dtype=float))

    def m0_r(r, theta):
        return -mu0 * eps * r**(-mu0 - 1.0) * np.ones_like(np.asarray(theta, dtype=float))

    def m0_t(r, theta):
        return np.zeros(np.broadcast_shapes(np.shape(r), np.shape(theta)))

    term = PerturbationTerm(0, mu0, m0, m0_r, m0_t, label="radial")
    return ScatteringMetric(perturbations=(term,), mu=mu, name="radial")


def _well(
    amp: float = 1.0,
    r_center: float = 10.0,
    width: float = 1.0,
    mu: float = 0.5,
    **_params,
) -> ScatteringMetric:
    """Rotationally symmetric angular bump m2 = amp exp(-(r-r_center)^2 / 2 width^2).

    The Gaussian localization creates a dip in the effective angular
    potential, hence a stable circular orbit near r_center: the builtin
    trapped example.
    """

    def m2(r, theta):
        g = amp * np.exp(-((np.asarray(r, dtype=float) - r_center) ** 2) / (2.0 * width**2))
        return g * np.ones_like(np.asarray(theta, dtype=float))

    def m2_r(r, theta):
        r = np.asarray(r, dtype=float)
        g = amp * np.exp(-((r - r_center) ** 2) / (2.0 * width**2))
        return -g * (r - r_center) / width**2 * np.ones_like(np.asarray(theta, dtype=float))

    def m2_t(r, theta):
        return np.zeros(np.broadcast_shapes(np.shape(r), np.shape(theta)))

    term = PerturbationTerm(2, mu, m2, m2_r, m2_t, label="well")
    return ScatteringMetric(perturbations=(term,), mu=mu, name="well")


_METRIC_ZOO = {
    "flat": (_flat, {}),
    "bump": (_bump, {"eps": 0.1, "mu": 0.5}),
    "radial": (_radial, {"eps": 0.1, "mu": 0.5}),
    "well": (_well, {"amp": 1.0, "r_center": 10.0, "width": 1.0, "mu": 0.5}),
}


def metric_zoo() -> dict:
    """Name -> default parameter table of the builtin metrics."""
    return {name: dict(defaults) for name, (_fn, defaults) in _METRIC_ZOO.items()}


def make_metric(name: str, **params) -> ScatteringMetric:
    if name not in _METRIC_ZOO:
        raise KeyError(f"unknown metric {name!r}; known: {sorted(_METRIC_ZOO)}")
    fn, defaults = _METRIC_ZOO[name]
    unknown = set(params) - set(defaults)
    if unknown:
        raise KeyError(f"unknown parameters {sorted(unknown)} for metric {name!r}")
    kw = dict(defaults)
    kw.update(params)
    return fn(**kw)


def _pot_inverse_power(c: float = 0.3, q: float = 0.5, mu3: Optional[float] = None) -> Potential:
    """Decaying potential V = c r^(-q), declared with mu3 = 1 + q (so r^(2-mu3-k) bounds hold)."""
    if mu3 is None:
        mu3 = 1.0 + q

    def V(r, theta):
        return c * np.asarray(r, dtype=float) ** (-q) * np.ones_like(np.asarray(theta, dtype=float))

    def V_r(r, theta):
        return -q * c * np.asarray(r, dtype=float) ** (-q - 1.0) * np.ones_like(
            np.asarray(theta, dtype=float)
        )

    def V_t(r, theta):
        return np.zeros(np.broadcast_shapes(np.shape(r), np.shape(theta)))

    return Potential(V, decay_mu3=mu3, d_dr=V_r, d_dtheta=V_t, name="inverse_power")


def _pot_subquadratic(c: float = 0.05, mu3: float = 1.5, angular: float = 0.0) -> Potential:
    """Growing-envelope potential V = c r^(2-mu3) (1 + angular cos theta)."""
    expo = 2.0 - mu3

    def V(r, theta):
        return c * np.asarray(r, dtype=float) ** expo * (1.0 + angular * np.cos(theta))

    def V_r(r, theta):
        return expo * c * np.asarray(r, dtype=float) ** (expo - 1.0) * (
            1.0 + angular * np.cos(theta)
        )

    def V_t(r, theta):
        return -c * np.asarray(r, dtype=float) ** expo * angular * np.sin(theta)

    return Potential(V, decay_mu3=mu3, d_dr=V_r, d_dtheta=V_t, name="subquadratic")


_POTENTIAL_ZOO = {
    "inverse_power": (_pot_inverse_power, {"c": 0.3, "q": 0.5}),
    "subquadratic": (_pot_subquadratic, {"c": 0.05, "mu3": 1.5, "angular": 0.0}),
}


def potential_zoo() -> dict:
    return {name: dict(defaults) for name, (_fn, defaults) in _POTENTIAL_ZOO.items()}


def make_potential(name: str, **params) -> Optional[Potential]:
    if name in (None, "none"):
        return None
    if name not in _POTENTIAL_ZOO:
        raise KeyError(f"unknown potential {name!r}; known: {sorted(_POTENTIAL_ZOO)}")
    fn, defaults = _POTENTIAL_ZOO[name]
    unknown = set(params) - set(defaults)
    if unknown:
        raise KeyError(f"unknown parameters {sorted(unknown)} for potential {name!r}")
    kw = dict(defaults)
    kw.update(params)
    return fn(**kw)
