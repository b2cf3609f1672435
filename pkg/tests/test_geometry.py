"""Metric zoo, inverse-symbol coefficients and decay-class validation."""

import numpy as np
import pytest
import sympy as sp

from conicscatter import geometry as geo


RNG = np.random.default_rng(20240615)


def random_chart_points(n, r_lo=2.0, r_hi=100.0):
    r = np.exp(RNG.uniform(np.log(r_lo), np.log(r_hi), n))
    theta = RNG.uniform(0.0, 2.0 * np.pi, n)
    return r, theta


# ---------------------------------------------------------------------------
# metric_matrix
# ---------------------------------------------------------------------------


def test_flat_matrix_is_conic():
    flat = geo.make_metric("flat")
    g = geo.metric_matrix(flat, 2.0, 0.0)
    assert np.allclose(g, np.diag([1.0, 4.0]))


def test_radial_perturbation_matrix():
    # m0(r) = r^{-1.5} only: g = diag(1 + 4^{-1.5}, 16) at r=4
    term = geo.PerturbationTerm(0, 1.5, lambda r, t: r**-1.5 * np.ones_like(np.asarray(t, float)))
    metric = geo.ScatteringMetric(perturbations=(term,), mu=0.5)
    g = geo.metric_matrix(metric, 4.0, 1.3)
    assert np.allclose(g, np.diag([1.0 + 4.0**-1.5, 16.0]))


def test_angular_perturbation_matrix_against_sympy():
    # m2 = 0.1 r^{-0.5} cos(theta): cross-check g_{22} with a symbolic evaluator
    r_s, t_s = sp.symbols("r t", positive=True)
    g22_expr = r_s**2 * (1 + sp.Rational(1, 10) * r_s ** sp.Rational(-1, 2) * sp.cos(t_s))
    g22 = sp.lambdify((r_s, t_s), g22_expr, "numpy")

    def m2(r, theta):
        return 0.1 * r**-0.5 * np.cos(theta)

    metric = geo.ScatteringMetric(
        perturbations=(geo.PerturbationTerm(2, 0.5, m2),), mu=0.5
    )
    for r, theta in [(9.0, 0.0), (4.0, 1.0), (25.0, 4.0)]:
        g = geo.metric_matrix(metric, r, theta)
        assert g[0, 0] == 1.0
        assert abs(g[1, 1] - g22(r, theta)) < 1e-12 * abs(g22(r, theta))


def test_matrix_domain_error():
    flat = geo.make_metric("flat")
    with pytest.raises(geo.DomainError):
        geo.metric_matrix(flat, 0.5, 0.0)


def test_matrix_validity_error():
    # huge negative m0 destroys positivity
    term = geo.PerturbationTerm(0, 1.5, lambda r, t: -5.0 * np.ones(np.broadcast_shapes(np.shape(r), np.shape(t))))
    metric = geo.ScatteringMetric(perturbations=(term,), mu=0.5)
    with pytest.raises(geo.MetricValidityError):
        geo.metric_matrix(metric, 1.2, 0.0)


# ---------------------------------------------------------------------------
# inverse coefficients and symbol
# ---------------------------------------------------------------------------


def test_flat_inverse_coeffs_exactly_zero():
    flat = geo.make_metric("flat")
    r, theta = random_chart_points(100)
    co = geo.inverse_symbol_coeffs(flat, r, theta)
    assert np.all(co.a0 == 0.0)
    assert np.all(co.a1 == 0.0)
    assert np.all(co.a2 == 0.0)


def test_radial_only_coeffs_closed_form():
    # m0 = eps r^{-1-mu}: a0 = -m0/(1+m0), a1 = a2 = 0
    eps, mu = 0.2, 0.5
    metric = geo.make_metric("radial", eps=eps, mu=mu)
    r, theta = random_chart_points(50)
    co = geo.inverse_symbol_coeffs(metric, r, theta)
    m0 = eps * r ** (-1.0 - mu)
    assert np.allclose(co.a0, -m0 / (1.0 + m0), rtol=1e-12, atol=1e-15)
    assert np.allclose(co.a1, 0.0)
    assert np.allclose(co.a2, 0.0)
    # direct matrix-inverse oracle
    g = geo.metric_matrix(metric, r, theta)
    ginv = np.linalg.inv(g)
    assert np.allclose(co.a0, ginv[:, 0, 0] - 1.0, atol=1e-14)


def test_inverse_identity_bulk():
    metric = geo.make_metric("bump")
    r, theta = random_chart_points(1000)
    g = geo.metric_matrix(metric, r, theta)
    co = geo.inverse_symbol_coeffs(metric, r, theta)
    h = metric.boundary.h_det(theta)
    ginv = np.empty_like(g)
    ginv[:, 0, 0] = 1.0 + co.a0
    ginv[:, 0, 1] = ginv[:, 1, 0] = co.a1 / (2.0 * r)
    ginv[:, 1, 1] = (1.0 / h + co.a2) / r**2
    err = np.abs(np.einsum("nij,njk->nik", g, ginv) - np.eye(2)).max()
    assert err < 1e-10


@pytest.mark.parametrize("name", ["flat", "bump", "radial", "well"])
def test_symbol_matches_dense_solve(name):
    metric = geo.make_metric(name)
    r, theta = random_chart_points(200)
    rho = RNG.normal(size=200)
    omega = RNG.normal(size=200)
    p = geo.symbol_p(metric, r, theta, rho, omega)
    g = geo.metric_matrix(metric, r, theta)
    xi = np.stack([rho, omega], axis=-1)
    p_dense = np.einsum("ni,ni->n", xi, np.linalg.solve(g, xi[..., None])[..., 0])
    assert np.max(np.abs(p - p_dense) / np.maximum(p_dense, 1e-30)) < 1e-10


def test_symbol_flat_values():
    flat = geo.make_metric("flat")
    assert geo.symbol_p(flat, 1.0 + 1e-12, 0.0, 0.0, 1.0) == pytest.approx(1.0)
    assert geo.symbol_p(flat, 2.0, 0.7, -1.0, 2.0) == pytest.approx(2.0)


def test_symbol_gradient_matches_finite_differences():
    metric = geo.make_metric("bump")
    r, theta = random_chart_points(40, r_lo=3.0)
    rho = RNG.normal(size=40)
    omega = RNG.normal(size=40)
    grads = geo.symbol_p_gradient(metric, r, theta, rho, omega)
    delta = 1e-6
    args = [r, theta, rho, omega]
    for i, grad in enumerate(grads):
        hi = [a.copy() for a in args]
        lo = [a.copy() for a in args]
        hi[i] = hi[i] + delta
        lo[i] = lo[i] - delta
        fd = (geo.symbol_p(metric, *hi) - geo.symbol_p(metric, *lo)) / (2.0 * delta)
        assert np.max(np.abs(grad - fd)) < 2e-6


def test_coefficient_decay_rates():
    # |a0| <= C r^{-1-mu}, |a1| <= C r^{-(1+mu)/2}, |a2| <= C r^{-mu}
    mu = 0.5
    metric = geo.make_metric("bump", mu=mu)
    r = np.geomspace(10.0, 1e4, 40)
    theta = np.full_like(r, 0.9)
    co = geo.inverse_symbol_coeffs(metric, r, theta)
    for a, rate in [(co.a0, 1 + mu), (co.a1, (1 + mu) / 2), (co.a2, mu)]:
        slope = np.polyfit(np.log(r), np.log(np.abs(a)), 1)[0]
        assert slope < -rate + 0.1


# ---------------------------------------------------------------------------
# decay validation
# ---------------------------------------------------------------------------


def test_validate_decay_pure_power():
    term = geo.PerturbationTerm(0, 1.5, lambda r, t: r**-1.5 * np.ones_like(np.asarray(t, float)))
    report = geo.validate_decay(term, k_max=2)
    assert report.slopes[0] == pytest.approx(-1.5, abs=0.05)
    assert report.slopes[1] == pytest.approx(-2.5, abs=0.05)
    assert report.ok


def test_validate_decay_flags_slow_term():
    # claims mu=2 but decays like r^{-1.5}
    term = geo.PerturbationTerm(0, 2.0, lambda r, t: r**-1.5 * np.ones_like(np.asarray(t, float)))
    report = geo.validate_decay(term, k_max=1)
    assert report.flagged[0]
    assert not report.ok


def test_validate_decay_log_oscillation_against_sympy():
    # m = r^{-1.5} sin(log r): derivative magnitude envelope still r^{-2.5}
    r_s = sp.symbols("r", positive=True)
    expr = r_s ** sp.Rational(-3, 2) * sp.sin(sp.log(r_s))
    d1 = sp.lambdify(r_s, sp.diff(expr, r_s), "numpy")

    def m(r, theta):
        return r**-1.5 * np.sin(np.log(r)) * np.ones_like(np.asarray(theta, float))

    term = geo.PerturbationTerm(0, 1.5, m)
    report = geo.validate_decay(term, k_max=1)
    # oracle: fit the symbolic derivative the same way and compare verdicts
    r_grid = np.geomspace(10.0, 1e3, 25)
    sym_slope = np.polyfit(np.log(r_grid), np.log(np.abs(d1(r_grid))), 1)[0]
    assert report.slopes[1] == pytest.approx(sym_slope, abs=0.15)
    assert report.flagged[1] == (sym_slope > -2.5 + 0.1)


def test_validate_decay_grid_too_coarse():
    term = geo.PerturbationTerm(0, 1.5, lambda r, t: r**-1.5 * np.ones_like(np.asarray(t, float)))
    with pytest.raises(geo.ResolutionError):
        geo.validate_decay(term, k_max=2, r_grid=np.array([10.0, 20.0, 40.0]))


def test_builtin_zoo_decay_classes():
    for name in ["bump", "radial", "well"]:
        metric = geo.make_metric(name)
        for term in metric.perturbations:
            report = geo.validate_decay(term, k_max=2)
            assert report.ok, (name, term.label, report.slopes)


def test_metric_validate_sweep_and_boundary():
    for name in ["flat", "bump", "radial", "well"]:
        geo.make_metric(name).validate()
    bclass = geo.BoundaryMetric(
        h=lambda t: 1.0 + 0.3 * np.cos(2 * t),
        dh_dtheta=lambda t: -0.6 * np.sin(2 * t),
    )
    bclass.validate()


def test_short_range_constructor_guards():
    with pytest.raises(geo.MetricValidityError):
        geo.ScatteringMetric(
            perturbations=(geo.PerturbationTerm(0, 0.9, lambda r, t: 0.0 * r * t),), mu=0.5
        )
    with pytest.raises(ValueError):
        geo.ScatteringMetric(mu=1.5)


def test_zoo_catalog():
    zoo = geo.metric_zoo()
    assert set(zoo) == {"flat", "bump", "radial", "well"}
    with pytest.raises(KeyError):
        geo.make_metric("nosuch")
    with pytest.raises(KeyError):
        geo.make_metric("bump", nonsense=1.0)
