"""Free evolution, the identification operator and the curved propagator."""

import numpy as np
import pytest

from conicscatter import classical as cl
from conicscatter import geometry as geo
from conicscatter import quantum as qu


FLAT = geo.make_metric("flat")
BUMP = geo.make_metric("bump")


def gaussian_free(grid, r0, k0, sig):
    def fn(r, theta):
        return np.exp(-((r - r0) ** 2) / (2 * sig**2) + 1j * k0 * r) * np.ones_like(theta)

    return qu.state_from_function(grid, fn, target="free")


# ---------------------------------------------------------------------------
# free evolution
# ---------------------------------------------------------------------------


def test_free_evolve_identity_at_zero():
    grid = qu.Grid2D.build(-20.0, 30.0, 0.1, 8)
    u = gaussian_free(grid, 5.0, 2.0, 1.0)
    out = qu.free_evolve(u, 0.0)
    assert np.allclose(out.values, u.values)


def test_free_evolve_plane_wave_multiplier():
    grid = qu.Grid2D.build(0.0, 40.0, 0.05, 4)
    k = 2.0 * np.pi * 8 / (grid.r[-1] + grid.dr - grid.r[0])  # exactly periodic mode
    u = qu.state_from_function(grid, lambda r, t: np.exp(1j * k * r) * np.ones_like(t), "free")
    out = qu.free_evolve(u, 0.7)
    expected = np.exp(-1j * 0.7 * k**2) * u.values
    assert np.max(np.abs(out.values - expected)) < 1e-12


def test_free_evolve_gaussian_closed_form():
    grid = qu.Grid2D.build(-40.0, 60.0, 0.05, 8)
    r0, k0, sig, t = 10.0, 3.0, 1.5, 1.3
    u = gaussian_free(grid, r0, k0, sig)
    out = qu.free_evolve(u, t)
    w2 = sig**2 + 2j * t
    rr = grid.r
    exact = (
        (sig**2 / w2) ** 0.5
        * np.exp(1j * k0 * rr - 1j * t * k0**2)
        * np.exp(-((rr - r0 - 2 * t * k0) ** 2) / (2 * w2))
    )
    assert np.max(np.abs(out.values[0] - exact)) < 1e-10


def test_free_evolve_unitary_and_group_law():
    grid = qu.Grid2D.build(-30.0, 50.0, 0.05, 8)
    u = gaussian_free(grid, 8.0, -2.0, 1.2)
    n0 = u.norm()
    a = qu.free_evolve(u, 0.4)
    assert abs(a.norm() - n0) < 1e-12 * n0
    two_step = qu.free_evolve(a, 0.9)
    one_step = qu.free_evolve(u, 1.3)
    assert np.max(np.abs(two_step.values - one_step.values)) < 1e-12


# ---------------------------------------------------------------------------
# identification operator
# ---------------------------------------------------------------------------


def aligned_grids(r_lo=-5.0, r_hi=30.0, dr=0.05, n_theta=32):
    free = qu.Grid2D.build(r_lo, r_hi, dr, n_theta)
    i0 = int(np.searchsorted(free.r, 1.06))
    curved = qu.Grid2D(r=free.r[i0:], n_theta=free.n_theta)
    return free, curved


def wiggly(grid, lo, hi, target, metric=None):
    def fn(r, th):
        env = np.exp(-(((r - 0.5 * (lo + hi)) / (0.15 * (hi - lo))) ** 2))
        return env * (np.cos(3 * th) + 1j * np.sin(2 * th + 0.3 * r))

    return qu.state_from_function(grid, fn, target=target, metric=metric)


def test_j_flat_density_factor():
    # flat metric: g^(1/4) = r^(1/2), so J multiplies by j(r) r^(-1/2)
    free, curved = aligned_grids()
    u = wiggly(free, 5, 20, "free", FLAT)
    Ju = qu.J_embed(u, FLAT, curved)
    i0 = int(np.searchsorted(free.r, curved.r[0] - 1e-9))
    expected = u.values[:, i0 : i0 + curved.n_r] * (
        qu.j_cutoff(curved.r) * curved.r**-0.5
    )[None, :]
    assert np.max(np.abs(Ju.values - expected)) < 1e-12


def test_j_norm_preserved_on_plateau():
    free, curved = aligned_grids()
    u = wiggly(free, 5, 25, "free", BUMP)  # supported well inside r > 2
    Ju = qu.J_embed(u, BUMP, curved)
    assert abs(Ju.norm() - u.norm()) < 1e-8 * u.norm()


def test_j_adjoint_identity():
    free, curved = aligned_grids()
    rng = np.random.default_rng(3)
    for k in range(20):
        lo = rng.uniform(3, 8)
        hi = lo + rng.uniform(5, 12)
        u = wiggly(free, lo, hi, "free", BUMP)
        v = wiggly(curved, lo + 0.5, hi + 1.0, "curved", BUMP)
        lhs = qu.J_embed(u, BUMP, curved).inner(v)
        rhs = u.inner(qu.J_adjoint(v, free))
        assert abs(lhs - rhs) < 1e-8 * u.norm() * v.norm()


def test_jj_adjoint_is_cutoff_squared():
    free, curved = aligned_grids()
    v = wiggly(curved, 2, 20, "curved", BUMP)
    JJs = qu.J_embed(qu.J_adjoint(v, free), BUMP, curved)
    j2 = qu.j_cutoff(curved.r)[None, :] ** 2
    assert np.max(np.abs(JJs.values - j2 * v.values)) < 1e-10
    u = wiggly(free, 2, 20, "free", BUMP)
    JsJ = qu.J_adjoint(qu.J_embed(u, BUMP, curved), free)
    ref = np.zeros_like(u.values)
    i0 = int(np.searchsorted(free.r, curved.r[0] - 1e-9))
    ref[:, i0 : i0 + curved.n_r] = u.values[:, i0 : i0 + curved.n_r] * j2
    assert np.max(np.abs(JsJ.values - ref)) < 1e-10


def test_j_grid_mismatch():
    free, _ = aligned_grids()
    off_grid = qu.Grid2D.build(1.06, 20.0, 0.043, free.n_theta)
    u = wiggly(free, 5, 20, "free", FLAT)
    with pytest.raises(qu.ResamplingError):
        qu.J_embed(u, FLAT, off_grid)


def test_j_cutoff_plateaus():
    r = np.array([1.1, 1.5, 1.75, 2.0, 5.0])
    j = qu.j_cutoff(r)
    assert j[0] == 0.0 and j[1] == 0.0 and j[3] == 1.0 and j[4] == 1.0
    assert 0.0 < j[2] < 1.0


# ---------------------------------------------------------------------------
# coherent states
# ---------------------------------------------------------------------------


def test_coherent_state_norm_and_center():
    grid = qu.Grid2D.build(1.06, 25.0, 0.01, 96)
    center = cl.PhasePoint(10.0, 1.0, -1.0, 0.3)
    eps = 1 / 32
    u = qu.make_coherent_state(center, eps, grid, "curved", BUMP)
    assert abs(u.norm() - 1.0) < 1e-10
    r_mean, th_mean = qu.position_expectation(u)
    assert abs(r_mean - center.r) < eps
    assert abs(th_mean - center.theta) < eps


def test_coherent_state_momentum_expectation():
    grid = qu.Grid2D.build(-5.0, 25.0, 0.01, 32)
    center = cl.PhasePoint(10.0, 0.5, -1.0, 0.0)
    eps = 1 / 32
    u = qu.make_coherent_state(center, eps, grid, "free")
    k_mean = qu.radial_momentum_expectation(u)
    assert abs(k_mean - center.rho / eps) < 1.0  # +- eps in symbol units


def test_coherent_state_resolution_error():
    grid = qu.Grid2D.build(1.06, 25.0, 0.2, 16)
    with pytest.raises(qu.ResolutionError):
        qu.make_coherent_state(cl.PhasePoint(10.0, 0.0, -1.0, 0.0), 1 / 64, grid, "curved", FLAT)


# ---------------------------------------------------------------------------
# curved propagator
# ---------------------------------------------------------------------------


def test_curved_flat_matches_cartesian_free():
    # the decisive physics oracle: on the flat metric the curved solver
    # must reproduce the closed-form free evolution of a 2D Gaussian
    grid = qu.Grid2D.build(1.05, 26.0, 0.05, 96)
    prop = qu.CurvedPropagator(FLAT, None, grid, qu.EvolutionConfig(absorbing_layer=None))
    x0 = np.array([8.0, 5.0])
    kvec = np.array([1.0, -1.2])
    sig = 1.0

    def u0_fn(r, th):
        x = r * np.cos(th)
        y = r * np.sin(th)
        return np.exp(
            -((x - x0[0]) ** 2 + (y - x0[1]) ** 2) / (2 * sig**2)
            + 1j * (kvec[0] * x + kvec[1] * y)
        )

    u0 = qu.state_from_function(grid, u0_fn, target="curved", metric=FLAT)
    t = 0.4
    ut = prop.evolve(u0, t)
    w2 = sig**2 + 2j * t
    tt, rr = grid.meshes()
    x = rr * np.cos(tt)
    y = rr * np.sin(tt)
    cen = x0 + 2 * t * kvec
    exact = (
        (sig**2 / w2)
        * np.exp(1j * (kvec[0] * x + kvec[1] * y) - 1j * t * (kvec @ kvec))
        * np.exp(-((x - cen[0]) ** 2 + (y - cen[1]) ** 2) / (2 * w2))
    )
    err = np.max(np.abs(ut.values - exact)) / np.max(np.abs(exact))
    assert err < 5e-3
    assert abs(ut.norm() - u0.norm()) < 1e-9


def test_curved_norm_conservation_bump():
    grid = qu.Grid2D.build(1.06, 24.0, 0.05, 32)
    prop = qu.CurvedPropagator(BUMP, None, grid, qu.EvolutionConfig(absorbing_layer=None))
    u = qu.make_coherent_state(cl.PhasePoint(10.0, 1.0, -0.8, 0.3), 1 / 8, grid, "curved", BUMP)
    out = prop.evolve(u, 0.5)
    assert abs(out.norm() - u.norm()) < 1e-8 * 0.5  # < 1e-8 per unit time


def test_curved_eigenmode_phase():
    grid = qu.Grid2D.build(1.05, 20.0, 0.05, 8)
    prop = qu.CurvedPropagator(FLAT, None, grid, qu.EvolutionConfig(absorbing_layer=None))
    vals, vecs = prop.eig_mode(3, k=3)
    lam = vals[1]
    phi = vecs[:, 1]
    w0 = np.tile(phi, (grid.n_theta, 1)) * np.exp(1j * 3 * grid.theta)[:, None]
    st0 = qu.CurvedState(grid, w0 * prop._q_state, FLAT)
    ev = prop.evolve(st0, 1.0)
    overlap = np.vdot(ev.values, st0.values * np.exp(-1j * lam))
    phase_err = abs(np.angle(overlap))
    assert phase_err < 1e-6
    assert abs(overlap) / np.vdot(st0.values, st0.values).real > 1 - 1e-9


def test_ehrenfest_tracking_bump():
    # quantum time eps * t_cl corresponds to classical flow time t_cl
    eps = 1 / 32
    center = cl.PhasePoint(9.0, 1.0, -1.0, 0.2)
    grid = qu.Grid2D.build(1.1, 16.0, 2 * np.pi / (8 * 1.5 / eps) / 1.2, 96)
    prop = qu.CurvedPropagator(BUMP, None, grid, qu.EvolutionConfig(absorbing_layer=None))
    u = qu.make_coherent_state(center, eps, grid, "curved", BUMP)
    t_cl = 0.5
    ut = prop.evolve(u, eps * t_cl)
    traj = cl.integrate_flow(BUMP, None, center, -1.0, t_eval=[0.0, -t_cl])
    # forward classical point: integrate backward from the forward flow is
    # equivalent to evaluating the reversed momentum trajectory; use the
    # time-reversal symmetry (rho, omega) -> (-rho, -omega)
    rev = cl.PhasePoint(center.r, center.theta, -center.rho, -center.omega)
    back = cl.integrate_flow(BUMP, None, rev, -t_cl, t_eval=[0.0, -t_cl]).end_point
    fwd = cl.PhasePoint(back.r, back.theta, -back.rho, -back.omega)
    r_mean, th_mean = qu.position_expectation(ut)
    assert abs(r_mean - fwd.r) < 3 * np.sqrt(eps)
    assert abs(np.angle(np.exp(1j * (th_mean - fwd.theta)))) < 3 * np.sqrt(eps)


def test_cn_matches_chebyshev_on_symmetric_metric():
    rad = geo.make_metric("radial")
    grid = qu.Grid2D.build(1.05, 18.0, 0.04, 16)
    st = qu.make_coherent_state(cl.PhasePoint(9.0, 0.5, -0.5, 0.2), 1 / 4, grid, "curved", rad)
    cheb = qu.CurvedPropagator(rad, None, grid, qu.EvolutionConfig(absorbing_layer=None))
    ref = cheb.evolve(st, 0.05)
    lam = cheb.spectral_bounds()[1]
    cfg_cn = qu.EvolutionConfig(scheme="crank-nicolson", dt=0.5 / lam, absorbing_layer=None)
    cn = qu.CurvedPropagator(rad, None, grid, cfg_cn)
    out = cn.evolve(st, 0.05)
    diff = np.sqrt(np.sum(np.abs(out.values - ref.values) ** 2 * out.weights))
    assert abs(out.norm() - st.norm()) < 1e-10
    assert diff < 2e-2


def test_cn_refuses_coarse_dt():
    rad = geo.make_metric("radial")
    grid = qu.Grid2D.build(1.05, 18.0, 0.04, 16)
    st = qu.make_coherent_state(cl.PhasePoint(9.0, 0.5, -0.5, 0.2), 1 / 4, grid, "curved", rad)
    cn = qu.CurvedPropagator(
        rad, None, grid, qu.EvolutionConfig(scheme="crank-nicolson", dt=1.0, absorbing_layer=None)
    )
    with pytest.raises(qu.QuantumError, match="dt"):
        cn.evolve(st, 0.05)


def test_cn_requires_symmetric_metric():
    grid = qu.Grid2D.build(1.06, 18.0, 0.04, 16)
    st = qu.make_coherent_state(cl.PhasePoint(9.0, 0.5, -0.5, 0.2), 1 / 4, grid, "curved", BUMP)
    cn = qu.CurvedPropagator(
        BUMP, None, grid, qu.EvolutionConfig(scheme="crank-nicolson", dt=1e-4, absorbing_layer=None)
    )
    with pytest.raises(qu.QuantumError, match="symmetric"):
        cn.evolve(st, 0.01)


def test_absorbing_layer_drains_outgoing():
    grid = qu.Grid2D.build(1.05, 20.0, 0.05, 8)
    cap = qu.AbsorbingLayer(width=3.0, strength=30.0)
    prop = qu.CurvedPropagator(FLAT, None, grid, qu.EvolutionConfig(dt=0.1, absorbing_layer=cap))
    # outgoing packet aimed at the outer edge
    u = qu.make_coherent_state(cl.PhasePoint(14.0, 0.5, 1.0, 0.0), 1 / 8, grid, "curved", FLAT)
    out = prop.evolve(u, 0.6)
    assert out.norm() < 0.6 * u.norm()  # most of the packet absorbed
    # interior content is not damaged: an interior packet keeps its norm
    v = qu.make_coherent_state(cl.PhasePoint(8.0, 0.5, 0.0, 0.0), 1 / 8, grid, "curved", FLAT)
    out_v = prop.evolve(v, 0.2)
    assert abs(out_v.norm() - v.norm()) < 1e-3


def test_resample_radial_band_limited():
    grid = qu.Grid2D.build(0.0, 20.0, 0.1, 4)
    k = 2.0 * np.pi * 10 / 20.0
    vals = np.exp(1j * k * grid.r)[None, :] * np.ones((4, 1))
    fine = qu.resample_radial(vals, 4)
    r_fine = grid.r[0] + np.arange(grid.n_r * 4) * grid.dr / 4
    assert np.max(np.abs(fine - np.exp(1j * k * r_fine)[None, :])) < 1e-10
