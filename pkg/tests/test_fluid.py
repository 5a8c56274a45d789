import numpy as np
import pytest

from conftest import random_band_limited
from fene.errors import CFLViolation, PositivityLoss
from fene.fluid import FluidState, FluidStepConfig, cfl_bound, \
    continuity_rhs, fluid_energy, max_principle_envelope, momentum_rhs, \
    phi_r, step, stress_divergence, viscous_divergence
from fene.model import ModelParams, density_to_r, r_to_density
from fene.torus import SIDE, SpectralField, forward, sobolev_norm


def constant_state(grid, rho, params, uvals=None):
    n = grid.n_points
    r = forward(grid, np.full((n, n), density_to_r(rho, params)))
    u = SpectralField.zero(grid, 2) if uvals is None \
        else forward(grid, uvals)
    return FluidState(r, u)


def test_phi_r_plateaus():
    assert phi_r(0.0, 5.0) == 1.0
    assert phi_r(5.0, 5.0) == 1.0
    assert phi_r(6.5, 5.0) == 0.0
    assert phi_r(6.0, 5.0) == 0.0
    for knot in (5.0, 6.0):
        h = 1e-8
        assert abs(phi_r(knot + h, 5.0) - phi_r(knot - h, 5.0)) < 1e-12
    h = 1e-6
    for knot in (5.0, 6.0):
        assert abs(phi_r(knot + h, 5.0) - phi_r(knot - h, 5.0)) < 5 * h ** 2 * 10
    y = np.linspace(5.0, 6.0, 200)
    assert np.all(np.diff(phi_r(y, 5.0)) <= 0)
    with pytest.raises(ValueError):
        phi_r(-1.0, 5.0)
    with pytest.raises(ValueError):
        phi_r(1.0, 0.0)


def test_positivity_checked_on_construction(grid32):
    r = forward(grid32, np.full((32, 32), -0.5))
    with pytest.raises(PositivityLoss):
        FluidState(r, SpectralField.zero(grid32, 2))


def test_continuity_rhs_zero_velocity(grid32, params):
    st = constant_state(grid32, 1.3, params)
    rhs = continuity_rhs(st, params, FluidStepConfig(dt=1e-3))
    assert np.max(np.abs(rhs.coeffs)) == 0.0


def test_continuity_rhs_closed_form(grid32, params):
    x1, _ = grid32.x
    c = 2.0
    st = FluidState(forward(grid32, np.full((32, 32), c)),
                    forward(grid32, np.stack([np.sin(x1),
                                              np.zeros_like(x1)])))
    rhs = continuity_rhs(st, params, FluidStepConfig(dt=1e-3))
    expect = -c * (params.gamma - 1.0) / 2.0 * np.cos(x1)
    assert np.max(np.abs(rhs.values()[0] - expect)) < 1e-12


def test_continuity_rhs_cutoff_support(grid32, params):
    x1, _ = grid32.x
    st = FluidState(forward(grid32, np.full((32, 32), 2.0)),
                    forward(grid32, np.stack([np.sin(x1),
                                              np.zeros_like(x1)])))
    # |u|_{2,inf} of (sin, 0) is about sqrt(5); a cutoff below it scales the
    # rhs by phi_R, far above it leaves the rhs untouched
    free = continuity_rhs(st, params, FluidStepConfig(dt=1e-3, cutoff_R=50.0))
    plain = continuity_rhs(st, params, FluidStepConfig(dt=1e-3))
    assert np.array_equal(free.coeffs, plain.coeffs)
    dead = continuity_rhs(st, params, FluidStepConfig(dt=1e-3, cutoff_R=1.0))
    assert np.max(np.abs(dead.coeffs)) == 0.0
    from fene.torus import sup_norm_w2inf
    y = sup_norm_w2inf(st.u)
    mid_R = y - 0.5
    mid = continuity_rhs(st, params, FluidStepConfig(dt=1e-3, cutoff_R=mid_R))
    assert np.allclose(mid.coeffs, phi_r(y, mid_R) * plain.coeffs, rtol=1e-13)


def test_momentum_rhs_equilibrium(grid32, params):
    st = constant_state(grid32, 1.0, params)
    rhs = momentum_rhs(st, None, None, params, FluidStepConfig(dt=1e-3))
    assert np.max(np.abs(rhs.coeffs)) == 0.0


def test_momentum_rhs_stress_divergence(grid32, params):
    x1, x2 = grid32.x
    c = 1.5
    st = constant_state(grid32, r_to_density(c, params), params)
    stress = forward(grid32, np.stack([np.sin(x1), 0.3 * np.sin(x1 + x2),
                                       np.cos(x2)]))
    rhs = momentum_rhs(st, stress, None, params, FluidStepConfig(dt=1e-3))
    g = stress_divergence(stress).values()
    d = 1.0 / r_to_density(c, params)
    assert np.max(np.abs(rhs.values() - d * g)) < 1e-10


def test_momentum_rhs_viscous_closed_form(grid32):
    p = ModelParams(mu_s=1.0, mu_b=0.0)
    _, x2 = grid32.x
    c = 2.0
    st = FluidState(forward(grid32, np.full((32, 32), c)),
                    forward(grid32, np.stack([np.sin(x2),
                                              np.zeros_like(x2)])))
    rhs = momentum_rhs(st, None, None, p, FluidStepConfig(dt=1e-3))
    d = 1.0 / r_to_density(c, p)
    assert np.max(np.abs(rhs.values()[0] + d * np.sin(x2))) < 1e-12
    assert np.max(np.abs(rhs.values()[1])) < 1e-13


def test_viscous_divergence_formula(grid32):
    p = ModelParams(mu_s=0.7, mu_b=0.4)
    rng = np.random.default_rng(0)
    u = random_band_limited(grid32, rng, components=2, kmax=5)
    div_s = viscous_divergence(u, p)
    lap = SpectralField(grid32, -grid32.ksq * u.coeffs)
    divc = 1j * grid32.k1 * u.coeffs[0] + 1j * grid32.k2 * u.coeffs[1]
    grad_div = SpectralField(grid32, np.stack([1j * grid32.k1 * divc,
                                               1j * grid32.k2 * divc]))
    expect = p.mu_s * lap.coeffs + p.mu_b * grad_div.coeffs
    assert np.max(np.abs(div_s.coeffs - expect)) < 1e-14


def test_step_equilibrium_fixed_point(grid32, params):
    st = constant_state(grid32, 1.0, params)
    stress = forward(grid32, np.stack([np.ones((32, 32)),
                                       np.zeros((32, 32)),
                                       np.ones((32, 32))]))
    cfg = FluidStepConfig(dt=1e-3)
    cur = st
    for _ in range(10):
        cur = step(cur, stress, None, params, cfg)
        assert np.max(np.abs(cur.r.coeffs - st.r.coeffs)) < 1e-12
        assert np.max(np.abs(cur.u.coeffs)) < 1e-12


def test_step_conservation(grid32, params):
    x1, x2 = grid32.x
    rho0 = 1.0 + 0.01 * np.cos(x1) * np.cos(x2)
    st = FluidState(
        forward(grid32, density_to_r(rho0, params)),
        forward(grid32, np.stack([0.1 + 0.02 * np.sin(x2),
                                  0.01 * np.sin(x1)])))
    cfg = FluidStepConfig(dt=1e-3)
    area = grid32.cell_area()

    def invariants(s):
        rho = r_to_density(s.r.values()[0], params)
        uv = s.u.values()
        return np.array([np.sum(rho), np.sum(rho * uv[0]),
                         np.sum(rho * uv[1])]) * area

    start = invariants(st)
    cur = st
    for _ in range(1000):
        cur = step(cur, None, None, params, cfg)
    drift = np.abs(invariants(cur) - start) / np.maximum(np.abs(start), 1.0)
    assert np.max(drift) < 1e-8


def test_cutoff_inactive_is_bitwise_identical(grid32, params):
    x1, x2 = grid32.x
    st = FluidState(
        forward(grid32, density_to_r(1.0 + 0.01 * np.cos(x1), params)),
        forward(grid32, np.stack([0.05 * np.sin(x2), np.zeros_like(x1)])))
    plain_cfg = FluidStepConfig(dt=1e-3)
    big_r_cfg = FluidStepConfig(dt=1e-3, cutoff_R=1e6)
    a, b = st, st
    for _ in range(20):
        a = step(a, None, None, params, plain_cfg)
        b = step(b, None, None, params, big_r_cfg)
    assert np.array_equal(a.r.coeffs, b.r.coeffs)
    assert np.array_equal(a.u.coeffs, b.u.coeffs)


def test_step_self_convergence_third_order(grid32, params):
    x1, x2 = grid32.x
    rho0 = 1.0 + 0.05 * np.cos(x1)
    st = FluidState(
        forward(grid32, density_to_r(rho0, params)),
        forward(grid32, np.stack([0.2 * np.sin(x2), 0.1 * np.sin(x1)])))
    horizon = 0.02

    def solve(dt):
        cfg = FluidStepConfig(dt=dt)
        cur = st
        for _ in range(int(round(horizon / dt))):
            cur = step(cur, None, None, params, cfg)
        return cur

    s1, s2, s3 = solve(2e-3), solve(1e-3), solve(5e-4)

    def dist(a, b):
        return np.sqrt(sobolev_norm(a.r - b.r, 0) ** 2 +
                       sobolev_norm(a.u - b.u, 0) ** 2)

    order = np.log2(dist(s1, s2) / dist(s2, s3))
    assert order > 2.7


def test_step_raises_cfl(grid32, params):
    x1, x2 = grid32.x
    st = FluidState(forward(grid32, np.full((32, 32),
                                            density_to_r(1.0, params))),
                    forward(grid32, np.stack([5.0 + np.sin(x2),
                                              np.zeros_like(x1)])))
    cfg = FluidStepConfig(dt=0.05)
    assert cfg.dt > cfl_bound(st, params, cfg)
    with pytest.raises(CFLViolation):
        step(st, None, None, params, cfg)


def test_step_raises_positivity_loss(grid32):
    p = ModelParams(gamma=3.0)
    x1, _ = grid32.x
    st = FluidState(forward(grid32, np.full((32, 32), 0.01)),
                    forward(grid32, np.stack([60.0 * np.sin(x1),
                                              np.zeros_like(x1)])),
                    check_positivity=False)
    cfg = FluidStepConfig(dt=0.05, cfl_safety=None)
    with pytest.raises(PositivityLoss):
        step(st, None, None, p, cfg)


def test_max_principle_envelope(grid32, params):
    r0 = forward(grid32, np.full((32, 32), 1.5))
    lo, hi = max_principle_envelope(r0, 0.0, params)
    assert (lo, hi) == (1.5, 1.5)
    p3 = ModelParams(gamma=3.0)
    lo, hi = max_principle_envelope(forward(grid32, np.ones((32, 32))),
                                    np.log(2.0), p3)
    assert lo == pytest.approx(0.5, rel=1e-14)
    assert hi == pytest.approx(2.0, rel=1e-14)
    lo2, hi2 = max_principle_envelope(forward(grid32, np.ones((32, 32))),
                                      2 * np.log(2.0), p3)
    assert lo2 < lo and hi2 > hi


def test_fluid_energy(grid32, params):
    zero = FluidState(SpectralField.zero(grid32, 1),
                      SpectralField.zero(grid32, 2), check_positivity=False)
    assert fluid_energy(zero, 0) == 0.0
    st = constant_state(grid32, r_to_density(1.0, params), params)
    assert fluid_energy(st, 0) == pytest.approx(SIDE ** 2, rel=1e-13)


def test_viscous_energy_decay(grid32, params):
    # frozen r, no advection, no stress: the viscous semigroup dissipates
    rng = np.random.default_rng(5)
    u = random_band_limited(grid32, rng, components=2, kmax=8, scale=0.3)
    st = FluidState(forward(grid32, np.full((32, 32),
                                            density_to_r(1.0, params))), u)
    cfg = FluidStepConfig(dt=5e-4, include_advection=False, freeze_r=True)
    energies = [fluid_energy(st, 0)]
    cur = st
    for _ in range(100):
        cur = step(cur, None, None, params, cfg)
        energies.append(fluid_energy(cur, 0))
    assert np.all(np.diff(energies) <= 1e-13)
    assert energies[-1] < energies[0]
