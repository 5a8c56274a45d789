import numpy as np
import pytest

from fene.configspace import ConfDistribution, kramers_stress
from fene.coupling import CoupledState, FixedPointConfig, blowup_indicator, \
    constant_trajectory, contraction_factor, coupled_step, fixed_point_map, \
    run_fixed_point, stress_field, xs_distance, xs_norm
from fene.fluid import FluidState, FluidStepConfig, fluid_energy
from fene.fokker_planck import FPStepConfig, PolymerField, fp_energy, \
    polymer_mass
from fene.model import ModelParams, density_to_r, r_to_density
from fene.torus import SpectralField, forward, sobolev_norm, sup_norm_w2inf


def equilibrium_state(grid, basis, params):
    n = grid.n_points
    r = forward(grid, np.full((n, n), density_to_r(1.0, params)))
    u = SpectralField.zero(grid, 2)
    return CoupledState(FluidState(r, u),
                        PolymerField.equilibrium(grid, basis))


def perturbed_state(grid, basis, params, amp=1e-3):
    x1, x2 = grid.x
    n = grid.n_points
    rho = 1.0 + 0.5 * amp * np.cos(x1)
    r = forward(grid, density_to_r(rho, params))
    u = forward(grid, np.stack([0.1 + amp * np.sin(x2),
                                0.5 * amp * np.sin(x1)]))
    psi = PolymerField.from_coefficient_fields(
        grid, basis, {0: np.ones((n, n)), 1: amp * np.cos(x2)})
    return CoupledState(FluidState(r, u), psi)


@pytest.fixture(scope="module")
def cfgs():
    return FluidStepConfig(dt=1e-3), FPStepConfig(dt=1e-3, chi_index=32,
                                                  scheme="ssprk3_explicit")


def test_coupled_state_validates_time(grid32, basis32, params):
    st = equilibrium_state(grid32, basis32, params)
    bad_psi = PolymerField.equilibrium(grid32, basis32, time=0.5)
    with pytest.raises(ValueError):
        CoupledState(st.fluid, bad_psi)


def test_fixed_point_config_validates():
    with pytest.raises(ValueError):
        FixedPointConfig(horizon_T=0.1, s=2, s_prime=2)
    with pytest.raises(ValueError):
        FixedPointConfig(horizon_T=-1.0)


def test_stress_field_matches_pointwise_quadrature(grid16, basis16, quad16):
    rng = np.random.default_rng(0)
    n = grid16.n_points
    coeffs = np.zeros((basis16.n_basis, n, n), dtype=complex)
    for i in range(basis16.n_basis):
        coeffs[i] = np.fft.fft2(rng.standard_normal((n, n)) * 0.1) / n ** 2
    psi = PolymerField(grid16, basis16, coeffs)
    field_vals = stress_field(psi).values()
    cg = psi.coefficient_values()
    for ix, iy in ((0, 0), (3, 7), (10, 2)):
        dist = ConfDistribution(basis16, cg[:, ix, iy])
        direct = kramers_stress(dist, quad16)
        assert abs(field_vals[0, ix, iy] - direct[0, 0]) < 1e-10
        assert abs(field_vals[1, ix, iy] - direct[0, 1]) < 1e-10
        assert abs(field_vals[2, ix, iy] - direct[1, 1]) < 1e-10


def test_xs_norm_equilibrium(grid32, basis32):
    psi = PolymerField.equilibrium(grid32, basis32)
    traj = constant_trajectory(psi, 10, 0.1)   # spans [0, 1]
    assert xs_norm(traj, 0) == pytest.approx(2 * np.pi, rel=1e-12)
    scaled = [PolymerField(grid32, basis32, 2.0 * p.coeffs, p.time)
              for p in traj]
    assert xs_norm(scaled, 0) == pytest.approx(4 * np.pi, rel=1e-12)
    assert xs_norm(traj[:5], 0) <= xs_norm(traj, 0) + 1e-15
    with pytest.raises(ValueError):
        xs_norm([], 0)


def test_xs_norm_monotone_in_horizon(grid16, basis16, params):
    rng = np.random.default_rng(1)
    n = grid16.n_points
    coeffs = np.zeros((basis16.n_basis, n, n), dtype=complex)
    for i in range(basis16.n_basis):
        coeffs[i] = np.fft.fft2(rng.standard_normal((n, n)) * 0.1) / n ** 2
    psi = PolymerField(grid16, basis16, coeffs)
    traj = constant_trajectory(psi, 20, 0.05)
    vals = [xs_norm(traj[:k], 1) for k in (5, 10, 21)]
    assert vals[0] <= vals[1] <= vals[2]


def test_fixed_point_equilibrium_invariant(grid32, basis32, params, cfgs):
    fluid_cfg, fp_cfg = cfgs
    st = equilibrium_state(grid32, basis32, params)
    traj = constant_trajectory(st.psi, 20, fluid_cfg.dt)
    out = fixed_point_map(traj, st, params, None, fluid_cfg, fp_cfg)
    assert xs_distance(out, traj, 1) < 1e-10


def test_contraction_factor_constructed_sequence(grid32, basis32):
    psi = PolymerField.equilibrium(grid32, basis32)
    n = grid32.n_points
    delta = np.zeros((basis32.n_basis, n, n), dtype=complex)
    delta[2, 0, 0] = 1.0
    iterates = []
    for k in range(5):
        coeffs = psi.coeffs + 2.0 ** (-k) * delta
        iterates.append(constant_trajectory(
            PolymerField(grid32, basis32, coeffs), 4, 0.01))
    ratios, converged = contraction_factor(iterates, 1)
    assert not converged
    np.testing.assert_allclose(ratios, 0.5, rtol=1e-8)
    same = [iterates[0], iterates[0], iterates[0]]
    ratios2, converged2 = contraction_factor(same, 1)
    assert converged2 and ratios2 == []


def test_contraction_on_perturbed_seed(grid32, basis32, params, cfgs):
    fluid_cfg, fp_cfg = cfgs
    st = perturbed_state(grid32, basis32, params)
    fpc = FixedPointConfig(horizon_T=0.05, s=2, s_prime=1, max_iters=5)
    iterates = run_fixed_point(st, params, None, fluid_cfg, fp_cfg, fpc)
    ratios, _ = contraction_factor(iterates, 1)
    assert len(ratios) >= 3
    assert all(r < 1.0 for r in ratios)


def test_contraction_factor_shrinks_with_horizon(grid16, basis16, params):
    fluid_cfg = FluidStepConfig(dt=1e-3)
    fp_cfg = FPStepConfig(dt=1e-3, chi_index=16, scheme="ssprk3_explicit")
    st = perturbed_state(grid16, basis16, params, amp=5e-3)
    firsts = []
    for horizon in (0.1, 0.05, 0.025):
        fpc = FixedPointConfig(horizon_T=horizon, s=2, s_prime=1,
                               max_iters=2)
        iterates = run_fixed_point(st, params, None, fluid_cfg, fp_cfg, fpc)
        ratios, _ = contraction_factor(iterates, 1)
        firsts.append(ratios[0])
    assert firsts[0] > firsts[1] > firsts[2]


def test_coupled_step_equilibrium(grid32, basis32, params, cfgs):
    fluid_cfg, fp_cfg = cfgs
    st = equilibrium_state(grid32, basis32, params)
    cur = st
    for _ in range(10):
        cur = coupled_step(cur, params, None, fluid_cfg, fp_cfg)
        assert np.max(np.abs(cur.fluid.r.coeffs - st.fluid.r.coeffs)) < 1e-12
        assert np.max(np.abs(cur.fluid.u.coeffs)) < 1e-12
        assert np.max(np.abs(cur.psi.coeffs - st.psi.coeffs)) < 1e-12


def test_coupled_step_conserves_everything(grid32, basis32, params, cfgs):
    fluid_cfg, fp_cfg = cfgs
    st = perturbed_state(grid32, basis32, params, amp=5e-3)
    area = grid32.cell_area()

    def invariants(s):
        rho = r_to_density(s.fluid.r.values()[0], params)
        uv = s.fluid.u.values()
        return np.array([np.sum(rho) * area, np.sum(rho * uv[0]) * area,
                         np.sum(rho * uv[1]) * area, polymer_mass(s.psi)])

    start = invariants(st)
    cur = st
    for _ in range(100):
        cur = coupled_step(cur, params, None, fluid_cfg, fp_cfg)
    drift = np.abs(invariants(cur) - start) / np.maximum(np.abs(start), 1.0)
    assert np.max(drift) < 1e-8


def test_coupled_step_agrees_with_picard_pass(grid32, basis32, params):
    # one application of the map to the monolithic trajectory reproduces it
    # to O(dt^2); halving dt shrinks the gap by at least ~3x
    st = perturbed_state(grid32, basis32, params, amp=1e-2)
    horizon = 0.02
    gaps = []
    for dt in (2e-3, 1e-3):
        fluid_cfg = FluidStepConfig(dt=dt)
        fp_cfg = FPStepConfig(dt=dt, chi_index=32, scheme="ssprk3_explicit")
        n_steps = int(round(horizon / dt))
        mono = [st]
        cur = st
        for _ in range(n_steps):
            cur = coupled_step(cur, params, None, fluid_cfg, fp_cfg)
            mono.append(cur)
        mono_psi = [s.psi for s in mono]
        once = fixed_point_map(mono_psi, st, params, None, fluid_cfg, fp_cfg)
        gaps.append(xs_distance(once, mono_psi, 1))
    assert gaps[1] < gaps[0] / 3.0


def test_blowup_indicator(grid32, basis32, params):
    st = equilibrium_state(grid32, basis32, params)
    assert blowup_indicator(st) == 0.0
    x1, _ = grid32.x
    u = forward(grid32, np.stack([np.sin(x1), np.zeros_like(x1)]))
    st_u = CoupledState(FluidState(st.fluid.r, u),
                        PolymerField.equilibrium(grid32, basis32))
    expect = sup_norm_w2inf(u)   # div T(M) = 0 for the constant stress
    assert blowup_indicator(st_u) == pytest.approx(expect, rel=1e-12)
    st_2u = CoupledState(FluidState(st.fluid.r, 2.0 * u),
                         PolymerField.equilibrium(grid32, basis32))
    assert blowup_indicator(st_2u) == pytest.approx(2 * expect, rel=1e-12)
