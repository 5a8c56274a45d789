"""Coupling of the fluid and Fokker-Planck solvers.

Two routes to the coupled dynamics are provided and played against each
other by the verification suite:

* fixed_point_map: the constructive route.  Given a candidate polymer
  trajectory, build its elastic stress, solve the fluid system with that
  stress over the horizon, then solve the Fokker-Planck equation with the
  resulting velocity.  Iterating this map from a seed trajectory converges
  on short horizons; the contraction is measured in the weaker X^{s'}
  norm with s' <= s - 1.

* coupled_step: the monolithic route.  One shared SSP-RK3 stage structure
  advances (r, u, psi) together, re-evaluating the stress at every stage.

The X^s trajectory norm is sup-in-time of the W^{s,2}_x L^2_M norm plus
the time integral (trapezoid rule on the stored samples) of the
W^{s,2}_x H^1_M norm, square-rooted.
"""

from dataclasses import dataclass

import numpy as np

from . import fluid as fluid_mod
from .errors import StabilityViolation
from .fluid import FluidState, FluidStepConfig, fluid_rhs
from .fokker_planck import FokkerPlanckSolver, FPStepConfig, PolymerField, \
    fp_step
from .model import ModelParams
from .torus import SpectralField, sup_norm_w2inf


class CoupledState:
    """The solution triple (r, u, psi) at one time instant."""

    __slots__ = ("fluid", "psi", "time")

    def __init__(self, fluid: FluidState, psi: PolymerField, time=None):
        if fluid.r.grid != psi.grid:
            raise ValueError("fluid and polymer fields use different grids")
        time = fluid.time if time is None else time
        if abs(fluid.time - psi.time) > 1e-12:
            raise ValueError("fluid and polymer time stamps disagree")
        self.fluid = fluid
        self.psi = psi
        self.time = time


@dataclass(frozen=True)
class FixedPointConfig:
    """Horizon and norms for the fixed-point iteration."""

    horizon_T: float
    s: int = 2
    s_prime: int = 1
    max_iters: int = 5
    stop_tol: float = 0.0

    def __post_init__(self):
        if self.horizon_T <= 0:
            raise ValueError("horizon_T must be positive")
        if self.s_prime > self.s - 1:
            raise ValueError("contraction index must satisfy s_prime <= s - 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


def _stress_vectors(basis):
    cache = getattr(basis, "_stress_vec_cache", None)
    if cache is None:
        from .configspace import basis_stress_vectors
        full = basis_stress_vectors(basis)
        cache = np.stack([full[:, 0, 0], full[:, 0, 1], full[:, 1, 1]])
        basis._stress_vec_cache = cache
    return cache


def stress_field(psi: PolymerField) -> SpectralField:
    """Kramers stress of psi as a symmetric tensor field (T11, T12, T22).

    The stress integral is linear in the basis coefficients, so it reduces
    to a contraction with the precomputed per-mode stress integrals and is
    exact in the torus modes."""
    sv = _stress_vectors(psi.basis)
    coeffs = np.tensordot(sv, psi.coeffs, axes=([1], [0]))
    return SpectralField(psi.grid, coeffs, enforce_symmetry=False)


def _times(traj):
    return np.array([s.time for s in traj])


def xs_norm(traj, s):
    """Trajectory norm of X^s from dense-in-time samples."""
    if not traj:
        raise ValueError("empty trajectory")
    from .fokker_planck import fp_energy
    l2 = np.empty(len(traj))
    h1 = np.empty(len(traj))
    for i, psi in enumerate(traj):
        l2[i], h1[i] = fp_energy(psi, s)
    if len(traj) == 1:
        return float(np.sqrt(l2[0]))
    return float(np.sqrt(l2.max() + np.trapezoid(h1, _times(traj))))


def xs_distance(traj_a, traj_b, s):
    if len(traj_a) != len(traj_b):
        raise ValueError("trajectories have different lengths")
    return xs_norm([a - b for a, b in zip(traj_a, traj_b)], s)


def constant_trajectory(psi0: PolymerField, n_steps, dt):
    """Constant-in-time extension of the initial datum (the canonical seed)."""
    out = []
    for k in range(n_steps + 1):
        p = psi0.copy()
        p.time = psi0.time + k * dt
        out.append(p)
    return out


def _linear_interpolant(samples, t0, dt):
    """Piecewise-linear interpolation of a list of fields over time."""

    def at(t):
        x = (t - t0) / dt
        i = int(np.floor(x))
        i = min(max(i, 0), len(samples) - 2)
        theta = min(max(x - i, 0.0), 1.0)
        if theta == 0.0:
            return samples[i]
        if theta == 1.0:
            return samples[i + 1]
        return (1.0 - theta) * samples[i] + theta * samples[i + 1]

    return at


def fixed_point_map(psi_traj, state0: CoupledState, p: ModelParams, forcing,
                    fluid_cfg: FluidStepConfig, fp_cfg: FPStepConfig):
    """One application of the stress -> fluid -> Fokker-Planck map.

    psi_traj must span the horizon with the uniform step fluid_cfg.dt.
    Returns the new polymer trajectory; solver errors propagate with the
    failing stage attached by the caller driving the iteration.
    """
    if abs(fluid_cfg.dt - fp_cfg.dt) > 1e-15:
        raise ValueError("fluid and FP steps must share dt")
    dt = fluid_cfg.dt
    n_steps = len(psi_traj) - 1
    t0 = state0.time

    stresses = [stress_field(ps) for ps in psi_traj]
    stress_at = _linear_interpolant(stresses, t0, dt)
    fl = state0.fluid
    velocities = [fl.u]
    for k in range(n_steps):
        fl = fluid_mod.step(fl, stress_at, forcing, p, fluid_cfg)
        velocities.append(fl.u)
    u_at = _linear_interpolant(velocities, t0, dt)

    psi = state0.psi
    out = [psi]
    for k in range(n_steps):
        psi = fp_step(psi, u_at, p, fp_cfg)
        out.append(psi)
    return out


def run_fixed_point(state0: CoupledState, p: ModelParams, forcing,
                    fluid_cfg: FluidStepConfig, fp_cfg: FPStepConfig,
                    cfg: FixedPointConfig):
    """Iterate the map from the constant-in-time seed; returns the iterates
    (seed first) so distances and ratios can be inspected."""
    n_steps = int(round(cfg.horizon_T / fluid_cfg.dt))
    iterates = [constant_trajectory(state0.psi, n_steps, fluid_cfg.dt)]
    for _ in range(cfg.max_iters):
        new = fixed_point_map(iterates[-1], state0, p, forcing, fluid_cfg,
                              fp_cfg)
        dist = xs_distance(new, iterates[-1], cfg.s_prime)
        iterates.append(new)
        if dist <= cfg.stop_tol:
            break
    return iterates


def contraction_factor(iterates, s_prime):
    """Ratios d_{k+1}/d_k of successive X^{s'} iterate distances.

    Returns (ratios, converged): a zero (or numerically degenerate)
    distance terminates the list and reports convergence instead of a
    division by zero."""
    if len(iterates) < 3:
        raise ValueError("need at least three iterates")
    dists = [xs_distance(iterates[k + 1], iterates[k], s_prime)
             for k in range(len(iterates) - 1)]
    floor = 1e-300
    ratios = []
    converged = False
    for k in range(len(dists) - 1):
        if dists[k] <= floor:
            converged = True
            break
        ratios.append(dists[k + 1] / dists[k])
    if dists and dists[-1] <= floor:
        converged = True
    return ratios, converged


def coupled_step(state: CoupledState, p: ModelParams, forcing,
                 fluid_cfg: FluidStepConfig,
                 fp_cfg: FPStepConfig) -> CoupledState:
    """Monolithic SSP-RK3 step of (r, u, psi) with per-stage stress."""
    if abs(fluid_cfg.dt - fp_cfg.dt) > 1e-15:
        raise ValueError("fluid and FP steps must share dt")
    dt = fluid_cfg.dt
    grid = state.fluid.r.grid
    solver = _coupled_fp_solver(state.psi, p, fp_cfg)
    diag = solver._diag(grid)
    zmax = dt * float(diag.max())
    if zmax > 2.5:
        raise StabilityViolation(
            f"dt * max diagonal rate = {zmax:.2f} outside the SSP-RK3 "
            "stability interval")
    if fluid_cfg.cfl_safety is not None:
        bound = fluid_cfg.cfl_safety * fluid_mod.cfl_bound(state.fluid, p,
                                                           fluid_cfg)
        if dt > bound:
            from .errors import CFLViolation
            raise CFLViolation(
                f"dt = {dt:.3e} exceeds CFL bound {bound:.3e}")

    basis = state.psi.basis
    sv = _stress_vectors(basis)

    def rhs(r, u, c, t):
        stress = SpectralField(
            grid, np.tensordot(sv, c, axes=([1], [0])),
            enforce_symmetry=False)
        st = FluidState(r, u, t, check_positivity=False)
        dr, du = fluid_rhs(st, stress,
                           fluid_mod._forcing_field(forcing, grid, t),
                           p, fluid_cfg)
        dc = solver.explicit_tendency(c, grid, u) - diag * c
        return dr, du, dc

    t0 = state.time
    r0, u0, c0 = state.fluid.r, state.fluid.u, state.psi.coeffs
    dr, du, dc = rhs(r0, u0, c0, t0)
    r1, u1, c1 = r0 + dt * dr, u0 + dt * du, c0 + dt * dc
    dr, du, dc = rhs(r1, u1, c1, t0 + dt)
    r2 = 0.75 * r0 + 0.25 * (r1 + dt * dr)
    u2 = 0.75 * u0 + 0.25 * (u1 + dt * du)
    c2 = 0.75 * c0 + 0.25 * (c1 + dt * dc)
    dr, du, dc = rhs(r2, u2, c2, t0 + 0.5 * dt)
    r3 = (r0 + 2.0 * (r2 + dt * dr)) * (1.0 / 3.0)
    u3 = (u0 + 2.0 * (u2 + dt * du)) * (1.0 / 3.0)
    c3 = (c0 + 2.0 * (c2 + dt * dc)) / 3.0
    new_fluid = FluidState(r3, u3, t0 + dt)
    new_psi = PolymerField(grid, basis, c3, t0 + dt, state.psi.mass_ref,
                           enforce_symmetry=False)
    return CoupledState(new_fluid, new_psi)


def _coupled_fp_solver(psi, p, fp_cfg):
    cache = getattr(psi.basis, "_fp_cache", None)
    if cache is None:
        cache = {}
        psi.basis._fp_cache = cache
    eps = p.epsilon if fp_cfg.epsilon is None else fp_cfg.epsilon
    key = (fp_cfg.chi_index, eps, p.a11, p.lam, "coupled")
    if key not in cache:
        cache[key] = FokkerPlanckSolver(psi.basis, p, fp_cfg)
    return cache[key]


def blowup_indicator(state: CoupledState):
    """Grid-sampled |u|_{W^{2,inf}} + sup_x |div_x T(psi)|."""
    from .fluid import stress_divergence
    w2 = sup_norm_w2inf(state.fluid.u)
    div_t = stress_divergence(stress_field(state.psi)).values()
    return float(w2 + np.sqrt(np.sum(div_t ** 2, axis=0)).max())
