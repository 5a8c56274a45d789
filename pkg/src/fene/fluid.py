"""Symmetric hyperbolic-parabolic fluid system in (r, u) variables.

Advances

    dr/dt + phi_R [ u . grad r + (gamma-1)/2 r div u ] = 0,
    du/dt + phi_R [ u . grad u + r grad r ]
          = phi_R D(r) [ div S(grad u) + div T ] + f,

with dealiased pseudo-spectral products, Galerkin projection P_n, and an
optional velocity cut-off phi_R(|u|_{2,inf}) that switches the nonlinear
terms off for large velocities.  Time stepping is explicit SSP-RK3 under a
conservative CFL bound; positivity of r is monitored and its loss is an
error, never silently repaired.
"""

from dataclasses import dataclass

import numpy as np

from . import torus
from .errors import CFLViolation, PositivityLoss
from .model import ForcingSpec, ModelParams, r_to_density
from .torus import SpectralField, derivative, dealiased_product, project_pn, \
    sobolev_norm, sup_norm_w2inf


class FluidState:
    """Transformed density r (> 0 on the grid) and velocity u at one time."""

    __slots__ = ("r", "u", "time")

    def __init__(self, r: SpectralField, u: SpectralField, time=0.0,
                 check_positivity=True):
        if r.components != 1 or u.components != 2:
            raise ValueError("r must be scalar and u a 2-vector field")
        if check_positivity:
            rmin = float(r.values().min())
            if not rmin > 0.0:   # catches NaN as well
                raise PositivityLoss(f"min r = {rmin:.3e} on the grid")
        self.r = r
        self.u = u
        self.time = time

    def min_r(self):
        return float(self.r.values().min())


@dataclass(frozen=True)
class FluidStepConfig:
    """Time-step parameters for the fluid solver.

    cutoff_R=None disables the phi_R regularization entirely.  cfl_safety
    scales the CFL bound; None skips the check (the caller then owns
    stability).  include_advection / freeze_r exist for unit-test modes
    that isolate the viscous semigroup.
    """

    dt: float
    cutoff_R: float = None
    n_modes: int = None
    scheme: str = "ssprk3"
    cfl_safety: float = 0.8
    include_advection: bool = True
    freeze_r: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_modes is not None and self.n_modes < 1:
            raise ValueError("n_modes must be at least 1")
        if self.scheme != "ssprk3":
            raise ValueError(f"unknown fluid scheme {self.scheme!r}")


def phi_r(y, R):
    """Velocity cut-off: 1 on [0, R], 0 on [R+1, inf), C^1 cubic between."""
    if R <= 0:
        raise ValueError("cut-off threshold must be positive")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("cut-off argument must be nonnegative")
    s = np.clip(y - R, 0.0, 1.0)
    out = 1.0 - s * s * (3.0 - 2.0 * s)
    return out if np.ndim(out) else float(out)


def _cutoff_value(u, cfg):
    if cfg.cutoff_R is None:
        return 1.0
    return phi_r(sup_norm_w2inf(u), cfg.cutoff_R)


def _dot_grad(u: SpectralField, f: SpectralField) -> SpectralField:
    """Dealiased u . grad f, componentwise in f."""
    fx = derivative(f, (1, 0))
    fy = derivative(f, (0, 1))
    out = dealiased_product(u.component(0), fx) \
        + dealiased_product(u.component(1), fy)
    return out


def _div_velocity(u: SpectralField) -> SpectralField:
    g = u.grid
    c = 1j * g.k1 * u.coeffs[0] + 1j * g.k2 * u.coeffs[1]
    return SpectralField(g, c[None], enforce_symmetry=False)


def viscous_divergence(u: SpectralField, p: ModelParams) -> SpectralField:
    """div S(grad u) = mu_s Lap(u) + mu_b grad(div u) in two dimensions."""
    g = u.grid
    div_c = 1j * g.k1 * u.coeffs[0] + 1j * g.k2 * u.coeffs[1]
    lap = -g.ksq * u.coeffs
    grad_div = np.stack([1j * g.k1 * div_c, 1j * g.k2 * div_c])
    return SpectralField(g, p.mu_s * lap + p.mu_b * grad_div)


def stress_divergence(stress: SpectralField) -> SpectralField:
    """Divergence of a symmetric tensor field stored as (T11, T12, T22)."""
    if stress.components != 3:
        raise ValueError("stress field must carry (T11, T12, T22)")
    g = stress.grid
    t11, t12, t22 = stress.coeffs
    out = np.stack([1j * g.k1 * t11 + 1j * g.k2 * t12,
                    1j * g.k1 * t12 + 1j * g.k2 * t22])
    return SpectralField(g, out, enforce_symmetry=False)


def _d_field(state: FluidState, p: ModelParams) -> SpectralField:
    rvals = state.r.values()[0]
    if not rvals.min() > 0:
        raise PositivityLoss("D(r) undefined: r reached zero on the grid")
    dvals = 1.0 / r_to_density(rvals, p)
    return SpectralField.from_values(state.r.grid, dvals)


def continuity_rhs(state: FluidState, p: ModelParams,
                   cfg: FluidStepConfig) -> SpectralField:
    """-phi_R [ u . grad r + (gamma-1)/2 r div u ], projected by P_n."""
    cut = _cutoff_value(state.u, cfg)
    if cut == 0.0:
        return SpectralField.zero(state.r.grid, 1)
    out = _dot_grad(state.u, state.r) \
        + 0.5 * (p.gamma - 1.0) * dealiased_product(state.r,
                                                    _div_velocity(state.u))
    out = (-cut) * out
    n_modes = cfg.n_modes or state.r.grid.dealias_cutoff
    return project_pn(out, n_modes)


def momentum_rhs(state: FluidState, stress: SpectralField, forcing,
                 p: ModelParams, cfg: FluidStepConfig) -> SpectralField:
    """-phi_R [u . grad u + r grad r] + phi_R D(r)[div S + div T] + f."""
    grid = state.u.grid
    cut = _cutoff_value(state.u, cfg)
    rhs = SpectralField.zero(grid, 2)
    if cut != 0.0:
        visc = viscous_divergence(state.u, p)
        total = visc if stress is None else visc + stress_divergence(stress)
        rhs = rhs + cut * dealiased_product(_d_field(state, p), total)
        if cfg.include_advection:
            rhs = rhs - cut * _dot_grad(state.u, state.u)
        grad_r = torus.gradient(state.r)
        rhs = rhs - cut * dealiased_product(state.r, grad_r)
    if forcing is not None:
        rhs = rhs + forcing
    n_modes = cfg.n_modes or grid.dealias_cutoff
    return project_pn(rhs, n_modes)


def fluid_rhs(state, stress, forcing, p, cfg):
    dr = continuity_rhs(state, p, cfg)
    if cfg.freeze_r:
        dr = SpectralField.zero(state.r.grid, 1)
    du = momentum_rhs(state, stress, forcing, p, cfg)
    return dr, du


def cfl_bound(state: FluidState, p: ModelParams, cfg: FluidStepConfig):
    """Conservative explicit bound min(h/max|u|, h^2/(4 max D (mu_s+mu_b)))."""
    h = state.r.grid.spacing
    uvals = state.u.values()
    umax = float(np.sqrt(np.sum(uvals ** 2, axis=0)).max())
    dmax = float((1.0 / r_to_density(state.r.values()[0], p)).max())
    advective = h / umax if umax > 0 else np.inf
    viscous = h * h / (4.0 * dmax * (p.mu_s + p.mu_b))
    return min(advective, viscous)


def _resolve(value, t):
    return value(t) if callable(value) else value


def _forcing_field(forcing, grid, t):
    if forcing is None:
        return None
    if isinstance(forcing, ForcingSpec):
        if forcing.kind == "zero" or forcing.amplitude == 0.0:
            return None
        x1, x2 = grid.x
        return SpectralField.from_values(grid, forcing.values(x1, x2, t))
    return _resolve(forcing, t)


def step(state: FluidState, stress, forcing, p: ModelParams,
         cfg: FluidStepConfig) -> FluidState:
    """One SSP-RK3 step; stress/forcing may be fields or callables of time.

    Raises CFLViolation when dt exceeds the configured bound and
    PositivityLoss when the updated r is not positive on the grid.
    """
    if cfg.cfl_safety is not None:
        bound = cfg.cfl_safety * cfl_bound(state, p, cfg)
        if cfg.dt > bound:
            raise CFLViolation(
                f"dt = {cfg.dt:.3e} exceeds CFL bound {bound:.3e}")
    dt = cfg.dt
    grid = state.r.grid

    def rhs_at(r, u, t):
        st = FluidState(r, u, t, check_positivity=False)
        return fluid_rhs(st, _resolve(stress, t),
                         _forcing_field(forcing, grid, t), p, cfg)

    t0 = state.time
    r0, u0 = state.r, state.u
    dr1, du1 = rhs_at(r0, u0, t0)
    r1, u1 = r0 + dt * dr1, u0 + dt * du1
    dr2, du2 = rhs_at(r1, u1, t0 + dt)
    r2 = 0.75 * r0 + 0.25 * (r1 + dt * dr2)
    u2 = 0.75 * u0 + 0.25 * (u1 + dt * du2)
    dr3, du3 = rhs_at(r2, u2, t0 + 0.5 * dt)
    r3 = (1.0 / 3.0) * r0 + (2.0 / 3.0) * (r2 + dt * dr3)
    u3 = (1.0 / 3.0) * u0 + (2.0 / 3.0) * (u2 + dt * du3)
    return FluidState(r3, u3, t0 + dt)


def max_principle_envelope(r0, gradu_integral, p: ModelParams):
    """Bounds inf r0 e^{-cI} <= r <= sup r0 e^{cI} with c = max(1, (gamma-1)/2)
    and I the accumulated integral of the grid sup of |grad u|."""
    vals = r0.values()[0] if isinstance(r0, SpectralField) else np.asarray(r0)
    c = max(1.0, 0.5 * (p.gamma - 1.0))
    return (float(vals.min()) * np.exp(-c * gradu_integral),
            float(vals.max()) * np.exp(c * gradu_integral))


def fluid_energy(state: FluidState, s: int):
    """Squared W^{s,2} norm of the pair (r, u)."""
    return sobolev_norm(state.r, s) ** 2 + sobolev_norm(state.u, s) ** 2
