"""Weak-in-q Fokker-Planck solver on the relaxation eigenbasis.

The ratio phi = psi / M is expanded over the M-orthonormal eigenbasis of
the configuration operator with x-dependent coefficients kept as Fourier
fields on the torus.  Testing the equation against basis functions gives,
per coefficient field c_i(x, t),

    dc_i/dt = - div_x( u  sum_j C_ij c_j )            (transport)
              + eps Lap_x c_i                          (diffusion)
              + sum_{a,b} du_a/dx_b sum_j G[a,b]_ij c_j  (drift)
              - (A11 / 4 lambda) lambda_i c_i          (relaxation),

where C and G carry the boundary-layer cutoff chi_n inside their
integrands (both reduce to the plain Gram data when the cutoff is
disabled).  Relaxation and diffusion are diagonal, so the default IMEX
Euler step treats them implicitly at no cost; a fully explicit SSP-RK3
variant exists for high-order coupled runs.  Positivity of psi is only
monitored - the Galerkin truncation does not preserve it and clipping
would corrupt the energy monitors.
"""

from dataclasses import dataclass

import numpy as np

from .configspace import ConfigBasis, basis_stress_vectors, chi_mass_matrix, \
    drift_matrices
from .errors import StabilityViolation
from .model import ModelParams
from .torus import SIDE, SpectralField, TorusGrid, _hermitianize


class PolymerField:
    """psi(x, q) as (basis index, torus mode) coefficients of phi = psi/M."""

    __slots__ = ("grid", "basis", "coeffs", "time", "mass_ref")

    def __init__(self, grid: TorusGrid, basis: ConfigBasis, coeffs, time=0.0,
                 mass_ref=None, enforce_symmetry=True):
        coeffs = np.asarray(coeffs, dtype=complex)
        n = grid.n_points
        if coeffs.shape != (basis.n_basis, n, n):
            raise ValueError("coefficient tensor must be (n_basis, n, n)")
        if enforce_symmetry:
            coeffs = _hermitianize(coeffs)
        self.grid = grid
        self.basis = basis
        self.coeffs = coeffs
        self.time = time
        self.mass_ref = polymer_mass_of(coeffs, basis) if mass_ref is None \
            else mass_ref

    @classmethod
    def equilibrium(cls, grid: TorusGrid, basis: ConfigBasis, time=0.0):
        """psi = M uniformly in x."""
        n = grid.n_points
        coeffs = np.zeros((basis.n_basis, n, n), dtype=complex)
        coeffs[0, 0, 0] = 1.0
        return cls(grid, basis, coeffs, time, enforce_symmetry=False)

    @classmethod
    def from_coefficient_fields(cls, grid: TorusGrid, basis: ConfigBasis,
                                fields, time=0.0):
        """Build from {basis index: real grid values of c_i(x)}."""
        n = grid.n_points
        coeffs = np.zeros((basis.n_basis, n, n), dtype=complex)
        for i, vals in fields.items():
            coeffs[i] = np.fft.fft2(np.asarray(vals, dtype=float)) / n ** 2
        return cls(grid, basis, coeffs, time)

    def coefficient_values(self):
        """Real grid values of all coefficient fields, shape (n_basis, n, n)."""
        return np.real(np.fft.ifft2(self.coeffs) * self.grid.n_points ** 2)

    def copy(self):
        return PolymerField(self.grid, self.basis, self.coeffs.copy(),
                            self.time, self.mass_ref, enforce_symmetry=False)

    def __sub__(self, other):
        if self.basis is not other.basis:
            raise ValueError("polymer fields use different bases")
        return PolymerField(self.grid, self.basis, self.coeffs - other.coeffs,
                            self.time, 0.0, enforce_symmetry=False)


def polymer_mass_of(coeffs, basis: ConfigBasis):
    """int int psi dq dx from coefficients: only the q-constant mode carries
    mass, and the torus mean sits in the k = 0 coefficient."""
    w = basis.quad.weights * basis.quad.maxwellian
    mass_vec = np.einsum("kl,ikl->i", w, basis.values)
    return float(SIDE ** 2 * np.real(coeffs[:, 0, 0] @ mass_vec))


def polymer_mass(psi: PolymerField):
    return polymer_mass_of(psi.coeffs, psi.basis)


@dataclass(frozen=True)
class FPStepConfig:
    """Fokker-Planck stepping parameters.

    epsilon=None defers to ModelParams.epsilon.  chi_index=None disables the
    boundary-layer cutoff (chi = 1); an integer ties the cutoff plateau to
    sqrt(b) - 2/chi_index as in the regularized scheme.
    """

    dt: float
    epsilon: float = None
    chi_index: int = None
    scheme: str = "imex_euler"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.scheme not in ("imex_euler", "ssprk3_explicit"):
            raise ValueError(f"unknown FP scheme {self.scheme!r}")


class FokkerPlanckSolver:
    """Precomputed operator data for one (basis, cutoff, model) combination."""

    def __init__(self, basis: ConfigBasis, p: ModelParams,
                 cfg: FPStepConfig):
        self.basis = basis
        self.params = p
        self.cfg = cfg
        self.epsilon = p.epsilon if cfg.epsilon is None else cfg.epsilon
        self.chi_mass = chi_mass_matrix(basis, cfg.chi_index)
        self.drift = drift_matrices(basis, cfg.chi_index)
        self.relax = p.relaxation_rate * basis.eigenvalues
        self.stress_vectors = basis_stress_vectors(basis)
        w = basis.quad.weights * basis.quad.maxwellian
        self.mass_vec = np.einsum("kl,ikl->i", w, basis.values)

    def _diag(self, grid: TorusGrid):
        return self.relax[:, None, None] + self.epsilon * grid.ksq[None]

    def explicit_tendency(self, coeffs, grid: TorusGrid, u: SpectralField):
        """Transport plus drift in coefficient space (dealiased)."""
        n = grid.n_points
        nb = self.basis.n_basis
        mask = grid.dealias_mask
        # contiguous copy: the real part of the inverse transform is a
        # strided view that would knock the matmuls off the BLAS path
        cg = np.ascontiguousarray(
            np.real(np.fft.ifft2(coeffs) * n ** 2)).reshape(nb, -1)
        uv = u.values()
        w = (self.chi_mass @ cg).reshape(nb, n, n)

        gu = np.empty((2, 2, n, n))
        for a in range(2):
            ca = u.coeffs[a]
            gu[a, 0] = np.real(np.fft.ifft2(1j * grid.k1 * ca) * n ** 2)
            gu[a, 1] = np.real(np.fft.ifft2(1j * grid.k2 * ca) * n ** 2)
        dc = (self.drift.reshape(4 * nb, nb) @ cg).reshape(2, 2, nb, n, n)
        drift_grid = np.einsum("abxy,abixy->ixy", gu, dc)

        stacked = np.concatenate([uv[0] * w, uv[1] * w, drift_grid])
        hat = np.fft.fft2(stacked) / n ** 2
        w1_hat, w2_hat, drift_hat = hat[:nb], hat[nb:2 * nb], hat[2 * nb:]
        tend = drift_hat - 1j * grid.k1 * w1_hat - 1j * grid.k2 * w2_hat
        return _hermitianize(tend * mask)

    def rhs(self, psi: PolymerField, u: SpectralField):
        tend = self.explicit_tendency(psi.coeffs, psi.grid, u)
        tend -= self._diag(psi.grid) * psi.coeffs
        return PolymerField(psi.grid, psi.basis, tend, psi.time, 0.0,
                            enforce_symmetry=False)

    def step(self, psi: PolymerField, u, dt=None) -> PolymerField:
        dt = self.cfg.dt if dt is None else dt
        grid = psi.grid
        diag = self._diag(grid)
        if self.cfg.scheme == "imex_euler":
            u0 = u(psi.time) if callable(u) else u
            expl = self.explicit_tendency(psi.coeffs, grid, u0)
            new = (psi.coeffs + dt * expl) / (1.0 + dt * diag)
        else:
            zmax = dt * float(diag.max())
            if zmax > 2.5:
                raise StabilityViolation(
                    f"dt * max relaxation/diffusion rate = {zmax:.2f} "
                    "outside the SSP-RK3 stability interval")

            def full(c, t):
                uu = u(t) if callable(u) else u
                return self.explicit_tendency(c, grid, uu) - diag * c

            t0 = psi.time
            c0 = psi.coeffs
            c1 = c0 + dt * full(c0, t0)
            c2 = 0.75 * c0 + 0.25 * (c1 + dt * full(c1, t0 + dt))
            new = (c0 + 2.0 * (c2 + dt * full(c2, t0 + 0.5 * dt))) / 3.0
        return PolymerField(grid, psi.basis, new, psi.time + dt,
                            psi.mass_ref, enforce_symmetry=False)


def _solver_for(psi: PolymerField, p: ModelParams, cfg: FPStepConfig):
    cache = getattr(psi.basis, "_fp_cache", None)
    if cache is None:
        cache = {}
        psi.basis._fp_cache = cache
    eps = p.epsilon if cfg.epsilon is None else cfg.epsilon
    key = (cfg.chi_index, eps, p.a11, p.lam, cfg.scheme, cfg.dt)
    if key not in cache:
        cache[key] = FokkerPlanckSolver(psi.basis, p, cfg)
    return cache[key]


def fp_rhs(psi: PolymerField, u: SpectralField, p: ModelParams,
           cfg: FPStepConfig) -> PolymerField:
    """Weak-form tendency of psi for the given velocity field."""
    return _solver_for(psi, p, cfg).rhs(psi, u)


def fp_step(psi: PolymerField, u, p: ModelParams,
            cfg: FPStepConfig) -> PolymerField:
    """Advance one step of the configured scheme; u may be a field or a
    callable of time (used for the RK stage values)."""
    return _solver_for(psi, p, cfg).step(psi, u)


def fp_energy(psi: PolymerField, s: int):
    """Squared mixed norms (|psi|^2_{W^{s,2}_x L^2_M}, |psi|^2_{W^{s,2}_x H^1_M}).

    Both are diagonal in the (mode, eigenfunction) representation: the
    L^2_M part weights coefficients by (1+|k|^2)^s, the H^1_M part
    additionally by the eigenvalue lambda_i.
    """
    weight = (1.0 + psi.grid.ksq) ** s
    sq = np.abs(psi.coeffs) ** 2
    l2m = SIDE ** 2 * float(np.sum(weight[None] * sq))
    h1m = SIDE ** 2 * float(np.sum(
        psi.basis.eigenvalues[:, None, None] * weight[None] * sq))
    return l2m, h1m


def nonnegativity_report(psi: PolymerField):
    """(min sampled psi, fraction of negative samples) over grid x nodes.

    Sampling happens on the configuration quadrature nodes; the scheme never
    enforces positivity, this is a monitor only.
    """
    basis = psi.basis
    cg = psi.coefficient_values().reshape(basis.n_basis, -1)
    phi_flat = basis.values.reshape(basis.n_basis, -1)
    samples = cg.T @ phi_flat
    samples *= basis.quad.maxwellian.reshape(1, -1)
    return float(samples.min()), float(np.mean(samples < 0.0))
