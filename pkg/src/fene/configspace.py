"""Quadrature, weighted norms and the relaxation eigenbasis on B(0, sqrt(b)).

The configuration ball is discretized by a tensor rule: a uniform trapezoid
rule in the angle (spectrally accurate for periodic integrands) and a Gauss
rule in the substituted radial variable t = |q|^2 / b on (0, 1).  The node
weights carry the plain area element, and the Maxwellian is evaluated
analytically at the nodes.  With this substitution every integrand the
solver needs - Maxwellian-weighted inner products, H^1_M forms, and the
elastic stress whose integrand carries one inverse power of (b - |q|^2) -
is a smooth (at integer b/2, polynomial) function of t, so the rule is
exact at the shipped parameters.  b > 2 is exactly what keeps the stress
integrand bounded at the nodes.

The relaxation operator acts on ratios phi = psi / M through the weak forms

    a(phi, chi) = int_B M grad_q(phi) . grad_q(chi) dq,
    m(phi, chi) = int_B M phi chi dq.

Both decouple over angular Fourier modes.  Per mode m the radial trial
space is spanned by rho^m P_j^{(b/2, m)}(2t - 1) with rho = |q|/sqrt(b),
i.e. Jacobi polynomials orthogonal under exactly the radial weight of
m(.,.), which keeps the mass matrix near diagonal and reproduces the
correct rho^m behaviour at the origin.  Constants are annihilated by
a(.,.) identically, which pins the lowest eigenvalue to zero and encodes
the zero-flux boundary condition naturally (M vanishes on the boundary,
so no essential condition is imposed).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh
from scipy.special import eval_jacobi, roots_legendre

from .errors import EigenSolverError
from .model import maxwellian_normalizer


class ConfigQuadrature:
    """Tensor quadrature on the ball, with plain-measure node weights."""

    def __init__(self, b, n_radial, n_angular):
        if b <= 2:
            raise ValueError("extensibility parameter must satisfy b > 2")
        if n_radial < 4:
            raise ValueError("n_radial must be at least 4")
        if n_angular < 8 or n_angular % 2 != 0:
            raise ValueError("n_angular must be an even integer >= 8")
        self.b = float(b)
        self.n_radial = int(n_radial)
        self.n_angular = int(n_angular)

        xg, wg = roots_legendre(self.n_radial)
        self.t = 0.5 * (xg + 1.0)               # t = |q|^2 / b in (0, 1)
        w_t = 0.5 * wg
        self.rho = np.sqrt(self.t)              # |q| / sqrt(b)
        self.radii = np.sqrt(self.b) * self.rho
        self.angles = 2.0 * np.pi * np.arange(self.n_angular) / self.n_angular
        # int_B g dq = (b/2) int_0^1 int_0^2pi g dtheta dt
        self.weights = ((self.b / 2.0) * w_t)[:, None] * np.full(
            self.n_angular, 2.0 * np.pi / self.n_angular)[None, :]

        self.one_minus_t = 1.0 - self.t
        self.maxwellian_radial = (
            self.one_minus_t ** (self.b / 2.0) / maxwellian_normalizer(self.b))
        self.maxwellian = self.maxwellian_radial[:, None] * np.ones(
            (1, self.n_angular))
        cos_t, sin_t = np.cos(self.angles), np.sin(self.angles)
        self.q1 = self.radii[:, None] * cos_t[None, :]
        self.q2 = self.radii[:, None] * sin_t[None, :]

    def integrate(self, values):
        """Plain integral over B of node values of shape (n_radial, n_angular)."""
        return float(np.sum(self.weights * values))

    def integrate_weighted(self, values):
        """Maxwellian-weighted integral int_B M values dq."""
        return float(np.sum(self.weights * self.maxwellian * values))


def build_quadrature(b, n_radial, n_angular) -> ConfigQuadrature:
    return ConfigQuadrature(b, n_radial, n_angular)


@dataclass
class ConfDistribution:
    """Coefficients of phi = psi/M in a ConfigBasis at one spatial point."""

    basis: "ConfigBasis"
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.basis.n_basis,):
            raise ValueError("coefficient count must equal n_basis")

    def node_values(self):
        return np.tensordot(self.coeffs, self.basis.values, axes=1)

    def node_grads(self):
        return np.tensordot(self.coeffs, self.basis.grads, axes=1)


def _as_node_values(phi, quad=None):
    if isinstance(phi, ConfDistribution):
        return phi.node_values(), phi
    return np.asarray(phi, dtype=float), None


def l2m_norm(phi, quad: ConfigQuadrature):
    """Maxwellian-weighted L^2 norm of the ratio phi = psi/M."""
    values, _ = _as_node_values(phi)
    return float(np.sqrt(quad.integrate_weighted(values ** 2)))


def h1m_seminorm(phi, quad: ConfigQuadrature, grads=None):
    """Maxwellian-weighted H^1 seminorm; grads shape (2, n_radial, n_angular).

    A ConfDistribution carries its own gradients through the basis; raw node
    values need them supplied explicitly.
    """
    if isinstance(phi, ConfDistribution):
        grads = phi.node_grads()
    elif grads is None:
        raise ValueError("h1m_seminorm needs gradient node values")
    dens = np.sum(np.asarray(grads) ** 2, axis=0)
    return float(np.sqrt(quad.integrate_weighted(dens)))


class OperatorBlocks:
    """Weak forms of the relaxation operator, one block per angular mode.

    stiffness[m], mass[m] are symmetric matrices of the forms a and m on
    the Jacobi trial space of angular mode m described in the module
    docstring.  Evaluation data for reconstructing node values of modal
    expansions is kept alongside.
    """

    def __init__(self, quad: ConfigQuadrature, n_modal, m_max):
        self.quad = quad
        self.n_modal = n_modal
        self.m_max = m_max
        self.stiffness = []
        self.mass = []
        b = quad.b
        alpha = b / 2.0
        for m in range(m_max + 1):
            n_asm = 2 * n_modal + m + 8
            xa, wa = roots_legendre(n_asm)
            ta = 0.5 * (xa + 1.0)
            wta = 0.5 * wa
            rhoa = np.sqrt(ta)
            m_weight = (1.0 - ta) ** alpha / maxwellian_normalizer(b)
            meas = (b / 2.0) * wta * m_weight
            P = np.stack([eval_jacobi(j, alpha, m, 2.0 * ta - 1.0)
                          for j in range(n_modal)])
            dP = np.zeros_like(P)
            for j in range(1, n_modal):
                dP[j] = (j + alpha + m + 1.0) * eval_jacobi(
                    j - 1, alpha + 1.0, m + 1.0, 2.0 * ta - 1.0)
            F = rhoa ** m * P
            dF = (m * np.where(m > 0, rhoa ** max(m - 1, 0), 0.0) * P
                  + 2.0 * rhoa ** (m + 1) * dP) / np.sqrt(b)
            B = np.einsum("k,ik,jk->ij", meas, F, F)
            A = np.einsum("k,ik,jk->ij", meas, dF, dF)
            if m > 0:
                A += m * m * np.einsum("k,ik,jk->ij", meas / (b * ta), F, F)
            self.stiffness.append(0.5 * (A + A.T))
            self.mass.append(0.5 * (B + B.T))

    def radial_profiles(self, m, coeffs):
        """Node values (f, df/dr) on the stored radial nodes for mode m."""
        quad = self.quad
        alpha = quad.b / 2.0
        t, rho = quad.t, quad.rho
        P = np.stack([eval_jacobi(j, alpha, m, 2.0 * t - 1.0)
                      for j in range(self.n_modal)])
        dP = np.zeros_like(P)
        for j in range(1, self.n_modal):
            dP[j] = (j + alpha + m + 1.0) * eval_jacobi(
                j - 1, alpha + 1.0, m + 1.0, 2.0 * t - 1.0)
        base = coeffs @ P
        dbase = coeffs @ dP
        f = rho ** m * base
        if m > 0:
            df = (m * rho ** (m - 1) * base
                  + 2.0 * rho ** (m + 1) * dbase) / np.sqrt(quad.b)
        else:
            df = 2.0 * rho * dbase / np.sqrt(quad.b)
        return f, df


def assemble_operator(quad: ConfigQuadrature, n_modal=None, m_max=None):
    if n_modal is None:
        n_modal = quad.n_radial
    if m_max is None:
        m_max = quad.n_angular // 2 - 1
    return OperatorBlocks(quad, n_modal, m_max)


class ConfigBasis:
    """First n_basis eigenpairs of the relaxation operator, M-orthonormal.

    values[i] holds phi_i at the quadrature nodes, grads[i] its Cartesian
    q-gradient there; labels[i] = (m, kind, k) records the angular mode,
    cos/sin branch and radial index.  residuals[i] is the relative
    generalized eigenresidual of the underlying radial solve.
    """

    def __init__(self, quad, n_basis, eigenvalues, values, grads, labels,
                 residuals):
        self.quad = quad
        self.n_basis = n_basis
        self.eigenvalues = eigenvalues
        self.values = values
        self.grads = grads
        self.labels = labels
        self.residuals = residuals

    def gram_matrix(self):
        w = self.quad.weights * self.quad.maxwellian
        return np.einsum("kl,ikl,jkl->ij", w, self.values, self.values)

    def gram_error(self):
        g = self.gram_matrix()
        return float(np.max(np.abs(g - np.eye(self.n_basis))))


def eigen_basis(quad: ConfigQuadrature, n_basis, m_max=None) -> ConfigBasis:
    """Solve the decoupled radial eigenproblems and collect the n_basis
    lowest modes (cos/sin branches of m >= 1 counted separately)."""
    blocks = assemble_operator(quad, m_max=m_max)
    n_modal = blocks.n_modal
    capacity = n_modal * (2 * blocks.m_max + 1)
    if n_basis > capacity:
        raise ValueError(
            f"n_basis={n_basis} exceeds assembled dimension {capacity}")

    entries = []
    for m in range(blocks.m_max + 1):
        A, B = blocks.stiffness[m], blocks.mass[m]
        try:
            lam, vec = eigh(A, B)
        except LinAlgError as exc:
            raise EigenSolverError(
                f"generalized eigensolver failed for angular mode {m}",
                residuals=None) from exc
        scale = np.linalg.norm(A, "fro") + np.linalg.norm(B, "fro")
        for k in range(n_modal):
            v = vec[:, k]
            j = int(np.argmax(np.abs(v)))
            if v[j] < 0:
                v = -v
            res = np.linalg.norm(A @ v - lam[k] * (B @ v)) / scale
            kinds = ("cos",) if m == 0 else ("cos", "sin")
            for kind in kinds:
                entries.append((lam[k], m, kind, k, v, res))
    entries.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
    entries = entries[:n_basis]

    nr, na = quad.n_radial, quad.n_angular
    theta = quad.angles
    values = np.zeros((n_basis, nr, na))
    grads = np.zeros((n_basis, 2, nr, na))
    eigenvalues = np.zeros(n_basis)
    residuals = np.zeros(n_basis)
    labels = []
    e_r = np.stack([np.cos(theta), np.sin(theta)])       # (2, na)
    e_t = np.stack([-np.sin(theta), np.cos(theta)])
    for i, (lam_i, m, kind, k, v, res) in enumerate(entries):
        f, df = blocks.radial_profiles(m, v)
        if m == 0:
            ang = np.full(na, 1.0 / np.sqrt(2.0 * np.pi))
            dang = np.zeros(na)
        elif kind == "cos":
            ang = np.cos(m * theta) / np.sqrt(np.pi)
            dang = -m * np.sin(m * theta) / np.sqrt(np.pi)
        else:
            ang = np.sin(m * theta) / np.sqrt(np.pi)
            dang = m * np.cos(m * theta) / np.sqrt(np.pi)
        values[i] = f[:, None] * ang[None, :]
        f_over_r = f / quad.radii
        grads[i] = (df[:, None] * ang[None, :]) * e_r[:, None, :] \
            + (f_over_r[:, None] * dang[None, :]) * e_t[:, None, :]
        eigenvalues[i] = lam_i
        residuals[i] = res
        labels.append((m, kind, k))
    return ConfigBasis(quad, n_basis, eigenvalues, values, grads, labels,
                       residuals)


def project_pi_qn(phi_values, basis: ConfigBasis) -> ConfDistribution:
    """M-weighted orthogonal projection of node values onto the basis span."""
    values = np.asarray(phi_values, dtype=float)
    w = basis.quad.weights * basis.quad.maxwellian
    coeffs = np.einsum("kl,ikl->i", w * values, basis.values)
    return ConfDistribution(basis, coeffs)


def _chi_of_radius(radius, n, b):
    if n <= 2.0 / np.sqrt(b):
        raise ValueError("cut-off index too small for this b")
    inner = np.sqrt(b) - 2.0 / n
    s = np.clip((np.asarray(radius, dtype=float) - inner) * n, 0.0, 1.0)
    out = 1.0 - s * s * (3.0 - 2.0 * s)
    return out if np.ndim(out) else float(out)


def chi_cutoff(q, n, b):
    """Boundary-layer cutoff at a point q: 1 inside |q| <= sqrt(b) - 2/n,
    0 outside |q| >= sqrt(b) - 1/n, C^1 cubic blend in between."""
    q = np.asarray(q, dtype=float)
    return _chi_of_radius(np.sqrt(np.sum(q * q, axis=0)), n, b)


def chi_radial_values(quad: ConfigQuadrature, n):
    """Cutoff values on the radial quadrature nodes."""
    return _chi_of_radius(quad.radii, n, quad.b)


def kramers_stress(phi, quad: ConfigQuadrature):
    """Elastic stress int_B psi F(q) x q dq of psi = M phi.

    The integrand M q_a q_b / (1 - t) is formed from the radial factor
    M / (1 - t), bounded for b > 2, so near-boundary nodes stay tame.
    The result is symmetric because F is parallel to q.
    """
    values, _ = _as_node_values(phi)
    core = quad.weights * values \
        * (quad.maxwellian_radial / quad.one_minus_t)[:, None]
    t11 = float(np.sum(core * quad.q1 * quad.q1))
    t12 = float(np.sum(core * quad.q1 * quad.q2))
    t22 = float(np.sum(core * quad.q2 * quad.q2))
    return np.array([[t11, t12], [t12, t22]])


def basis_stress_vectors(basis: ConfigBasis):
    """Per-mode stress integrals S[i] = T(M phi_i), stacked (n_basis, 2, 2)."""
    quad = basis.quad
    core = quad.weights * (quad.maxwellian_radial / quad.one_minus_t)[:, None]
    out = np.zeros((basis.n_basis, 2, 2))
    out[:, 0, 0] = np.einsum("kl,ikl->i", core * quad.q1 * quad.q1, basis.values)
    out[:, 0, 1] = np.einsum("kl,ikl->i", core * quad.q1 * quad.q2, basis.values)
    out[:, 1, 0] = out[:, 0, 1]
    out[:, 1, 1] = np.einsum("kl,ikl->i", core * quad.q2 * quad.q2, basis.values)
    return out


def chi_mass_matrix(basis: ConfigBasis, chi_index=None):
    """C_ij = int_B M chi phi_i phi_j dq (identity when the cutoff is off)."""
    if chi_index is None:
        return np.eye(basis.n_basis)
    quad = basis.quad
    chi = chi_radial_values(quad, chi_index)
    w = quad.weights * quad.maxwellian * chi[:, None]
    return np.einsum("kl,ikl,jkl->ij", w, basis.values, basis.values)


def drift_matrices(basis: ConfigBasis, chi_index=None):
    """G[a, b, i, j] = int_B M chi q_b d_{q_a}(phi_i) phi_j dq.

    Contracted with du_a/dx_b these assemble the configuration drift of the
    Fokker-Planck weak form; built once per (basis, cutoff) pair.
    """
    quad = basis.quad
    chi = chi_radial_values(quad, chi_index) if chi_index is not None \
        else np.ones(quad.n_radial)
    w = quad.weights * quad.maxwellian * chi[:, None]
    qvec = np.stack([quad.q1, quad.q2])
    out = np.einsum("bkl,iakl,jkl->abij", w[None] * qvec, basis.grads,
                    basis.values)
    return out


def lemma_a1_check(phi, delta, quad: ConfigQuadrature, grads=None):
    """Quadrature values behind the weighted interpolation inequality.

    Returns (lhs, delta_h1_sq, l2_sq) with
      lhs         = (int_B |psi| / (1 - |q|/sqrt(b)) dq)^2,  psi = M phi,
      delta_h1_sq = delta * h1m_seminorm(phi)^2,
      l2_sq       = l2m_norm(phi)^2.
    The denominator is normalized by the ball radius; empirical constants
    c_delta are ensemble maxima of (lhs - delta_h1_sq) / l2_sq.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    values, dist = _as_node_values(phi)
    if dist is not None:
        grads = dist.node_grads()
    if grads is None:
        raise ValueError("lemma_a1_check needs gradient node values")
    layer = quad.maxwellian_radial / (1.0 - quad.rho)
    lhs = float(np.sum(quad.weights * np.abs(values) * layer[:, None])) ** 2
    h1sq = h1m_seminorm(values, quad, grads=grads) ** 2
    l2sq = l2m_norm(values, quad) ** 2
    return lhs, delta * h1sq, l2sq
