"""Fourier representation of real fields on the flat 2-torus [0, 2pi)^2.

Fields are stored as full complex Fourier coefficient arrays in numpy FFT
layout, normalized so that f(x) = sum_k c_k exp(i k.x) with integer wave
vectors.  Hermitian symmetry c(-k) = conj(c(k)) is enforced on construction
and after every operation that could break it, so grid values are real by
construction.  Quadratic nonlinearities go through the 2/3-rule dealiased
product; the Galerkin projection P_n zeroes all modes above a square cutoff.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SIDE = 2.0 * np.pi
S_MAX = 8  # largest Sobolev index used by norm-based monitors


@dataclass(frozen=True)
class TorusGrid:
    """Uniform n x n grid on the torus of side 2pi."""

    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < 8 or n % 2 != 0:
            raise ValueError("n_points must be an even integer >= 8")

    @cached_property
    def wavenumbers(self):
        """Integer wave numbers along one axis in FFT order."""
        return np.fft.fftfreq(self.n_points, 1.0 / self.n_points).astype(int)

    @cached_property
    def k1(self):
        return self.wavenumbers[:, None] * np.ones(self.n_points, dtype=int)

    @cached_property
    def k2(self):
        return np.ones(self.n_points, dtype=int)[:, None] * self.wavenumbers

    @cached_property
    def ksq(self):
        return (self.k1 ** 2 + self.k2 ** 2).astype(float)

    @cached_property
    def x(self):
        """Grid coordinates (x1, x2), each of shape (n, n)."""
        pts = SIDE * np.arange(self.n_points) / self.n_points
        return np.meshgrid(pts, pts, indexing="ij")

    @property
    def spacing(self):
        return SIDE / self.n_points

    @property
    def dealias_cutoff(self):
        """Largest retained mode under the 2/3 rule."""
        return self.n_points // 3

    @cached_property
    def dealias_mask(self):
        kmax = np.maximum(np.abs(self.k1), np.abs(self.k2))
        return kmax <= self.dealias_cutoff

    def cell_area(self):
        return self.spacing ** 2


def _reflect(coeffs):
    """Coefficient array at -k, i.e. index map j -> (-j) mod n on both axes."""
    return np.roll(coeffs[..., ::-1, ::-1], 1, axis=(-2, -1))


def _hermitianize(coeffs):
    return 0.5 * (coeffs + np.conj(_reflect(coeffs)))


class SpectralField:
    """Real scalar (1 component) or vector/tensor field in Fourier space."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: TorusGrid, coeffs, enforce_symmetry=True):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim == 2:
            coeffs = coeffs[None]
        if coeffs.shape[-2:] != (grid.n_points, grid.n_points):
            raise ValueError("coefficient array does not match grid size")
        if enforce_symmetry:
            coeffs = _hermitianize(coeffs)
        self.grid = grid
        self.coeffs = coeffs

    @property
    def components(self):
        return self.coeffs.shape[0]

    @classmethod
    def from_values(cls, grid: TorusGrid, values):
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[None]
        if values.shape[-2:] != (grid.n_points, grid.n_points):
            raise ValueError("value array does not match grid size")
        coeffs = np.fft.fft2(values) / grid.n_points ** 2
        return cls(grid, coeffs)

    @classmethod
    def zero(cls, grid: TorusGrid, components=1):
        n = grid.n_points
        return cls(grid, np.zeros((components, n, n), dtype=complex),
                   enforce_symmetry=False)

    def values(self):
        """Real grid values, shape (components, n, n)."""
        return np.real(np.fft.ifft2(self.coeffs) * self.grid.n_points ** 2)

    def copy(self):
        return SpectralField(self.grid, self.coeffs.copy(),
                             enforce_symmetry=False)

    def component(self, i):
        return SpectralField(self.grid, self.coeffs[i][None],
                             enforce_symmetry=False)

    def _check_mate(self, other):
        if self.grid is not other.grid and self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check_mate(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs,
                             enforce_symmetry=False)

    def __sub__(self, other):
        self._check_mate(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs,
                             enforce_symmetry=False)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * float(scalar),
                             enforce_symmetry=False)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs, enforce_symmetry=False)


def forward(grid: TorusGrid, values) -> SpectralField:
    return SpectralField.from_values(grid, values)


def backward(field: SpectralField):
    return field.values()


def derivative(field: SpectralField, alpha) -> SpectralField:
    """Spectral partial derivative d^alpha for a 2-entry multi-index."""
    a1, a2 = alpha
    if a1 < 0 or a2 < 0 or a1 + a2 > 2 * S_MAX:
        raise ValueError(f"multi-index order must lie in [0, {2 * S_MAX}]")
    g = field.grid
    mult = (1j * g.k1) ** a1 * (1j * g.k2) ** a2
    return SpectralField(g, field.coeffs * mult)


def gradient(field: SpectralField) -> SpectralField:
    """Gradient of a scalar field as a 2-component field."""
    g = field.grid
    c = field.coeffs[0]
    out = np.stack([1j * g.k1 * c, 1j * g.k2 * c])
    return SpectralField(g, out)


def divergence(field: SpectralField) -> SpectralField:
    """Divergence of a 2-component field."""
    g = field.grid
    c = 1j * g.k1 * field.coeffs[0] + 1j * g.k2 * field.coeffs[1]
    return SpectralField(g, c[None])


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product with quadratic aliasing removed by the 2/3 rule.

    Components broadcast, so a scalar field multiplies each component of a
    vector or tensor field.
    """
    f._check_mate(g)
    mask = f.grid.dealias_mask
    fv = np.real(np.fft.ifft2(f.coeffs * mask)) * f.grid.n_points ** 2
    gv = np.real(np.fft.ifft2(g.coeffs * mask)) * f.grid.n_points ** 2
    prod = np.fft.fft2(fv * gv) / f.grid.n_points ** 2
    return SpectralField(f.grid, prod * mask)


def project_pn(field: SpectralField, n_modes: int) -> SpectralField:
    """Galerkin projection: zero every mode with max(|k1|, |k2|) > n_modes."""
    g = field.grid
    if n_modes > g.n_points // 2:
        raise ValueError("n_modes exceeds the Nyquist mode of the grid")
    keep = np.maximum(np.abs(g.k1), np.abs(g.k2)) <= n_modes
    return SpectralField(g, field.coeffs * keep, enforce_symmetry=False)


def sobolev_norm(field: SpectralField, s: int):
    """Bessel-potential Sobolev norm ((2pi)^2 sum_k (1+|k|^2)^s |c_k|^2)^(1/2).

    Vector fields contribute the sum of their component norms squared.
    """
    if s < 0 or s > S_MAX:
        raise ValueError(f"Sobolev index must lie in [0, {S_MAX}]")
    g = field.grid
    weight = (1.0 + g.ksq) ** s
    total = np.sum(weight * np.abs(field.coeffs) ** 2)
    return float(np.sqrt(SIDE ** 2 * total))


_MULTI_INDICES_2 = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def sup_norm_w2inf(field: SpectralField):
    """Grid-sampled W^{2,inf} norm: max_x sum_{|alpha|<=2} |d^alpha u(x)|."""
    total = np.zeros((field.grid.n_points, field.grid.n_points))
    for alpha in _MULTI_INDICES_2:
        vals = derivative(field, alpha).values()
        total += np.sqrt(np.sum(vals ** 2, axis=0))
    return float(total.max())


def grad_u_sup_norm(field: SpectralField):
    """max_x sum_{a,b} |d_b u_a(x)|, the entrywise l1 gradient bound."""
    total = np.zeros((field.grid.n_points, field.grid.n_points))
    for alpha in ((1, 0), (0, 1)):
        total += np.sum(np.abs(derivative(field, alpha).values()), axis=0)
    return float(total.max())
