"""Binary snapshot format for bit-exact restarts (.fkp files).

Layout, all little-endian:

    bytes 0..3    magic "FKPD"
    u32           format version (1)
    u32 x 4       n_points, n_radial, n_angular, n_basis
    f64           extensibility b
    f64           time stamp
    complex128    r coefficients,   n_points^2 values (k1-major)
    complex128    u coefficients,   2 * n_points^2 values (component-major)
    complex128    psi coefficients, n_basis * n_points^2 values (basis-major)

complex128 is stored as (real, imaginary) binary64 pairs.  Loading without
an explicit basis rebuilds grid, quadrature and eigenbasis from the stored
dimensions, which is deterministic, so save -> load -> save reproduces the
file byte for byte.
"""

import os
import struct

import numpy as np

from .configspace import build_quadrature, eigen_basis
from .coupling import CoupledState
from .errors import VersionError
from .fluid import FluidState
from .fokker_planck import PolymerField
from .torus import SpectralField, TorusGrid

MAGIC = b"FKPD"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIdd")


def checkpoint_save(state: CoupledState, path):
    """Write the state atomically (write-then-rename)."""
    grid = state.fluid.r.grid
    quad = state.psi.basis.quad
    header = _HEADER.pack(MAGIC, VERSION, grid.n_points, quad.n_radial,
                          quad.n_angular, state.psi.basis.n_basis, quad.b,
                          state.time)
    blob = b"".join([
        header,
        np.ascontiguousarray(state.fluid.r.coeffs[0]).astype("<c16").tobytes(),
        np.ascontiguousarray(state.fluid.u.coeffs).astype("<c16").tobytes(),
        np.ascontiguousarray(state.psi.coeffs).astype("<c16").tobytes(),
    ])
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def checkpoint_load(path, grid=None, basis=None) -> CoupledState:
    """Read a snapshot; grid/basis are rebuilt from the header when absent."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise VersionError(f"{path}: not a FKPD checkpoint")
    magic, version, n_points, n_radial, n_angular, n_basis, b, time = \
        _HEADER.unpack_from(raw)
    if version != VERSION:
        raise VersionError(f"{path}: unsupported format version {version}")
    n_r = n_points * n_points
    expected = _HEADER.size + 16 * (n_r + 2 * n_r + n_basis * n_r)
    if len(raw) != expected:
        raise VersionError(f"{path}: truncated or padded checkpoint "
                           f"({len(raw)} bytes, expected {expected})")

    if grid is None:
        grid = TorusGrid(n_points)
    elif grid.n_points != n_points:
        raise VersionError(f"{path}: grid size {n_points} does not match "
                           f"the configured {grid.n_points}")
    if basis is None:
        basis = eigen_basis(build_quadrature(b, n_radial, n_angular), n_basis)
    else:
        quad = basis.quad
        if (quad.n_radial, quad.n_angular, basis.n_basis) != \
                (n_radial, n_angular, n_basis) or quad.b != b:
            raise VersionError(f"{path}: configuration-space dimensions do "
                               "not match the configured basis")

    off = _HEADER.size
    def block(count):
        nonlocal off
        out = np.frombuffer(raw, dtype="<c16", count=count, offset=off)
        off += 16 * count
        return out.astype(complex)

    r = SpectralField(grid, block(n_r).reshape(n_points, n_points),
                      enforce_symmetry=False)
    u = SpectralField(grid, block(2 * n_r).reshape(2, n_points, n_points),
                      enforce_symmetry=False)
    psi_coeffs = block(n_basis * n_r).reshape(n_basis, n_points, n_points)
    fluid = FluidState(r, u, time)
    psi = PolymerField(grid, basis, psi_coeffs, time, enforce_symmetry=False)
    return CoupledState(fluid, psi)
