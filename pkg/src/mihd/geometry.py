"""Flow-map algebra for the displacement eta, where zeta = y + eta.

``G = grad eta`` with ``G[i, j] = d_j eta_i`` and ``F = I + G``.  The
cofactor matrix ``A = cof F`` is a polynomial in ``G``:

    A = I + A_L + A_N,  A_L = tr(G) I - G^T,  A_N = cof(G)

so it is exact whether or not ``det F = 1``.  All products are formed
on the padded grid; ``A`` itself is stored projected to the lattice, and
every product involving it is a nested dealiased quadratic.  Because the
projected ``A`` keeps a vanishing row divergence (Piola), the
conservative form ``div(A^T v)`` and ``A_lk d_k v_l`` agree to roundoff.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .spectral import (
    Lattice,
    SpectralScalarField,
    SpectralTensorField,
    SpectralVectorField,
    directional_derivative,
)

_P1 = (1, 2, 0)
_P2 = (2, 0, 1)


def cofactor(F):
    """Cofactor matrix of ``F`` with shape ``(3, 3, ...)``, entry by entry."""
    C = np.empty_like(F)
    for i in range(3):
        i1, i2 = _P1[i], _P2[i]
        for j in range(3):
            j1, j2 = _P1[j], _P2[j]
            C[i, j] = F[i1, j1] * F[i2, j2] - F[i1, j2] * F[i2, j1]
    return C


def polar_cofactor(G, H):
    """Bilinear part cof(G + H) - cof(G) - cof(H)."""
    C = np.empty_like(G)
    for i in range(3):
        i1, i2 = _P1[i], _P2[i]
        for j in range(3):
            j1, j2 = _P1[j], _P2[j]
            C[i, j] = (G[i1, j1] * H[i2, j2] + H[i1, j1] * G[i2, j2]
                       - G[i1, j2] * H[i2, j1] - H[i1, j2] * G[i2, j1])
    return C


def linear_cofactor(G):
    """tr(G) I - G^T, the part of cof(I + G) linear in G."""
    L = -np.swapaxes(G, 0, 1).copy()
    tr = G[0, 0] + G[1, 1] + G[2, 2]
    for i in range(3):
        L[i, i] = L[i, i] + tr
    return L


def determinant(F):
    C = cofactor(F)
    return F[0, 0] * C[0, 0] + F[0, 1] * C[0, 1] + F[0, 2] * C[0, 2]


def _grad_coeffs(lat: Lattice, coeffs):
    """Coefficients of the Jacobian of a vector field, shape (3, 3, ...)."""
    return coeffs[:, None] * lat.ik[None, :]


class GeometryBundle:
    """Cached geometric quantities of one displacement field.

    Grid-valued arrays live on the padded grid of the lattice.  Lattice
    quantities (``grad_eta``, ``cof``, ``tildeA_L``, ``tildeA_N``,
    ``det_field``) are computed lazily.
    """

    def __init__(self, eta: SpectralVectorField, source_state_time: float = 0.0):
        self.eta = eta
        self.lattice = eta.lattice
        self.source_state_time = float(source_state_time)
        lat = self.lattice
        self._G = _grad_coeffs(lat, eta.coeffs)
        self.grad_grid = lat.to_grid(self._G)
        F = self.grad_grid.copy()
        for i in range(3):
            F[i, i] += 1.0
        self._cof_exact_grid = cofactor(F)
        # projected cofactor and its samples
        self._cof = lat.from_grid(self._cof_exact_grid)
        self.cof_grid = lat.to_grid(self._cof)

    # -- lattice fields -----------------------------------------------------
    @cached_property
    def grad_eta(self):
        return SpectralTensorField(self.lattice, self._G)

    @cached_property
    def cof(self):
        return SpectralTensorField(self.lattice, self._cof)

    @cached_property
    def tildeA_L(self):
        return SpectralTensorField(self.lattice, linear_cofactor(self._G))

    @cached_property
    def tildeA_N(self):
        c = self._cof - linear_cofactor(self._G)
        for i in range(3):
            c[i, i, 0, 0, 0] -= 1.0
        return SpectralTensorField(self.lattice, c)

    @cached_property
    def tildeA(self):
        return self.cof - SpectralTensorField.identity(self.lattice)

    @cached_property
    def det_field(self):
        """det(I + grad eta) as the nested product F_0j * P(cof)_0j."""
        lat = self.lattice
        F0 = self.grad_grid[0].copy()
        F0[0] += 1.0
        prod = np.sum(F0 * self.cof_grid[0], axis=0)
        return SpectralScalarField(lat, lat.from_grid(prod))

    # -- pointwise diagnostics ------------------------------------------------
    @cached_property
    def det_grid(self):
        F = self.grad_grid.copy()
        for i in range(3):
            F[i, i] += 1.0
        return np.sum(F[0] * self._cof_exact_grid[0], axis=0)

    @cached_property
    def det_err(self) -> float:
        """sup |det(grad zeta) - 1| over the padded grid."""
        return float(np.max(np.abs(self.det_grid - 1.0)))

    @cached_property
    def min_det(self) -> float:
        return float(np.min(self.det_grid))

    @cached_property
    def grad_sup(self) -> float:
        """sup over the grid of max_ij |d_j eta_i|."""
        return float(np.max(np.abs(self.grad_grid)))

    @cached_property
    def min_singular_value(self) -> float:
        """Smallest singular value of grad zeta over the padded grid."""
        F = self.grad_grid.copy()
        for i in range(3):
            F[i, i] += 1.0
        mats = np.moveaxis(F.reshape(3, 3, -1), -1, 0)
        return float(np.min(np.linalg.svd(mats, compute_uv=False)))

    def piola_residual(self) -> float:
        """|| d_k cof_ik ||_0 summed over rows."""
        lat = self.lattice
        r = np.sum(lat.ik[None] * self._cof, axis=1)
        return float(np.sqrt(np.sum(np.abs(r) ** 2)))

    # -- grid kernels (used by the solvers) -----------------------------------
    def grad_A_coeffs(self, f_coeffs):
        """Coefficients of A grad f for scalar coefficients (leading axes allowed)."""
        lat = self.lattice
        g = lat.to_grid(lat.ik * f_coeffs[..., None, :, :, :])
        # explicit loop keeps the summation order fixed
        lead = g.shape[:-4]
        out = np.empty(lead + (3,) + g.shape[-3:])
        for i in range(3):
            out[..., i, :, :, :] = (self.cof_grid[i, 0] * g[..., 0, :, :, :]
                                    + self.cof_grid[i, 1] * g[..., 1, :, :, :]
                                    + self.cof_grid[i, 2] * g[..., 2, :, :, :])
        return lat.from_grid(out)

    def div_A_coeffs(self, v_coeffs):
        """Conservative div(A^T v) for vector coefficients (leading axes allowed)."""
        lat = self.lattice
        v = lat.to_grid(v_coeffs)
        lead = v.shape[:-4]
        w = np.empty(lead + (3,) + v.shape[-3:])
        for k in range(3):
            w[..., k, :, :, :] = (self.cof_grid[0, k] * v[..., 0, :, :, :]
                                  + self.cof_grid[1, k] * v[..., 1, :, :, :]
                                  + self.cof_grid[2, k] * v[..., 2, :, :, :])
        wc = lat.from_grid(w)
        return np.sum(lat.ik * wc, axis=-4)

    def laplacian_A_coeffs(self, f_coeffs):
        return self.div_A_coeffs(self.grad_A_coeffs(f_coeffs))

    def __repr__(self):
        return f"GeometryBundle(n={self.lattice.n}, t={self.source_state_time}, det_err={self.det_err:.3e})"


def build_geometry(eta: SpectralVectorField, t: float = 0.0) -> GeometryBundle:
    return GeometryBundle(eta, t)


def div_residual(eta: SpectralVectorField) -> SpectralScalarField:
    """r_eta = r2 + r3 so that div eta = r_eta exactly when det(I + grad eta) = 1.

    r2 is minus the sum of the principal 2x2 minors of grad eta, r3 is
    minus its determinant (formed as a nested product).
    """
    lat = eta.lattice
    G = lat.to_grid(_grad_coeffs(lat, eta.coeffs))
    cG = cofactor(G)
    r2 = -(cG[0, 0] + cG[1, 1] + cG[2, 2])
    cGp = lat.to_grid(lat.from_grid(cG[0]))
    r3 = -np.sum(G[0] * cGp, axis=0)
    return SpectralScalarField(lat, lat.from_grid(r2 + r3))


def _as_geometry(g):
    if isinstance(g, GeometryBundle):
        return g
    raise TypeError("expected a GeometryBundle")


def div_A(v: SpectralVectorField, g: GeometryBundle) -> SpectralScalarField:
    """A_lk d_k v_l with dealiased products."""
    g = _as_geometry(g)
    lat = v.lattice
    if lat != g.lattice:
        raise ValueError("field and geometry live on different lattices")
    dv = lat.to_grid(_grad_coeffs(lat, v.coeffs))  # dv[l, k] = d_k v_l
    acc = np.zeros(dv.shape[-3:])
    for l in range(3):
        for k in range(3):
            acc += g.cof_grid[l, k] * dv[l, k]
    return SpectralScalarField(lat, lat.from_grid(acc))


def grad_A(f: SpectralScalarField, g: GeometryBundle) -> SpectralVectorField:
    """(A_ik d_k f)_i with dealiased products."""
    g = _as_geometry(g)
    if f.lattice != g.lattice:
        raise ValueError("field and geometry live on different lattices")
    return SpectralVectorField(f.lattice, g.grad_A_coeffs(f.coeffs))


def laplacian_A(f, g: GeometryBundle):
    """div_A grad_A f; vectors are handled component-wise."""
    if isinstance(f, SpectralVectorField):
        return SpectralVectorField.from_components([laplacian_A(c, g) for c in f.components])
    return div_A(grad_A(f, g), g)


def recover_magnetic(eta: SpectralVectorField, m: float, omega) -> SpectralVectorField:
    """B = m (d_omega eta + omega): mean m*omega plus the fluctuating part."""
    if not m > 0:
        raise ValueError("field intensity m must be positive")
    omega = np.asarray(omega, dtype=float)
    b = directional_derivative(eta, omega).coeffs * m
    b[:, 0, 0, 0] = m * omega
    return SpectralVectorField(eta.lattice, b)
