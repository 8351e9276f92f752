import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mihd.geometry import (GeometryBundle, build_geometry, cofactor, div_A, div_residual, grad_A, laplacian_A,
                           recover_magnetic)
from mihd.spectral import (Lattice, SpectralScalarField, SpectralVectorField, directional_derivative, divergence,
                           gradient, inner, laplacian, random_band_limited, sobolev_norm)

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def shear(lat, a):
    y = np.arange(lat.n) / lat.n
    _, Y2, _ = np.meshgrid(y, y, y, indexing="ij")
    x = np.zeros((3,) + lat.shape)
    x[0] = a * np.sin(2 * np.pi * Y2)
    return SpectralVectorField.from_samples(lat, x), Y2


def F_grid(g):
    F = g.grad_grid.copy()
    for i in range(3):
        F[i, i] += 1
    return F


def inverse_oracle(F):
    """det(F) F^-T from numpy's LU-based inverse and determinant, pointwise."""
    mats = np.moveaxis(F.reshape(3, 3, -1), -1, 0)
    det = np.linalg.det(mats)
    adj = det[:, None, None] * np.swapaxes(np.linalg.inv(mats), 1, 2)
    return np.moveaxis(adj, 0, -1).reshape(F.shape), det.reshape(F.shape[2:])


def test_identity_geometry(lat8):
    g = build_geometry(SpectralVectorField.zeros(lat8))
    eye = np.eye(3)[:, :, None, None, None]
    assert np.max(np.abs(g.cof.samples() - eye)) == 0
    assert np.max(np.abs(g.tildeA_L.coeffs)) == 0
    assert np.max(np.abs(g.tildeA_N.coeffs)) == 0
    assert g.det_err == 0 and g.min_det == 1


def test_shear_geometry(lat8):
    a = 0.03
    eta, Y2 = shear(lat8, a)
    g = build_geometry(eta)
    AL = g.tildeA_L.samples()
    ref = np.zeros_like(AL)
    ref[1, 0] = -2 * np.pi * a * np.cos(2 * np.pi * Y2)
    assert np.max(np.abs(AL - ref)) < 1e-15
    assert np.max(np.abs(g.tildeA_N.coeffs)) < 1e-16
    assert g.det_err < 1e-15
    assert np.max(np.abs(div_residual(eta).coeffs)) < 1e-16


def test_cofactor_inverse_oracle_n16(rng):
    lat = Lattice(16)
    eta = random_band_limited(lat, rng, 4, amplitude=0.05, lead=(3,))
    g = build_geometry(eta)
    adj, _ = inverse_oracle(F_grid(g))
    assert np.max(np.abs(g._cof_exact_grid - adj)) < 1e-10


def test_det_expansion_pointwise(rng):
    # det(I + G) - 1 = tr G - r with r = -(sum of principal minors) - det G, checked against numpy det
    G = 0.3 * rng.standard_normal((3, 3, 50))
    F = G + np.eye(3)[:, :, None]
    det = np.linalg.det(np.moveaxis(F, -1, 0))
    minors = sum(G[i, i] * G[j, j] - G[i, j] * G[j, i] for i, j in ((0, 1), (0, 2), (1, 2)))
    r = -minors - np.linalg.det(np.moveaxis(G, -1, 0))
    assert np.max(np.abs(det - 1 - (np.trace(G) - r))) < 1e-14
    assert np.max(np.abs(cofactor(F) - cofactor(F))) == 0


def test_div_residual_identity_on_lattice(rng):
    lat = Lattice(16)
    eta = random_band_limited(lat, rng, 4, amplitude=0.1, lead=(3,))
    g = build_geometry(eta)
    lhs = g.det_field.samples() - 1
    rhs = (divergence(eta) - div_residual(eta)).samples()
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@settings(max_examples=10, deadline=None)
@given(seeds, st.floats(0.001, 0.1), st.integers(1, 4))
def test_cofactor_and_piola_properties(seed, amp, band):
    lat = Lattice(16)
    eta = random_band_limited(lat, np.random.default_rng(seed), band, amplitude=amp, lead=(3,))
    g = build_geometry(eta)
    F = F_grid(g)
    C = g._cof_exact_grid
    det = g.det_grid
    prod = np.einsum("kixyz,kjxyz->ijxyz", C, F)
    assert np.max(np.abs(prod - det * np.eye(3)[:, :, None, None, None])) < 1e-10
    assert g.piola_residual() < 1e-8
    lhs = g.det_field.samples() - 1
    rhs = (divergence(eta) - div_residual(eta)).samples()
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_div_A_cases(lat8, rng):
    v = random_band_limited(lat8, rng, 3, lead=(3,))
    g0 = build_geometry(SpectralVectorField.zeros(lat8))
    assert np.max(np.abs(div_A(v, g0).coeffs - divergence(v).coeffs)) < 1e-13
    eta = random_band_limited(lat8, rng, 2, amplitude=0.05, lead=(3,))
    g = build_geometry(eta)
    c = np.zeros((3,) + lat8.shape, dtype=complex)
    c[:, 0, 0, 0] = (1.0, -2.0, 0.5)
    assert sobolev_norm(div_A(SpectralVectorField(lat8, c), g), 0) < 1e-13
    cons = g.div_A_coeffs(v.coeffs)
    assert np.max(np.abs(div_A(v, g).coeffs - cons)) < 1e-10


def test_grad_A_cases_and_duality(lat8, rng):
    f = random_band_limited(lat8, rng, 3)
    g0 = build_geometry(SpectralVectorField.zeros(lat8))
    assert np.max(np.abs(grad_A(f, g0).coeffs - gradient(f).coeffs)) < 1e-13
    eta = random_band_limited(lat8, rng, 2, amplitude=0.05, lead=(3,))
    g = build_geometry(eta)
    const = SpectralScalarField(lat8, np.where(np.arange(lat8.n ** 3).reshape(lat8.shape) == 0, 4.0, 0.0))
    assert np.max(np.abs(grad_A(const, g).coeffs)) == 0
    v = random_band_limited(lat8, rng, 3, lead=(3,))
    lhs = inner(grad_A(f, g), v)
    rhs = -inner(f, div_A(v, g))
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_laplacian_A_is_composition(lat8, rng):
    eta = random_band_limited(lat8, rng, 2, amplitude=0.05, lead=(3,))
    g = build_geometry(eta)
    f = random_band_limited(lat8, rng, 3)
    assert np.array_equal(laplacian_A(f, g).coeffs, div_A(grad_A(f, g), g).coeffs)
    g0 = build_geometry(SpectralVectorField.zeros(lat8))
    assert np.max(np.abs(laplacian_A(f, g0).coeffs - laplacian(f).coeffs)) < 1e-11
    v = random_band_limited(lat8, rng, 3, lead=(3,))
    lv = laplacian_A(v, g)
    for i in range(3):
        assert np.array_equal(lv.coeffs[i], laplacian_A(v.components[i], g).coeffs)


def test_recover_magnetic(lat8, omega_alg):
    m = 3.0
    b = recover_magnetic(SpectralVectorField.zeros(lat8), m, omega_alg).samples()
    assert np.max(np.abs(b - m * omega_alg[:, None, None, None])) < 1e-14
    a = 0.02
    eta, Y2 = shear(lat8, a)
    b = recover_magnetic(eta, m, omega_alg).samples()
    ref = m * omega_alg[:, None, None, None] * np.ones((3,) + lat8.shape)
    ref[0] = ref[0] + m * 2 * np.pi * a * omega_alg[1] * np.cos(2 * np.pi * Y2)
    assert np.max(np.abs(b - ref)) < 1e-13
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            recover_magnetic(eta, bad, omega_alg)


@settings(max_examples=10, deadline=None)
@given(seeds, st.floats(0.1, 50))
def test_magnetic_flux_relation(seed, m):
    lat = Lattice(8)
    omega = np.array([0.6, 0.0, 0.8])
    eta = random_band_limited(lat, np.random.default_rng(seed), 3, amplitude=0.1, lead=(3,))
    lhs = divergence(recover_magnetic(eta, m, omega)).coeffs
    rhs = m * directional_derivative(divergence(eta), omega).coeffs
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


def test_diffeomorphism_monitors(lat8, rng):
    eta = random_band_limited(lat8, rng, 2, amplitude=0.05, lead=(3,))
    g = GeometryBundle(eta)
    assert 0 < g.min_singular_value <= 1.5
    assert g.min_det > 0.5
    assert g.grad_sup > 0
    assert "det_err" in repr(g)
