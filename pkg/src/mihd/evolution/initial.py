"""Initial data: the trigonometric family with its Stokes corrections.

The base field (rescaled to period one, so ``div`` is unchanged) is

    bar(y) = (sin cos cos, cos sin cos, -2 cos cos sin)(2 pi y) / (2 pi)

and the data are ``eta0 = eps bar + eps^2 eta_r``, ``u0 = bar + eps u_r``.
On the torus the mean-zero Stokes problem ``-Delta w + grad Q = 0,
div w = g`` is solved by ``w = grad Delta^{-1} g``, so both corrections
are fixed points of explicit maps.
"""
from __future__ import annotations

import numpy as np

from ..geometry import build_geometry, div_residual
from ..spectral import Lattice, SpectralVectorField
from .state import FlowState, SimConfig


class FixedPointError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


def base_field(lattice: Lattice) -> SpectralVectorField:
    """Divergence-free trigonometric field with modes at |k_i| = 1."""
    y = 2 * np.pi * lattice.grid_points()
    s, c = np.sin(y), np.cos(y)
    v = np.stack([s[0] * c[1] * c[2], c[0] * s[1] * c[2], -2 * c[0] * c[1] * s[2]]) / (2 * np.pi)
    return SpectralVectorField(lattice, lattice.samples_to_coeffs(v))


def stokes_correction(lattice: Lattice, g_coeffs):
    """Mean-zero w with div w = g: the closed form grad Delta^{-1} g."""
    g = np.array(g_coeffs, dtype=complex)
    g[0, 0, 0] = 0.0
    phi = -lattice.inv_k2 * g
    return lattice.ik * phi[None]


def _norm(c):
    return float(np.sqrt(np.sum(np.abs(c) ** 2)))


def _eta_correction(lat, bar_c, eps, tol, max_iter):
    er = np.zeros_like(bar_c)
    res = np.inf
    for _ in range(max_iter):
        eta0 = SpectralVectorField(lat, eps * bar_c + eps * eps * er)
        r = div_residual(eta0).coeffs / (eps * eps)
        new = stokes_correction(lat, r)
        res = _norm(new - er) / max(_norm(new), 1e-300)
        er = new
        if res <= tol or _norm(new) == 0:
            return er, res
    raise FixedPointError("eta correction did not converge", res)


def _u_correction(lat, g, bar_c, eps, tol, max_iter):
    ur = np.zeros_like(bar_c)
    res = np.inf
    for _ in range(max_iter):
        u0 = bar_c + eps * ur
        # div_{A - I} v = div_A v - div v
        src = -(g.div_A_coeffs(u0) - np.sum(lat.ik * u0, axis=0)) / eps
        new = stokes_correction(lat, src)
        res = _norm(new - ur) / max(_norm(new), 1e-300)
        ur = new
        if res <= tol or _norm(new) == 0:
            return ur, res
    raise FixedPointError("velocity correction did not converge", res)


def make_initial_data(cfg: SimConfig, tol=1e-13, max_iter=200) -> FlowState:
    """(eps bar + eps^2 eta_r, bar + eps u_r); eps = 0 and ``initial = rest`` give the rest state."""
    lat = cfg.lattice
    if cfg.initial == "rest":
        return FlowState.rest(lat)
    eps = float(cfg.epsilon)
    if not 0 <= eps <= 0.2:
        raise ValueError("epsilon must lie in [0, 0.2]")
    if eps == 0:
        return FlowState.rest(lat)
    bar_c = base_field(lat).coeffs
    er, _ = _eta_correction(lat, bar_c, eps, tol, max_iter)
    eta0 = eps * bar_c + eps * eps * er
    g = build_geometry(SpectralVectorField(lat, eta0))
    ur, _ = _u_correction(lat, g, bar_c, eps, tol, max_iter)
    return FlowState.from_coeffs(lat, 0.0, eta0, bar_c + eps * ur)


def linearized_initial_data(state0: FlowState, tol=1e-9) -> FlowState:
    """Add the Stokes corrections that make (eta0, u0) divergence-free.

    eta_r = grad Delta^{-1}(-div eta0), u_r = grad Delta^{-1}(div_{A0 - I} u0).
    """
    lat = state0.lattice
    g = build_geometry(state0.eta)
    u0 = state0.u.coeffs
    divA = g.div_A_coeffs(u0)
    if _norm(divA) > tol:
        raise ValueError(f"initial velocity violates div_A u = 0 (residual {_norm(divA):.3e})")
    eta_r = stokes_correction(lat, -np.sum(lat.ik * state0.eta.coeffs, axis=0))
    u_r = stokes_correction(lat, divA - np.sum(lat.ik * u0, axis=0))
    return FlowState.from_coeffs(lat, state0.t, state0.eta.coeffs + eta_r, u0 + u_r)
