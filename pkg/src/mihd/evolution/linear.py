"""Closed-form evolution of the linearized system.

Per Fourier mode the linear problem reads

    eta' = u,   u' = -a u - b eta,   a = nu |2 pi k|^2,  b = (2 pi m k.omega)^2

and is advanced by the exact matrix exponential of the companion
matrix, written as ``C I + SH (L + a/2 I)`` with
``C = e^{-at/2} cosh(st)``, ``SH = e^{-at/2} sinh(st)/s``, ``s^2 = a^2/4 - b``.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from ..spectral import divergence
from .state import FlowState


def _expm1_over(x):
    """expm1(x)/x with the x -> 0 limit."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0
    out[nz] = np.expm1(x[nz]) / x[nz]
    return out


def propagator_entries(a, b, t):
    """Entries (M11, M12, M21, M22) of the per-mode propagator, elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    t = float(t)
    D = 0.25 * a * a - b
    M11 = np.empty(a.shape)
    M12 = np.empty(a.shape)
    M21 = np.empty(a.shape)
    M22 = np.empty(a.shape)

    # strongly overdamped: eigenvalue form, no cancellation in M22
    strong = D >= 0.25 * (0.25 * a * a)
    strong &= D > 0
    if np.any(strong):
        aa, bb = a[strong], b[strong]
        s = np.sqrt(D[strong])
        lam1 = -bb / (s + 0.5 * aa)  # s - a/2 without cancellation
        lam2 = -s - 0.5 * aa
        E1, E2 = np.exp(lam1 * t), np.exp(lam2 * t)
        x = 2 * s * t
        sh = np.where(x < 1, E2 * t * _expm1_over(np.minimum(x, 1.0)), (E1 - E2) / (2 * s))
        M11[strong] = (E1 * (s + 0.5 * aa) + E2 * lam1) / (2 * s)
        M12[strong] = sh
        M21[strong] = -bb * sh
        M22[strong] = (E1 * lam1 + E2 * (s + 0.5 * aa)) / (2 * s)

    weak = ~strong & (D >= 0)
    if np.any(weak):
        aa, bb = a[weak], b[weak]
        s = np.sqrt(D[weak])
        E1 = np.exp((s - 0.5 * aa) * t)
        E2 = np.exp((-s - 0.5 * aa) * t)
        c = 0.5 * (E1 + E2)
        x = 2 * s * t
        # small x: expm1 form avoids cancellation; large x: expm1 overflows against E2 -> 0
        sh = np.where(x < 1, E2 * t * _expm1_over(np.minimum(x, 1.0)), (E1 - E2) / (2 * np.maximum(s, 1e-300)))
        M11[weak] = c + 0.5 * aa * sh
        M12[weak] = sh
        M21[weak] = -bb * sh
        M22[weak] = c - 0.5 * aa * sh

    osc = D < 0
    if np.any(osc):
        aa, bb = a[osc], b[osc]
        sig = np.sqrt(-D[osc])
        damp = np.exp(-0.5 * aa * t)
        c = damp * np.cos(sig * t)
        sh = damp * t * np.sinc(sig * t / np.pi)
        M11[osc] = c + 0.5 * aa * sh
        M12[osc] = sh
        M21[osc] = -bb * sh
        M22[osc] = c - 0.5 * aa * sh
    return M11, M12, M21, M22


def mode_coefficients(k, omega, nu, m):
    """Damping a and stiffness b of mode k."""
    k = np.asarray(k, dtype=float)
    omega = np.asarray(omega, dtype=float)
    a = nu * (2 * np.pi) ** 2 * np.sum(k * k, axis=-1)
    b = (2 * np.pi * m * (k @ omega)) ** 2
    return a, b


def linear_propagator(k, omega, nu, m, dt):
    """2x2 matrix advancing (eta_hat, u_hat) of mode k by dt."""
    a, b = mode_coefficients(k, omega, nu, m)
    if not np.any(np.asarray(k)):
        a, b = 0.0, 0.0
    M11, M12, M21, M22 = propagator_entries(a, b, dt)
    return np.array([[M11, M12], [M21, M22]], dtype=complex).reshape(2, 2)


class LatticePropagator:
    """Propagator entries for every lattice mode at a fixed step."""

    def __init__(self, lattice, omega, nu, m, dt):
        self.lattice = lattice
        self.dt = float(dt)
        kv = lattice.kvec.astype(float)
        omega = np.asarray(omega, dtype=float)
        a = nu * lattice.k2
        kw = np.tensordot(omega, kv, axes=(0, 0))
        b = (2 * np.pi * m * kw) ** 2
        self.a, self.b = a, b
        self.M11, self.M12, self.M21, self.M22 = propagator_entries(a, b, dt)

    def apply(self, eta_c, u_c):
        return (self.M11 * eta_c + self.M12 * u_c,
                self.M21 * eta_c + self.M22 * u_c)

    @property
    def phi(self):
        """Forcing weights ``(P1e, P1u, P2e, P2u)`` for a source entering the u equation.

        ``P1 = int_0^dt e^{L(dt-s)} e_u ds`` and
        ``P2 = dt^-1 int_0^dt e^{L(dt-s)} e_u s ds``, read off the
        exponential of the augmented matrix [[L, e_u, 0], [0, 0, 1], [0, 0, 0]].
        """
        if getattr(self, "_phi", None) is None:
            self._phi = phi_weights(self.a, self.b, self.dt)
        return self._phi


def phi_weights(a, b, dt):
    a = np.asarray(a, dtype=float)
    b = np.broadcast_to(np.asarray(b, dtype=float), a.shape)
    B = np.zeros(a.shape + (4, 4))
    B[..., 0, 1] = 1.0
    B[..., 1, 0] = -b
    B[..., 1, 1] = -a
    B[..., 1, 2] = 1.0
    B[..., 2, 3] = 1.0
    X = expm(B.reshape(-1, 4, 4) * dt).reshape(a.shape + (4, 4))
    return X[..., 0, 2], X[..., 1, 2], X[..., 0, 3] / dt, X[..., 1, 3] / dt


def spectral_div_residual(field) -> float:
    return float(np.sqrt(np.sum(np.abs(divergence(field).coeffs) ** 2)))


def evolve_linear(initial: FlowState, omega, nu, m, t, tol=1e-10) -> FlowState:
    """Advance the linear system from ``initial`` by time ``t`` in one shot."""
    for name, f in (("eta", initial.eta), ("u", initial.u)):
        if spectral_div_residual(f) > tol:
            raise ValueError(f"initial {name} is not divergence-free")
    if t == 0:
        return initial
    P = LatticePropagator(initial.lattice, omega, nu, m, t)
    eta_c, u_c = P.apply(initial.eta.coeffs, initial.u.coeffs)
    return FlowState.from_coeffs(initial.lattice, initial.t + t, eta_c, u_c)
