"""Pressure as the fixed point of a constant-coefficient Poisson problem.

Differentiating ``div_A u = div(A^T u) = 0`` in time along

    u_t = -A grad q + nu Delta_A u + m^2 d_omega^2 eta

gives ``Delta_A q = F0`` with the q-independent source

    F0 = div(A_t^T u) + nu div_A(Delta_A u) + m^2 div_A(d_omega^2 eta).

Writing ``Delta_A = Delta + (Delta_A - Delta)`` turns this into

    Delta q = f(q) := F0 + Delta q - Delta_A q

which is solved by Picard iteration from ``q = 0`` (or a warm start).
``Delta_A - Delta = div(S grad .)`` with ``S = A^T A - I`` is small when
``grad eta`` is, which is what makes the iteration contract.  The term
``nu div_A(Delta_A u)`` vanishes for exact volume-preserving flows; it is
kept so the discrete constraint is differentiated consistently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryBundle, linear_cofactor, polar_cofactor
from .spectral import SpectralScalarField

EPS = np.finfo(float).eps
GUARD_DEFAULT = 0.1


class PressureError(RuntimeError):
    def __init__(self, message, iterations=0, residual=float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class GuardViolation(PressureError):
    pass


@dataclass
class PressureSolveReport:
    q: SpectralScalarField
    iterations: int
    residual: float
    contraction_estimate: float
    guard_value: float = 0.0
    guard_threshold: float = GUARD_DEFAULT
    residual_exact: bool = True

    @property
    def guard_ok(self) -> bool:
        return self.guard_value <= self.guard_threshold


def _norm(c):
    return float(np.sqrt(np.sum(c.real ** 2 + c.imag ** 2)))


class PressureProblem:
    """q-independent data of the pressure equation for one (eta, u)."""

    def __init__(self, g: GeometryBundle, u_coeffs, m, nu, omega,
                 gradu_grid=None, lapA_u=None, viscous_consistency=True):
        lat = g.lattice
        self.g = g
        self.lattice = lat
        u_coeffs = np.asarray(u_coeffs)
        if gradu_grid is None:
            gradu_grid = lat.to_grid(u_coeffs[:, None] * lat.ik[None, :])
        # A_t from the chain rule with G_t = grad u
        At = lat.from_grid(linear_cofactor(gradu_grid) + polar_cofactor(g.grad_grid, gradu_grid))
        At_grid = lat.to_grid(At)
        u_grid = lat.to_grid(u_coeffs)
        w = np.empty((3,) + u_grid.shape[1:])
        for k in range(3):
            w[k] = At_grid[0, k] * u_grid[0] + At_grid[1, k] * u_grid[1] + At_grid[2, k] * u_grid[2]
        f_t = np.sum(lat.ik * lat.from_grid(w), axis=0)

        sym = lat.directional_symbol(omega)
        eta2 = sym * sym * g.eta.coeffs
        vec = (m * m) * eta2
        if viscous_consistency and nu != 0:
            if lapA_u is None:
                lapA_u = g.laplacian_A_coeffs(u_coeffs)
            vec = vec + nu * lapA_u
        F0 = f_t + g.div_A_coeffs(vec)
        F0[0, 0, 0] = 0.0
        self.F0 = F0

    def source(self, q_coeffs, lapA_q=None):
        lat = self.lattice
        if lapA_q is None:
            lapA_q = self.g.laplacian_A_coeffs(q_coeffs)
        f = self.F0 - lat.k2 * q_coeffs - lapA_q
        f[0, 0, 0] = 0.0
        return f

    def solve(self, q0=None, tol=1e-10, max_iter=100, exact_residual=True):
        lat = self.lattice
        q = np.zeros(lat.shape, dtype=complex) if q0 is None else np.array(q0, dtype=complex)
        q[0, 0, 0] = 0.0
        prev_update = None
        ratio = 0.0
        bad = 0
        lapA_q = None
        for it in range(1, max_iter + 1):
            lapA_q = self.g.laplacian_A_coeffs(q) if np.any(q) else np.zeros_like(q)
            # q_new = Delta^{-1} f(q) = q + Delta^{-1}(F0 - Delta_A q)
            r = self.F0 - lapA_q
            r[0, 0, 0] = 0.0
            dq = -lat.inv_k2 * r
            q = q + dq
            upd = _norm(dq)
            qn = _norm(q)
            if prev_update is not None and prev_update > 0:
                ratio = upd / prev_update
                bad = bad + 1 if ratio >= 1 else 0
            prev_update = upd
            if upd <= tol * qn or upd == 0.0:
                break
            if bad >= 3:
                raise PressureError("no contraction", it, upd / max(qn, EPS))
        else:
            raise PressureError("max iterations", max_iter, prev_update / max(_norm(q), EPS))
        if exact_residual:
            lapA_new = self.g.laplacian_A_coeffs(q)
            res = lapA_new - self.F0
            res[0, 0, 0] = 0.0
            f = self.source(q, lapA_new)
            residual = _norm(res) / max(_norm(f), EPS)
        else:
            # Delta q_new - f(q_new) equals Delta_A dq to first order
            f = self.F0 - lat.k2 * q - lapA_q
            residual = ratio * _norm(lat.k2 * dq) / max(_norm(f), EPS)
        return q, it, residual, ratio


def _check_guard(g, guard, strict):
    val = g.grad_sup
    if strict and val > guard:
        raise GuardViolation(f"contraction guard violated: sup|grad eta| = {val:.3e} > {guard}")
    return val


def pressure_source(state, g: GeometryBundle, q_guess, m, nu, omega, viscous_consistency=True):
    """f(q_guess) for the Poisson form of the pressure equation (mean zero)."""
    lat = g.lattice
    prob = PressureProblem(g, state.u.coeffs, m, nu, omega, viscous_consistency=viscous_consistency)
    q = np.zeros(lat.shape, dtype=complex) if q_guess is None else q_guess.coeffs
    return SpectralScalarField(lat, prob.source(q))


def solve_pressure(state, g: GeometryBundle, m, nu, omega, tol=1e-10, max_iter=100,
                   q_guess=None, guard=GUARD_DEFAULT, strict_guard=False,
                   viscous_consistency=True) -> PressureSolveReport:
    """Picard iteration for the mean-zero pressure.

    The gradient guard (``sup|grad eta| <= guard``) is reported in every
    result and only enforced when ``strict_guard`` is set.
    """
    gv = _check_guard(g, guard, strict_guard)
    prob = PressureProblem(g, state.u.coeffs, m, nu, omega, viscous_consistency=viscous_consistency)
    q0 = None if q_guess is None else q_guess.coeffs
    q, it, res, ratio = prob.solve(q0, tol, max_iter)
    return PressureSolveReport(SpectralScalarField(g.lattice, q), it, res, ratio, gv, guard)
