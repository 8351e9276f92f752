"""Integrating-factor RK2 for the Lagrangian system.

With ``y = (eta, u)`` the system is ``y' = L y + N(y)`` where ``L`` holds
``nu Delta`` and ``m^2 d_omega^2`` (advanced exactly by the per-mode
propagator ``E``) and ``N = (0, nu (Delta_A - Delta) u - grad_A q)``.
The remainder is integrated against the exact linear flow with the
two-stage exponential rule

    a       = E y_n + P1 N(y_n)
    y_{n+1} = a + P2 (N(a) - N(y_n))

where ``P1``, ``P2`` are the per-mode forcing weights (constant and
linear-in-time source).  Unlike the Lawson form ``E (y + dt N)`` this
stays second order when ``nu |2 pi k|^2 dt`` is not small.

followed by restoration of ``div_A u = 0``: ``Delta_A phi = div_A u`` is
solved by Picard iteration and ``u <- u - grad_A phi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import GeometryBundle
from ..pressure import PressureError, PressureProblem, _check_guard
from ..spectral import SpectralVectorField
from .linear import LatticePropagator
from .state import FlowState, SimConfig

RESTORE_TRIGGER = 1e-11
RESTORE_TOL = 1e-12
RESTORE_MAX_ITER = 50
BLOWUP = 1e-2


class ConstraintBlowup(RuntimeError):
    pass


def _norm(c):
    return float(np.sqrt(np.sum(c.real ** 2 + c.imag ** 2)))


class StageEvaluation:
    """Nonlinear remainder and by-products at one (eta, u)."""

    def __init__(self, stepper, eta_c, u_c, g=None, q_guess=None):
        lat = stepper.lattice
        self.g = g if g is not None else GeometryBundle(SpectralVectorField(lat, eta_c))
        g = self.g
        gradu = u_c[:, None] * lat.ik[None, :]
        gradu_grid = lat.to_grid(gradu)
        cof = g.cof_grid
        # X[i, j] = A_jk d_k u_i, projected: the rows of grad_A u_i
        X = np.empty_like(gradu_grid)
        for i in range(3):
            for j in range(3):
                X[i, j] = cof[j, 0] * gradu_grid[i, 0] + cof[j, 1] * gradu_grid[i, 1] + cof[j, 2] * gradu_grid[i, 2]
        Xc = lat.from_grid(X)
        self.gradA_u_sq = float(np.sum(Xc.real ** 2 + Xc.imag ** 2))
        Xg = lat.to_grid(Xc)
        W = np.empty_like(Xg)
        for i in range(3):
            for k in range(3):
                W[i, k] = cof[0, k] * Xg[i, 0] + cof[1, k] * Xg[i, 1] + cof[2, k] * Xg[i, 2]
        lapA_u = np.sum(lat.ik[None] * lat.from_grid(W), axis=1)
        self.guard_value = _check_guard(g, stepper.guard, stepper.strict_guard)
        prob = PressureProblem(g, u_c, stepper.m, stepper.nu, stepper.omega,
                               gradu_grid=gradu_grid, lapA_u=lapA_u)
        q, it, res, ratio = prob.solve(q_guess, stepper.pressure_tol, stepper.pressure_max_iter,
                                       exact_residual=False)
        self.q = q
        self.pressure_iters = it
        self.pressure_residual = res
        self.contraction = ratio
        gradA_q = g.grad_A_coeffs(q)
        self.N = stepper.nu * (lapA_u + lat.k2 * u_c) - gradA_q
        self.N[:, 0, 0, 0] = 0.0


@dataclass
class StepInfo:
    pressure_iters: int = 0
    pressure_residual: float = 0.0
    divA_pre: float = 0.0
    divA_post: float = 0.0
    restore_iters: int = 0
    det_err: float = 0.0
    guard_value: float = 0.0
    extra: dict = field(default_factory=dict)


class Stepper:
    """Stateful driver that caches the end-of-step stage evaluation."""

    def __init__(self, lattice, omega, nu, m, dt, pressure_tol=1e-10, pressure_max_iter=100,
                 project_cadence=1, guard=0.1, strict_guard=False, linear_only=False):
        self.lattice = lattice
        self.omega = np.asarray(omega, dtype=float)
        self.nu = float(nu)
        self.m = float(m)
        self.dt = float(dt)
        self.pressure_tol = pressure_tol
        self.pressure_max_iter = pressure_max_iter
        self.project_cadence = project_cadence
        self.guard = guard
        self.strict_guard = strict_guard
        self.linear_only = linear_only
        self.E = LatticePropagator(lattice, self.omega, self.nu, self.m, self.dt)
        self._cache = None  # (key, StageEvaluation)
        self._q = None
        self._q_prev = None
        self.steps_taken = 0

    @classmethod
    def from_config(cls, cfg: SimConfig, linear_only=False):
        return cls(cfg.lattice, cfg.omega, cfg.nu, cfg.m, cfg.dt, cfg.pressure_tol,
                   cfg.pressure_max_iter, cfg.project_cadence, cfg.guard, False, linear_only)

    def evaluate(self, eta_c, u_c, g=None) -> StageEvaluation:
        key = (id(eta_c), id(u_c))
        if self._cache is not None and self._cache[0] == key:
            return self._cache[1]
        ev = StageEvaluation(self, eta_c, u_c, g=g, q_guess=self._q)
        self._q = ev.q
        self._cache = (key, ev)
        self._keep = (eta_c, u_c)  # keep ids alive
        return ev

    def restore(self, g: GeometryBundle, u_c):
        """Project u onto div_A u = 0; returns (u, pre, post, iterations).

        The Picard residual ``div_A u - Delta_A phi`` is exactly the
        constraint residual of ``u - grad_A phi``, so it doubles as the
        stopping test.
        """
        lat = self.lattice
        d = g.div_A_coeffs(u_c)
        pre = _norm(d)
        if pre <= RESTORE_TRIGGER:
            return u_c, pre, pre, 0
        target = RESTORE_TOL * max(_norm(u_c), 1.0)
        phi = np.zeros(lat.shape, dtype=complex)
        r, post = d, pre
        it = 0
        while post > target:
            if it == RESTORE_MAX_ITER:
                break
            it += 1
            dphi = -lat.inv_k2 * r
            phi = phi + dphi
            r = d - g.laplacian_A_coeffs(phi)
            r[0, 0, 0] = 0.0
            post = _norm(r)
        u_new = u_c - g.grad_A_coeffs(phi)
        u_new[:, 0, 0, 0] = 0.0
        return u_new, pre, post, it

    def step(self, eta_c, u_c):
        """Advance raw coefficient arrays by one step; returns (eta, u, info)."""
        E = self.E
        info = StepInfo()
        if self.linear_only:
            eta1, u1 = E.apply(eta_c, u_c)
            self.steps_taken += 1
            return eta1, u1, info
        P1e, P1u, P2e, P2u = E.phi
        ev1 = self.evaluate(eta_c, u_c)
        N1 = ev1.N
        es, us = E.apply(eta_c, u_c)
        es = es + P1e * N1
        us = us + P1u * N1
        # linear extrapolation of the pressure to the end of the step
        guess = ev1.q if self._q_prev is None else 2.0 * ev1.q - self._q_prev
        self._q_prev = ev1.q
        ev2 = StageEvaluation(self, es, us, q_guess=guess)
        dN = ev2.N - N1
        eta1 = es + P2e * dN
        u1 = us + P2u * dN
        eta1[:, 0, 0, 0] = 0.0
        u1[:, 0, 0, 0] = 0.0
        self._q = ev2.q
        info.pressure_iters = ev1.pressure_iters + ev2.pressure_iters
        info.pressure_residual = max(ev1.pressure_residual, ev2.pressure_residual)
        info.guard_value = max(ev1.guard_value, ev2.guard_value)
        self.steps_taken += 1
        g1 = GeometryBundle(SpectralVectorField(self.lattice, eta1))
        if self.steps_taken % self.project_cadence == 0:
            u1, pre, post, rit = self.restore(g1, u1)
        else:
            pre = post = _norm(g1.div_A_coeffs(u1))
            rit = 0
        info.divA_pre, info.divA_post, info.restore_iters = pre, post, rit
        info.det_err = g1.det_err
        if post > BLOWUP:
            raise ConstraintBlowup(f"constraint blowup: ||div_A u|| = {post:.3e}")
        # prime the cache so the next step reuses this geometry
        self._cache = None
        self.evaluate(eta1, u1, g=g1)
        return eta1, u1, info


def step_nonlinear(state: FlowState, cfg: SimConfig, linear_only=False) -> FlowState:
    """One IF-RK2 step of the full system (or of its linear part)."""
    st = Stepper.from_config(cfg, linear_only=linear_only)
    eta1, u1, _ = st.step(state.eta.coeffs, state.u.coeffs)
    return FlowState.from_coeffs(state.lattice, state.t + cfg.dt, eta1, u1)


__all__ = ["Stepper", "StageEvaluation", "StepInfo", "step_nonlinear", "ConstraintBlowup", "PressureError"]
