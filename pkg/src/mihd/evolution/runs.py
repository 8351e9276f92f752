"""Run drivers: single trajectories and nonlinear-vs-linear sweeps."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .. import diagnostics as dg
from ..geometry import GeometryBundle
from ..io import write_checkpoint
from .initial import linearized_initial_data, make_initial_data
from .linear import evolve_linear
from .state import FlowState, SimConfig
from .stepper import Stepper


@dataclass
class DiagnosticsRecord:
    t: float
    E: tuple
    D: tuple
    EH: float
    det_err: float
    divA_res: float
    energy_resid: float
    pressure_iters: int

    def row(self):
        return (self.t, *self.E, *self.D, self.EH, self.det_err, self.divA_res,
                self.energy_resid, self.pressure_iters)


@dataclass
class TrajectoryLog:
    """Per-step energy samples plus cadence records."""

    cfg: SimConfig
    times: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    magnetic: list = field(default_factory=list)
    dissipation: list = field(default_factory=list)
    det_err: list = field(default_factory=list)
    divA_res: list = field(default_factory=list)
    pressure_iters: list = field(default_factory=list)
    guard: list = field(default_factory=list)
    records: list = field(default_factory=list)
    states: dict = field(default_factory=dict)
    final_state: FlowState | None = None
    checkpoints: list = field(default_factory=list)
    linear_only: bool = False

    def csv(self) -> str:
        return dg.csv_text(self.records)

    def energy_residual(self):
        return dg.energy_law_residual(self, self.cfg.nu)

    def series(self, column):
        idx = dg.CSV_COLUMNS.index(column)
        return [(r.t, r.row()[idx]) for r in self.records]


def _energies(eta_c, u_c, lat, m, omega):
    du = float(np.sum(u_c.real ** 2 + u_c.imag ** 2))
    de = lat.directional_symbol(omega) * eta_c
    return du, m * m * float(np.sum(de.real ** 2 + de.imag ** 2))


def _plain_grad_sq(lat, u_c):
    g = u_c[:, None] * lat.ik[None, :]
    return float(np.sum(g.real ** 2 + g.imag ** 2))


def run_simulation(cfg: SimConfig, out_dir=None, linear_only=False, initial: FlowState | None = None,
                   keep_states=False, progress=None) -> TrajectoryLog:
    """Step from the initial data to ``t_end``; deterministic for a fixed cfg.

    ``keep_states`` stores the state at every record time.  With
    ``out_dir`` set, checkpoints are written every ``checkpoint_every``
    steps and at the end; on a stepper failure the last good state is
    written to ``failed.ckpt`` before the error propagates.
    """
    lat = cfg.lattice
    omega = cfg.omega
    m, nu = cfg.m, cfg.nu
    state = make_initial_data(cfg) if initial is None else initial
    log = TrajectoryLog(cfg=cfg, linear_only=linear_only)
    stepper = Stepper.from_config(cfg, linear_only=linear_only)
    eta, u = state.eta.coeffs, state.u.coeffs
    t0 = state.t
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    int_acc = 0.0
    lhs0 = None

    def sample(step, t, eta, u, info_iters, det_err, divA, dissip=None):
        nonlocal int_acc, lhs0
        kin, mag = _energies(eta, u, lat, m, omega)
        if dissip is None:
            dissip = _plain_grad_sq(lat, u)
        if log.times:
            int_acc += 0.5 * (dissip + log.dissipation[-1]) * (t - log.times[-1])
        lhs = kin + mag + 2 * nu * int_acc
        if lhs0 is None:
            lhs0 = lhs
        resid = abs(lhs - lhs0) / lhs0 if lhs0 > 0 else abs(lhs - lhs0)
        log.times.append(t)
        log.kinetic.append(kin)
        log.magnetic.append(mag)
        log.dissipation.append(dissip)
        log.det_err.append(det_err)
        log.divA_res.append(divA)
        log.pressure_iters.append(info_iters)
        last = step == cfg.n_steps
        if step % cfg.record_every == 0 or last:
            st = FlowState.from_coeffs(lat, t, eta, u)
            E = tuple(dg.energy_functional(st, m, o, omega) for o in cfg.orders)
            D = tuple(dg.dissipation_functional(st, m, o, omega) for o in cfg.orders)
            EH = dg.highest_energy_analog(st, m, dg.default_h(cfg.hierarchy_s), omega) if m > 0 else math.inf
            log.records.append(DiagnosticsRecord(t, E, D, EH, det_err, divA, resid, info_iters))
            if keep_states:
                log.states[t] = st
        return resid

    def checkpoint(name, t, eta, u):
        if out_dir is None:
            return
        path = os.path.join(out_dir, name)
        write_checkpoint(path, FlowState.from_coeffs(lat, t, eta, u), nu, m, omega)
        log.checkpoints.append(path)

    good = (t0, eta, u)
    try:
        # t = 0 sample
        if linear_only:
            g0 = GeometryBundle(state.eta)
            sample(0, t0, eta, u, 0, g0.det_err, _div_norm(lat, u))
        else:
            ev = stepper.evaluate(eta, u)
            divA0 = float(np.sqrt(np.sum(np.abs(ev.g.div_A_coeffs(u)) ** 2)))
            sample(0, t0, eta, u, ev.pressure_iters, ev.g.det_err, divA0, dissip=ev.gradA_u_sq)
            log.guard.append(ev.guard_value)
        for step in range(1, cfg.n_steps + 1):
            eta, u, info = stepper.step(eta, u)
            t = t0 + step * cfg.dt
            if linear_only:
                sample(step, t, eta, u, 0, 0.0, _div_norm(lat, u))
            else:
                ev = stepper.evaluate(eta, u)
                sample(step, t, eta, u, info.pressure_iters, info.det_err, info.divA_post,
                       dissip=ev.gradA_u_sq)
                log.guard.append(info.guard_value)
            good = (t, eta, u)
            if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                checkpoint(f"step{step:08d}.ckpt", t, eta, u)
            if progress is not None:
                progress(step, t)
    except Exception:
        checkpoint("failed.ckpt", *good)
        raise
    log.final_state = FlowState.from_coeffs(lat, good[0], good[1], good[2])
    checkpoint("final.ckpt", *good)
    return log


def _div_norm(lat, u):
    d = np.sum(lat.ik * u, axis=0)
    return float(np.sqrt(np.sum(np.abs(d) ** 2)))


@dataclass
class LinearComparison:
    """Nonlinear states, closed-form linear states and their errors at record times."""

    cfg: SimConfig
    times: list
    nonlinear: list
    linear: list
    log: TrajectoryLog

    def error_series(self, order):
        omega, m = self.cfg.omega, self.cfg.m
        return [dg.error_energy(a, b, m, order, omega) for a, b in zip(self.nonlinear, self.linear)]

    def csv(self) -> str:
        omega, m, orders = self.cfg.omega, self.cfg.m, self.cfg.orders
        cols = ["t"] + [f"E{j}_nl" for j in range(4)] + [f"E{j}_lin" for j in range(4)] + [f"Ed{j}" for j in range(4)]
        rows = []
        for t, a, b in zip(self.times, self.nonlinear, self.linear):
            rows.append([t] + [dg.energy_functional(a, m, o, omega) for o in orders]
                        + [dg.energy_functional(b, m, o, omega) for o in orders]
                        + [dg.error_energy(a, b, m, o, omega) for o in orders])
        return ",".join(cols) + "\n" + "".join(",".join(dg.format_float(v) for v in r) + "\n" for r in rows)


def compare_linear(cfg: SimConfig, linear_only=False) -> LinearComparison:
    """Evolve the nonlinear system and its linearization from corrected data.

    The linear solution starts from the Stokes-corrected data and is
    evaluated in closed form at every record time.  With ``linear_only``
    the stepped run also starts from the corrected data, so both sides
    solve the same problem.
    """
    s0 = make_initial_data(cfg)
    lin0 = linearized_initial_data(s0) if cfg.initial != "rest" else s0
    start = lin0 if linear_only else s0
    log = run_simulation(cfg, linear_only=linear_only, initial=start, keep_states=True)
    times = list(log.states)
    nl = [log.states[t] for t in times]
    lin = [evolve_linear(lin0, cfg.omega, cfg.nu, cfg.m, t - lin0.t) for t in times]
    return LinearComparison(cfg, times, nl, lin, log)


def run_error_experiment(cfg: SimConfig, m_list, linear_only=False) -> dg.ErrorReport:
    """Sweep m; sup-in-time error norm at the top order and its log-log slope in m."""
    orders = cfg.orders
    top = orders[-1]
    times, series, sups = {}, {}, {}
    ms = [float(m) for m in m_list]
    if not ms or any(not m > 0 for m in ms):
        raise ValueError("m_list must hold positive values")
    for m in ms:
        cmp = compare_linear(cfg.with_(m=m), linear_only=linear_only)
        times[m] = cmp.times
        series[m] = {o: cmp.error_series(o) for o in orders}
        sups[m] = math.sqrt(max(series[m][top]))
    if len(ms) >= 2 and all(sups[m] > 0 for m in ms):
        slope, intercept = dg.loglog_slope(ms, [sups[m] for m in ms])
    else:
        slope, intercept = math.nan, math.nan
    return dg.ErrorReport(ms, orders, times, series, sups, slope, intercept, top)
