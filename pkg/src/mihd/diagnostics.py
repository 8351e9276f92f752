"""Energy and dissipation functionals, initial-data parameters and fits.

All graded quantities use the multiplier norm
``||f||_s^2 = sum_k (1 + |2 pi k|^2)^s |f_k|^2`` and a hierarchy of
orders ``(0, s, 2s, 3s)`` (default ``s = 2``), which stands in for the
analysis orders ``(0, 4, 8, 12)``.  The top-level functional uses base
order ``h = 4s + 1`` by default, the counterpart of 17 when ``s = 4``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralVectorField

CSV_COLUMNS = ("t", "E0", "E1", "E2", "E3", "D0", "D1", "D2", "D3", "EH",
               "det_err", "divA_res", "energy_resid", "pressure_iters")


def _weighted(lat, coeffs, s):
    w = lat.sobolev_weight(s)
    return float(np.sum(w * (coeffs.real ** 2 + coeffs.imag ** 2)))


def _grad(lat, c):
    return c[:, None] * lat.ik[None, :]


def _domega(lat, c, omega):
    return lat.directional_symbol(omega) * c


def default_h(s: int) -> int:
    return 4 * s + 1


def hierarchy(s: int):
    return tuple(s * i for i in range(4))


def energy_functional(state, m, i, omega) -> float:
    """||grad eta||_i^2 + ||u||_i^2 + m^2 ||d_omega eta||_i^2."""
    lat = state.lattice
    e = state.eta.coeffs
    return (_weighted(lat, _grad(lat, e), i) + _weighted(lat, state.u.coeffs, i)
            + m * m * _weighted(lat, _domega(lat, e, omega), i))


def dissipation_functional(state, m, i, omega) -> float:
    """||grad u||_i^2 + m^2 ||d_omega eta||_i^2."""
    lat = state.lattice
    return (_weighted(lat, _grad(lat, state.u.coeffs), i)
            + m * m * _weighted(lat, _domega(lat, state.eta.coeffs, omega), i))


def highest_energy_analog(state, m, h, omega) -> float:
    """E_{h-1} + ||eta||_{h+1}^2 + m^(-2/3) ||(u, m d_omega eta)||_h^2."""
    if h < 1:
        raise ValueError("base order h must be >= 1")
    if not m > 0:
        raise ValueError("m must be positive")
    lat = state.lattice
    weighted = (_weighted(lat, state.u.coeffs, h)
                + m * m * _weighted(lat, _domega(lat, state.eta.coeffs, omega), h))
    return (energy_functional(state, m, h - 1, omega) + _weighted(lat, state.eta.coeffs, h + 1)
            + m ** (-2.0 / 3.0) * weighted)


@dataclass
class EnergyReport:
    t: float
    orders: tuple
    E: dict
    D: dict
    E_H_analog: float
    det_err: float
    divA_res: float
    h: int = 0

    def as_dict(self):
        return {"t": self.t, "orders": list(self.orders), "h": self.h,
                "E": {str(k): v for k, v in self.E.items()},
                "D": {str(k): v for k, v in self.D.items()},
                "E_H_analog": self.E_H_analog, "det_err": self.det_err, "divA_res": self.divA_res}


def energy_report(state, m, omega, s=2, h=None, geometry=None) -> EnergyReport:
    from .geometry import build_geometry

    orders = hierarchy(s)
    h = default_h(s) if h is None else h
    g = geometry if geometry is not None else build_geometry(state.eta)
    divA = g.div_A_coeffs(state.u.coeffs)
    return EnergyReport(
        t=float(state.t), orders=orders,
        E={o: energy_functional(state, m, o, omega) for o in orders},
        D={o: dissipation_functional(state, m, o, omega) for o in orders},
        E_H_analog=highest_energy_analog(state, m, h, omega) if m > 0 else math.inf,
        det_err=g.det_err, divA_res=float(np.sqrt(np.sum(np.abs(divA) ** 2))), h=h)


@dataclass
class InitialParams:
    Xi: float
    vartheta: float
    mhd_condition_lhs: float
    orders: tuple = ()
    h: int = 0
    E_H: float = 0.0
    order_map: dict = field(default_factory=dict)


def initial_params(state0, m, orders, omega, h=None, c1=4.0, c2=1.0) -> InitialParams:
    """Xi, vartheta and the strong-field condition at the configured orders.

    ``orders = (0, s, 2s, 3s)``; the analysis indices (12, 4, 6) of the
    vartheta formula become ``(3s, s, ceil(3s/2))``.
    """
    orders = tuple(int(o) for o in orders)
    if len(orders) != 4 or any(b <= a for a, b in zip(orders, orders[1:])):
        raise ValueError("orders must be four ascending integers")
    if not m > 0:
        raise ValueError("m must be positive")
    s = orders[1]
    top, mid = orders[3], math.ceil(3 * s / 2)
    h = default_h(s) if h is None else h
    E = {o: energy_functional(state0, m, o, omega) for o in set(orders) | {mid}}
    w = 1.0 + m ** -2
    Xi = sum(w ** i * E[o] for i, o in enumerate(orders))
    vartheta = E[top] ** 0.125 * (1 + E[s] ** 1.5) * Xi ** 0.375 + E[mid] + E[mid] ** 2
    EH = highest_energy_analog(state0, m, h, omega)
    # exp(c2 vartheta) overflows for moderate data; the condition then reads +inf
    logx = math.log(c1 * EH) + c2 * vartheta if EH > 0 else -math.inf
    x = math.exp(logx) if logx < 700 else math.inf
    lhs = max(math.sqrt(x), x) / m
    omap = {"12": top, "4": s, "6": mid, "4i": list(orders), "17": h}
    return InitialParams(Xi, vartheta, lhs, orders, h, EH, omap)


# -- energy law --------------------------------------------------------------


def cumulative_trapezoid(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def energy_law_residual(log, nu) -> np.ndarray:
    """|LHS(t) - LHS(0)| / LHS(0) with LHS = ||u||^2 + m^2 ||d_omega eta||^2 + 2 nu int ||grad_A u||^2.

    When LHS(0) = 0 the absolute residual is returned.
    """
    t = np.asarray(log.times)
    lhs = np.asarray(log.kinetic) + np.asarray(log.magnetic) + 2 * nu * cumulative_trapezoid(t, log.dissipation)
    ref = lhs[0]
    res = np.abs(lhs - ref)
    return res / ref if ref > 0 else res


def residual_rate(t, residual, pointwise=False) -> float:
    """Residual per unit time: max residual over the run divided by its duration.

    With ``pointwise`` the stricter max over t > 0 of residual(t) / t is
    returned instead; it is dominated by the quadrature error of the first
    steps and is reported for information only.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(residual, dtype=float)
    if len(t) < 2 or t[-1] <= t[0]:
        return 0.0
    if pointwise:
        sel = t > t[0]
        return float(np.max(r[sel] / (t[sel] - t[0])))
    return float(np.max(r) / (t[-1] - t[0]))


# -- decay --------------------------------------------------------------------


@dataclass
class DecayFit:
    slope: float
    intercept: float
    max_ratio: float
    t_at_max: float
    excluded: int

    def __iter__(self):
        return iter((self.slope, self.max_ratio))


def decay_fit(series, window=(0.0, math.inf), i=0, Xi=1.0) -> DecayFit:
    """Least-squares slope of log E against log <t> on the window, and max <t>^(3-i) E / Xi."""
    t = np.asarray([p[0] for p in series], dtype=float)
    E = np.asarray([p[1] for p in series], dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    pos = sel & (E > 0)
    excluded = int(np.sum(sel & ~pos))
    tt, EE = t[pos], E[pos]
    if len(tt) >= 2:
        x = np.log(tt + 1.0)
        y = np.log(EE)
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope, intercept = math.nan, math.nan
    if len(tt):
        ratio = (tt + 1.0) ** (3 - i) * EE / Xi
        j = int(np.argmax(ratio))
        mr, tm = float(ratio[j]), float(tt[j])
    else:
        mr, tm = math.nan, math.nan
    return DecayFit(float(slope), float(intercept), mr, tm, excluded)


def loglog_slope(x, y):
    """Least-squares slope and intercept of log y against log x."""
    slope, intercept = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope), float(intercept)


# -- errors -------------------------------------------------------------------


def error_energy(a, b, m, i, omega) -> float:
    """||(grad eta^d, u^d, m d_omega eta^d)||_i^2 for the difference of two states."""
    lat = a.lattice
    from .evolution.state import FlowState

    d = FlowState(a.t, SpectralVectorField(lat, a.eta.coeffs - b.eta.coeffs),
                  SpectralVectorField(lat, a.u.coeffs - b.u.coeffs))
    return energy_functional(d, m, i, omega)


@dataclass
class ErrorReport:
    m_values: list
    orders: tuple
    times: dict  # m -> list of t
    series: dict  # m -> {order: list of E^d}
    sup_norms: dict  # m -> sup_t (E^d_top)^(1/2)
    slope: float
    intercept: float
    top_order: int = 0

    def recompute_slope(self):
        return loglog_slope(self.m_values, [self.sup_norms[m] for m in self.m_values])

    def as_dict(self):
        return {"m_values": list(self.m_values), "orders": list(self.orders), "top_order": self.top_order,
                "sup_norms": {repr(float(m)): v for m, v in self.sup_norms.items()},
                "slope": self.slope, "intercept": self.intercept,
                "series": {repr(float(m)): {"t": self.times[m], **{str(o): s for o, s in self.series[m].items()}}
                           for m in self.m_values}}


# -- CSV ----------------------------------------------------------------------


def format_float(x) -> str:
    """Shortest round-trip decimal."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_text(records) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in records:
        buf.write(",".join(format_float(v) for v in r.row()) + "\n")
    return buf.getvalue()
