"""Diophantine directions: certification over finite lattice balls.

A unit vector omega satisfies the condition with exponent tau when

    |chi . omega| >= c |chi|^(-tau)   for all nonzero integer chi.

Only finite truncations ``|chi| <= X`` can be checked; every result
carries ``(tau, X, c_est)``.  Dot products are evaluated with a
compensated (twice working precision) algorithm so tiny values of
``chi . omega`` are resolved reliably.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ALGEBRAIC = (1.0, 2.0 ** (1.0 / 3.0), 2.0 ** (2.0 / 3.0))
_SPLIT = 134217729.0  # 2**27 + 1


class CertificationError(Exception):
    """A lattice vector orthogonal (to working precision) to omega was found."""

    def __init__(self, message, witness=None, direction=None):
        super().__init__(message)
        self.witness = witness
        self.direction = direction


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


def compensated_dot(chi, omega):
    """Row-wise chi . omega in twice working precision (Ogita-Rump-Oishi Dot2)."""
    chi = np.asarray(chi, dtype=float)
    omega = np.asarray(omega, dtype=float)
    p, s = _two_prod(chi[..., 0], omega[0])
    for j in (1, 2):
        h, r = _two_prod(chi[..., j], omega[j])
        p, q = _two_sum(p, h)
        s = s + (q + r)
    return p + s


def ball_half_space(X: int):
    """Integer vectors with 0 < |chi| <= X whose first nonzero entry is positive."""
    r = np.arange(-X, X + 1)
    c = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    n2 = np.sum(c * c, axis=1)
    first = np.where(c[:, 0] != 0, c[:, 0], np.where(c[:, 1] != 0, c[:, 1], c[:, 2]))
    sel = (n2 > 0) & (n2 <= X * X) & (first > 0)
    return c[sel]


def _orthogonal_tol(chi, omega):
    return 4.0 * np.finfo(float).eps * np.sqrt(np.sum(chi.astype(float) ** 2, axis=-1)) * np.linalg.norm(omega)


def _pick_witness(chi):
    """Smallest |chi|, ties broken in favour of vectors supported on leading axes."""
    a = np.abs(chi)
    order = np.lexsort((-chi[:, 2], -chi[:, 1], -chi[:, 0], a[:, 0], a[:, 1], a[:, 2], np.sum(chi * chi, axis=1)))
    return tuple(int(v) for v in chi[order[0]])


@dataclass(frozen=True)
class Direction:
    omega: tuple
    tau: float = 3.0
    truncation_X: int = 64
    c_est: float = 0.0
    provenance: str = "user"
    witness: tuple | None = None
    notes: tuple = field(default=())

    @property
    def certified(self) -> bool:
        return self.c_est > 0

    @property
    def vector(self):
        return np.array(self.omega, dtype=float)

    def recompute(self, X=None, tau=None):
        return certify_direction(self.omega, self.tau if tau is None else tau,
                                 self.truncation_X if X is None else X, provenance=self.provenance)

    def as_dict(self):
        d = {"omega": list(self.omega), "tau": self.tau, "X": self.truncation_X,
             "c_est": self.c_est, "provenance": self.provenance, "certified": self.certified}
        if self.witness is not None:
            d["witness_chi"] = list(self.witness)
        return d


def normalize(omega):
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (3,):
        raise ValueError("omega must be a 3-vector")
    nrm = np.linalg.norm(omega)
    if not nrm > 0:
        raise ValueError("omega must be nonzero")
    return omega / nrm


def certify_direction(omega, tau: float = 3.0, X: int = 64, provenance: str = "user") -> Direction:
    """Empirical Diophantine constant min |chi.omega| |chi|^tau over 0 < |chi| <= X.

    A result with ``c_est == 0`` is a certification failure; ``witness``
    then holds a lattice vector orthogonal to omega.  Otherwise
    ``witness`` is the minimising vector.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (3,) or abs(np.linalg.norm(omega) - 1.0) > 1e-12:
        raise ValueError("omega must be a unit 3-vector (to 1e-12)")
    X = int(X)
    if X < 1:
        raise ValueError("truncation X must be a positive integer")
    chi = ball_half_space(X)
    dots = np.abs(compensated_dot(chi, omega))
    zero = dots <= _orthogonal_tol(chi, omega)
    omega_t = tuple(float(w) for w in omega)
    if np.any(zero):
        return Direction(omega_t, float(tau), X, 0.0, provenance, _pick_witness(chi[zero]))
    norms = np.sqrt(np.sum(chi.astype(float) ** 2, axis=1))
    vals = dots * norms ** tau
    j = int(np.argmin(vals))
    return Direction(omega_t, float(tau), X, float(vals[j]), provenance, tuple(int(v) for v in chi[j]))


def sample_direction(kind: str = "algebraic", seed: int = 0, X: int = 64, tau: float = 3.0,
                     max_resamples: int = 16) -> Direction:
    """Draw a candidate direction and certify it at (tau, X)."""
    if kind == "algebraic":
        return certify_direction(normalize(ALGEBRAIC), tau, X, provenance="algebraic")
    if kind != "random":
        raise ValueError(f"unknown direction kind {kind!r}")
    rng = np.random.default_rng(seed)
    d = None
    for _ in range(max_resamples + 1):
        v = rng.standard_normal(3)
        d = certify_direction(normalize(v), tau, X, provenance="random")
        if d.certified:
            return d
    raise CertificationError(f"no certified random direction after {max_resamples} resamples",
                             witness=d.witness, direction=d)


def mode_ratio(k, omega, i):
    """||f||_i / ||d_omega f||_{i+3} for the single mode exp(2 pi i k.y)."""
    k = np.asarray(k, dtype=float)
    w = 1.0 + (2 * np.pi) ** 2 * np.sum(k * k, axis=-1)
    kw = 2 * np.pi * compensated_dot(k, omega)
    with np.errstate(divide="ignore"):
        return np.sqrt(w ** i / (kw * kw * w ** (i + 3)))


def poincare_constant(direction: Direction, i: int, band: int) -> float:
    """Sharp constant of ||f||_i <= C ||d_omega f||_{i+3} over modes 0 < |k| <= band."""
    if band > direction.truncation_X:
        raise ValueError("band exceeds the certification truncation")
    omega = direction.vector
    chi = ball_half_space(int(band))
    dots = np.abs(compensated_dot(chi, omega))
    zero = dots <= _orthogonal_tol(chi, omega)
    if np.any(zero):
        w = _pick_witness(chi[zero])
        raise CertificationError(f"mode {w} is orthogonal to omega: infinite constant", witness=w,
                                 direction=direction)
    return float(np.max(mode_ratio(chi, omega, i)))


def omega_from_text(text: str):
    """Parse ``"algebraic"`` or three numbers; returns (unit vector, was_normalized)."""
    text = text.strip()
    if text == "algebraic":
        return normalize(ALGEBRAIC), False
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise ValueError("omega must be 'algebraic' or three numbers")
    v = np.array([float(p) for p in parts])
    nrm = np.linalg.norm(v)
    changed = not math.isclose(nrm, 1.0, rel_tol=0, abs_tol=1e-12)
    return normalize(v), changed
