"""State, physical parameters and run configuration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..directions import Direction, sample_direction
from ..spectral import Lattice, SpectralVectorField

MEAN_TOL = 1e-12


@dataclass(frozen=True)
class FlowState:
    """Displacement ``eta`` and velocity ``u`` at time ``t``; both mean-zero."""

    t: float
    eta: SpectralVectorField
    u: SpectralVectorField

    def __post_init__(self):
        if self.eta.lattice != self.u.lattice:
            raise ValueError("eta and u must share one lattice")
        for name, f in (("eta", self.eta), ("u", self.u)):
            scale = max(1.0, float(np.max(np.abs(f.coeffs), initial=0.0)))
            if np.max(np.abs(f.mean)) > MEAN_TOL * scale:
                raise ValueError(f"{name} must have zero mean")

    @property
    def lattice(self) -> Lattice:
        return self.eta.lattice

    @classmethod
    def rest(cls, lattice: Lattice, t: float = 0.0):
        z = SpectralVectorField.zeros(lattice)
        return cls(float(t), z, z)

    @classmethod
    def from_coeffs(cls, lattice, t, eta_c, u_c):
        eta_c = np.array(eta_c, dtype=complex)
        u_c = np.array(u_c, dtype=complex)
        eta_c[:, 0, 0, 0] = 0.0
        u_c[:, 0, 0, 0] = 0.0
        return cls(float(t), SpectralVectorField(lattice, eta_c), SpectralVectorField(lattice, u_c))


@dataclass(frozen=True)
class PhysicalParams:
    """Density, viscosity, permeability and field intensity.

    Defaults ``rho = 1`` and ``lambda_ = 4 pi`` give ``m = varpi`` and ``nu = mu``.
    """

    rho: float = 1.0
    mu: float = 1.0
    lambda_: float = 4 * math.pi
    varpi: float = 0.0

    def __post_init__(self):
        if not self.rho > 0 or self.mu < 0 or not self.lambda_ > 0 or self.varpi < 0:
            raise ValueError("need rho > 0, mu >= 0, lambda_ > 0, varpi >= 0")

    @property
    def nu(self) -> float:
        return self.mu / self.rho

    @property
    def m(self) -> float:
        return self.varpi * math.sqrt(self.lambda_ / (4 * math.pi * self.rho))

    @classmethod
    def from_normalized(cls, nu: float, m: float):
        return cls(rho=1.0, mu=nu, lambda_=4 * math.pi, varpi=m)


SCHEMES = ("if-rk2",)
INITIAL_KINDS = ("remark", "rest")


def dt_max(scheme: str, n: int, nu: float, m: float, guard: float = 0.1) -> float:
    """Heuristic explicit-stability bound for the nonlinear remainder.

    The linear part is integrated exactly.  The remainder holds
    ``nu (Delta_A - Delta)``, of size ``nu K^2 delta``, and the geometric
    part of the magnetic pressure, of size ``m K delta^(1/2)``, where
    ``K = 2 pi kmax sqrt(3)`` and ``delta`` is the gradient guard.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    K = 2 * math.pi * (n // 2 - 1) * math.sqrt(3)
    bounds = [math.inf]
    if nu > 0:
        bounds.append(2.0 / (nu * K * K * guard))
    if m > 0:
        bounds.append(2.0 / (m * K * math.sqrt(guard)))
    return min(bounds)


@dataclass(frozen=True)
class SimConfig:
    n: int = 16
    dt: float = 1e-3
    t_end: float = 5.0
    nu: float = 1.0
    m: float = 16.0
    direction: Direction = field(default_factory=lambda: sample_direction("algebraic"))
    epsilon: float = 0.05
    scheme: str = "if-rk2"
    pressure_tol: float = 1e-10
    pressure_max_iter: int = 100
    project_cadence: int = 1
    hierarchy_s: int = 2
    seed: int = 0
    initial: str = "remark"
    record_every: int = 100
    checkpoint_every: int = 0
    guard: float = 0.1
    params: PhysicalParams | None = None
    out_dir: str | None = None

    def __post_init__(self):
        Lattice(self.n)
        if self.params is not None:
            object.__setattr__(self, "nu", self.params.nu)
            object.__setattr__(self, "m", self.params.m)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.nu < 0 or self.m < 0:
            raise ValueError("nu and m must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.initial not in INITIAL_KINDS:
            raise ValueError(f"unknown initial data kind {self.initial!r}")
        if self.project_cadence < 1 or self.record_every < 1 or self.checkpoint_every < 0:
            raise ValueError("cadences must be positive")
        if self.hierarchy_s < 1:
            raise ValueError("hierarchy_s must be >= 1")
        bound = dt_max(self.scheme, self.n, self.nu, self.m, self.guard)
        if self.dt > bound:
            raise ValueError(f"dt = {self.dt} exceeds the stability bound {bound:.3e}")

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.n)

    @property
    def omega(self):
        return self.direction.vector

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def orders(self):
        return tuple(self.hierarchy_s * i for i in range(4))

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)
