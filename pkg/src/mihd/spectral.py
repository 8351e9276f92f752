"""Truncated Fourier fields on the unit torus T^3 = (R/Z)^3.

A field is stored by its complex Fourier coefficients on the wrapped
frequency lattice of an ``n x n x n`` grid, normalised so that
``coeff(0)`` is the mean of the field:

    f(y) = sum_k coeff(k) exp(2 pi i k.y)

The Nyquist planes (any frequency component equal to ``n/2``) are
always zero, so the stored index set is closed under negation and
real-valuedness is plain Hermitian symmetry.

Nonlinear terms are evaluated on a zero-padded grid of size
``M = n / dealias_fraction`` (the 3/2 rule for the default 2/3
fraction).  For two lattice fields the padded product, truncated back
to the lattice, equals the exact spectral product on every retained
mode.  Longer products are formed as nested quadratics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from ._fft import irfft3, rfft3


def _readonly(a):
    a = np.asarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=True)
class Lattice:
    """Discretisation of T^3 with ``n`` points per axis.

    ``dealias_fraction`` is the retained fraction of the padded band;
    the padded grid used for products has ``padded_n`` points per axis.
    """

    n: int
    dealias_fraction: Fraction = field(default=Fraction(2, 3))

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n <= 0 or self.n % 2:
            raise ValueError(f"grid resolution must be a positive even integer, got {self.n!r}")
        frac = Fraction(self.dealias_fraction)
        if not 0 < frac <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dealias_fraction", frac)

    # -- frequency bookkeeping -------------------------------------------
    @cached_property
    def shape(self):
        return (self.n, self.n, self.n)

    @cached_property
    def padded_n(self) -> int:
        m = math.ceil(self.n / self.dealias_fraction)
        return m + (m % 2)

    @cached_property
    def freqs(self):
        """Wrapped integer frequencies along one axis, Nyquist labelled +n/2."""
        n = self.n
        f = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)
        f[n // 2] = n // 2
        return _readonly(f)

    @cached_property
    def kvec(self):
        k1, k2, k3 = np.meshgrid(self.freqs, self.freqs, self.freqs, indexing="ij")
        return _readonly(np.stack([k1, k2, k3]))

    @cached_property
    def nyquist(self):
        return _readonly(np.any(self.kvec == self.n // 2, axis=0))

    @cached_property
    def keep(self):
        """Boolean mask of stored (non-Nyquist) modes."""
        return _readonly(~self.nyquist)

    @cached_property
    def ik(self):
        """Derivative multipliers 2 pi i k (zero on Nyquist planes)."""
        return _readonly(2j * np.pi * self.kvec * self.keep)

    @cached_property
    def k2(self):
        """|2 pi k|^2 (the symbol of -Laplacian)."""
        return _readonly((2 * np.pi) ** 2 * np.sum(self.kvec.astype(float) ** 2, axis=0))

    @cached_property
    def inv_k2(self):
        out = np.zeros(self.shape)
        nz = (self.k2 > 0) & self.keep
        out[nz] = 1.0 / self.k2[nz]
        return _readonly(out)

    @cached_property
    def kmax(self) -> int:
        return self.n // 2 - 1

    def sobolev_weight(self, s):
        return (1.0 + self.k2) ** s

    def band_mask(self, band, norm="euclid"):
        """Modes with ``0 <= |k| <= band`` (Euclidean or max norm)."""
        if norm == "euclid":
            mag = np.sqrt(np.sum(self.kvec.astype(float) ** 2, axis=0))
        else:
            mag = np.max(np.abs(self.kvec), axis=0)
        return (mag <= band) & self.keep

    def directional_symbol(self, omega):
        """2 pi i (k . omega), the multiplier of the directional derivative."""
        omega = np.asarray(omega, dtype=float)
        kw = np.tensordot(omega, self.kvec.astype(float), axes=(0, 0))
        return 2j * np.pi * kw * self.keep

    # -- index maps between the lattice and the padded half-spectrum -----
    @cached_property
    def _axis_maps(self):
        n, M = self.n, self.padded_n
        pos = np.arange(0, n // 2)
        neg = np.arange(n // 2 + 1, n)
        lat = np.concatenate([pos, neg])
        pad = np.concatenate([pos, neg - n + M])
        return lat, pad

    @cached_property
    def _neg_index(self):
        return (-np.arange(self.n)) % self.n

    # -- transforms -------------------------------------------------------
    def to_grid(self, coeffs):
        """Samples of lattice coefficients on the padded grid.

        ``coeffs`` has shape ``(..., n, n, n)``; the result is real with
        shape ``(..., M, M, M)``.
        """
        n, M = self.n, self.padded_n
        coeffs = np.asarray(coeffs)
        lead = coeffs.shape[:-3]
        lat, pad = self._axis_maps
        half = np.zeros(lead + (M, M, M // 2 + 1), dtype=complex)
        half[..., pad[:, None], pad[None, :], : n // 2] = coeffs[..., lat[:, None], lat[None, :], : n // 2]
        return irfft3(half, (M, M, M))

    def from_grid(self, samples):
        """Lattice coefficients of padded-grid samples (truncating products)."""
        n = self.n
        samples = np.asarray(samples, dtype=float)
        half = rfft3(samples)
        return self._complete(half, True)

    def _gather_plan(self, padded):
        """Flat gather indices and weights that rebuild the full lattice from a half spectrum."""
        key = "_plan_pad" if padded else "_plan_nat"
        plan = self.__dict__.get(key)
        if plan is not None:
            return plan
        n = self.n
        N = self.padded_n if padded else n
        H = N // 2 + 1
        lat, pad = self._axis_maps
        pos = np.zeros(n, dtype=np.int64)
        pos[lat] = pad if padded else lat
        neg = self._neg_index
        i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        idxA = (pos[i] * N + pos[j]) * H + np.minimum(k, H - 1)
        idxB = (pos[neg[i]] * N + pos[neg[j]]) * H + np.minimum(neg[k], H - 1)
        wA = np.where(k < n // 2, 1.0, 0.0)
        wB = np.where(k > n // 2, 1.0, 0.0)
        wA[..., 0] = 0.5
        wB[..., 0] = 0.5
        wA[self.nyquist] = 0.0
        wB[self.nyquist] = 0.0
        plan = (idxA.ravel(), idxB.ravel(), wA.ravel(), wB.ravel())
        self.__dict__[key] = plan
        return plan

    def _complete(self, half, padded):
        """Fill a full Hermitian lattice array from a half spectrum."""
        n = self.n
        lead = half.shape[:-3]
        idxA, idxB, wA, wB = self._gather_plan(padded)
        flat = half.reshape(lead + (-1,))
        out = wA * np.take(flat, idxA, axis=-1) + wB * np.conj(np.take(flat, idxB, axis=-1))
        return out.reshape(lead + (n, n, n))

    def samples_to_coeffs(self, samples):
        """Forward transform of samples on the native ``n`` grid."""
        samples = np.asarray(samples, dtype=float)
        half = rfft3(samples)
        return self._complete(half, False)

    def coeffs_to_samples(self, coeffs):
        """Inverse transform onto the native ``n`` grid."""
        coeffs = np.asarray(coeffs)
        half = np.ascontiguousarray(coeffs[..., : self.n // 2 + 1])
        return irfft3(half, self.shape)

    def grid_points(self, padded=False):
        """Physical coordinates ``(3, N, N, N)`` of the native or padded grid."""
        N = self.padded_n if padded else self.n
        x = np.arange(N) / N
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))


class SpectralField:
    """Immutable lattice coefficients with leading component axes."""

    rank = None

    def __init__(self, lattice: Lattice, coeffs):
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.shape[-3:] != lattice.shape:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match lattice n={lattice.n}")
        if self.rank is not None and coeffs.ndim != 3 + self.rank:
            raise ValueError(f"{type(self).__name__} expects rank {self.rank} coefficients")
        coeffs[..., lattice.nyquist] = 0.0
        coeffs.flags.writeable = False
        self.lattice = lattice
        self.coeffs = coeffs

    def coeff(self, k):
        k = tuple(int(c) % self.lattice.n for c in k)
        return self.coeffs[(...,) + k]

    @property
    def mean(self):
        return self.coeffs[..., 0, 0, 0]

    def samples(self, padded=False):
        if padded:
            return self.lattice.to_grid(self.coeffs)
        return self.lattice.coeffs_to_samples(self.coeffs)

    def _check(self, other):
        if other.lattice != self.lattice:
            raise ValueError("fields live on different lattices")

    def __add__(self, other):
        self._check(other)
        return type(self)(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.lattice, self.coeffs - other.coeffs)

    def __neg__(self):
        return type(self)(self.lattice, -self.coeffs)

    def __mul__(self, scalar):
        return type(self)(self.lattice, self.coeffs * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"{type(self).__name__}(n={self.lattice.n})"

    @classmethod
    def zeros(cls, lattice):
        lead = () if cls.rank in (None, 0) else (3,) * cls.rank
        return cls(lattice, np.zeros(lead + lattice.shape, dtype=complex))

    @classmethod
    def from_samples(cls, lattice, samples):
        return cls(lattice, lattice.samples_to_coeffs(samples))

    def hermitian_defect(self):
        """max |coeff(-k) - conj(coeff(k))| over the stored lattice."""
        neg = self.lattice._neg_index
        flipped = self.coeffs[..., neg[:, None, None], neg[None, :, None], neg[None, None, :]]
        return float(np.max(np.abs(flipped - np.conj(self.coeffs)), initial=0.0))


class SpectralScalarField(SpectralField):
    rank = 0


class SpectralVectorField(SpectralField):
    rank = 1

    @property
    def components(self):
        return tuple(SpectralScalarField(self.lattice, c) for c in self.coeffs)

    @classmethod
    def from_components(cls, comps):
        lattice = comps[0].lattice
        for c in comps:
            if c.lattice != lattice:
                raise ValueError("all components must share one lattice")
        return cls(lattice, np.stack([c.coeffs for c in comps]))


class SpectralTensorField(SpectralField):
    """3x3 matrix of scalar fields, ``coeffs[i, j]`` is entry (i, j)."""

    rank = 2

    def entry(self, i, j) -> SpectralScalarField:
        return SpectralScalarField(self.lattice, self.coeffs[i, j])

    def transpose(self):
        return SpectralTensorField(self.lattice, np.swapaxes(self.coeffs, 0, 1))

    @classmethod
    def identity(cls, lattice):
        c = np.zeros((3, 3) + lattice.shape, dtype=complex)
        for i in range(3):
            c[i, i, 0, 0, 0] = 1.0
        return cls(lattice, c)


# ---------------------------------------------------------------------------
# operations


def forward_transform(samples, lattice: Lattice | None = None) -> SpectralScalarField:
    """Coefficients of real samples on an ``n^3`` grid (Nyquist discarded)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or len(set(samples.shape)) != 1:
        raise ValueError("samples must be a cubic n x n x n array")
    if lattice is None:
        lattice = Lattice(samples.shape[0])
    elif lattice.shape != samples.shape:
        raise ValueError("samples do not match the lattice resolution")
    return SpectralScalarField(lattice, lattice.samples_to_coeffs(samples))


def inverse_transform(f: SpectralField):
    return f.samples()


def directional_derivative(f: SpectralField, omega) -> SpectralField:
    """d/d_omega f, multiplier 2 pi i (k . omega)."""
    sym = f.lattice.directional_symbol(omega)
    return type(f)(f.lattice, f.coeffs * sym)


def gradient(f: SpectralScalarField) -> SpectralVectorField:
    return SpectralVectorField(f.lattice, f.lattice.ik * f.coeffs[None])


def divergence(v: SpectralVectorField) -> SpectralScalarField:
    return SpectralScalarField(v.lattice, np.sum(v.lattice.ik * v.coeffs, axis=0))


def laplacian(f: SpectralField) -> SpectralField:
    return type(f)(f.lattice, -f.lattice.k2 * f.coeffs)


def sobolev_norm_sq(f: SpectralField, s) -> float:
    """Squared H^s norm, summed over all components of ``f``."""
    if s < 0:
        raise ValueError("Sobolev order must be nonnegative")
    w = f.lattice.sobolev_weight(s)
    return float(np.sum(w * (f.coeffs.real ** 2 + f.coeffs.imag ** 2)))


def sobolev_norm(f: SpectralField, s) -> float:
    """H^s norm with the multiplier (1 + |2 pi k|^2)^(s/2)."""
    return math.sqrt(sobolev_norm_sq(f, s))


def inner(f: SpectralField, g: SpectralField) -> float:
    """L^2 inner product over the unit torus (real fields)."""
    f._check(g)
    return float(np.sum((np.conj(f.coeffs) * g.coeffs).real))


def dealiased_product(f: SpectralScalarField, g: SpectralScalarField) -> SpectralScalarField:
    """Exact product of two lattice fields, truncated to the lattice."""
    f._check(g)
    lat = f.lattice
    return SpectralScalarField(lat, lat.from_grid(lat.to_grid(f.coeffs) * lat.to_grid(g.coeffs)))


class IncompatibleSourceError(ValueError):
    pass


def inverse_laplacian(f: SpectralField, tol=1e-12) -> SpectralField:
    """Mean-zero solution of Delta u = f on the torus."""
    scale = max(1.0, float(np.max(np.abs(f.coeffs), initial=0.0)))
    if np.any(np.abs(f.mean) > tol * scale):
        raise IncompatibleSourceError("incompatible source: nonzero mean")
    return type(f)(f.lattice, -f.lattice.inv_k2 * f.coeffs)


def leray_project(v: SpectralVectorField) -> SpectralVectorField:
    """Divergence-free part of ``v``; component means are untouched."""
    lat = v.lattice
    kv = lat.kvec.astype(float) * lat.keep
    kk = np.sum(kv * kv, axis=0)
    inv = np.zeros_like(kk)
    inv[kk > 0] = 1.0 / kk[kk > 0]
    kdotv = np.sum(kv * v.coeffs, axis=0)
    return SpectralVectorField(lat, v.coeffs - kv * (kdotv * inv)[None])


def random_band_limited(lattice, rng, band, amplitude=1.0, lead=(), norm="euclid", mean_zero=True):
    """Random real field with modes restricted to ``|k| <= band``.

    ``amplitude`` bounds the sup norm of each component.
    """
    shape = tuple(lead) + lattice.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c = c * lattice.band_mask(band, norm)
    if mean_zero:
        c[..., 0, 0, 0] = 0.0
    # Hermitian symmetrisation
    neg = lattice._neg_index
    c = 0.5 * (c + np.conj(c[..., neg[:, None, None], neg[None, :, None], neg[None, None, :]]))
    vals = lattice.coeffs_to_samples(c)
    peak = np.max(np.abs(vals), axis=(-3, -2, -1), keepdims=True)
    peak[peak == 0] = 1.0
    c = c * (amplitude / peak)
    cls = {0: SpectralScalarField, 1: SpectralVectorField, 2: SpectralTensorField}.get(len(lead), SpectralField)
    return cls(lattice, c)
