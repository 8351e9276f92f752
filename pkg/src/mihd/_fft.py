"""Real 3-D transforms over the last three axes with 'forward' scaling.

FFTW (through pyfftw) is used when importable, with FFTW_ESTIMATE plans
so the chosen algorithm, and hence every rounding, is reproducible.
Plans are cached per array shape.  scipy.fft is the fallback.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.fft as sfft

try:  # pragma: no cover - exercised implicitly
    import pyfftw
except ImportError:  # pragma: no cover
    pyfftw = None

THREADS = max(1, int(os.environ.get("MIHD_THREADS", "1") or 1))
BACKEND = "fftw" if pyfftw is not None else "scipy"

_AXES = (-3, -2, -1)
_r2c_plans: dict = {}
_c2r_plans: dict = {}


def rfft3(x):
    """Half-spectrum of real samples, divided by the number of grid points."""
    x = np.asarray(x, dtype=float)
    if pyfftw is None:
        return sfft.rfftn(x, axes=_AXES, norm="forward", workers=THREADS)
    plan = _r2c_plans.get(x.shape)
    if plan is None:
        tmpl = pyfftw.empty_aligned(x.shape, dtype="float64")
        plan = pyfftw.builders.rfftn(tmpl, axes=_AXES, planner_effort="FFTW_ESTIMATE",
                                     threads=THREADS, avoid_copy=False, norm="forward")
        _r2c_plans[x.shape] = plan
    return plan(x).copy()


def irfft3(h, shape):
    """Real samples on a grid of ``shape`` from a half-spectrum (no scaling)."""
    h = np.asarray(h, dtype=complex)
    if pyfftw is None:
        return sfft.irfftn(h, s=shape, axes=_AXES, norm="forward", workers=THREADS)
    key = (h.shape, tuple(shape))
    plan = _c2r_plans.get(key)
    if plan is None:
        tmpl = pyfftw.empty_aligned(h.shape, dtype="complex128")
        plan = pyfftw.builders.irfftn(tmpl, s=tuple(shape), axes=_AXES, planner_effort="FFTW_ESTIMATE",
                                      threads=THREADS, avoid_copy=False, norm="forward")
        _c2r_plans[key] = plan
    return plan(h).copy()
