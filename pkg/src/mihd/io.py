"""Binary checkpoints and atomic file output.

Layout (little endian): magic ``b"MIHD"``, u32 version (1), u32 n,
f64 t, f64 nu, f64 m, f64[3] omega, then six arrays (eta then u,
components x, y, z) of n^3 complex coefficients as interleaved f64
pairs, row-major over the wrapped frequency index (the fftn layout).
"""
from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .spectral import Lattice

MAGIC = b"MIHD"
VERSION = 1
_HEADER = struct.Struct("<4sII6d")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    n: int
    t: float
    nu: float
    m: float
    omega: tuple
    eta: np.ndarray  # (3, n, n, n) complex
    u: np.ndarray

    def state(self):
        from .evolution.state import FlowState

        return FlowState.from_coeffs(Lattice(self.n), self.t, self.eta, self.u)


def atomic_write(path, data: bytes):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def checkpoint_bytes(state, nu, m, omega) -> bytes:
    n = state.lattice.n
    omega = [float(w) for w in omega]
    head = _HEADER.pack(MAGIC, VERSION, n, float(state.t), float(nu), float(m), *omega)
    body = np.concatenate([state.eta.coeffs, state.u.coeffs]).astype("<c16", copy=False)
    return head + body.tobytes(order="C")


def write_checkpoint(path, state, nu, m, omega):
    atomic_write(path, checkpoint_bytes(state, nu, m, omega))


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CheckpointError("truncated checkpoint header")
    magic, version, n, t, nu, m, w0, w1, w2 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    count = 6 * n ** 3
    body = raw[_HEADER.size:]
    if len(body) != 16 * count:
        raise CheckpointError("checkpoint body has the wrong size")
    arr = np.frombuffer(body, dtype="<c16").astype(complex).reshape(6, n, n, n)
    return Checkpoint(n, t, nu, m, (w0, w1, w2), arr[:3].copy(), arr[3:].copy())
