"""Flat binary parameter container.

Layout (little-endian throughout):
  magic   4 bytes  b"DMDL"
  version u32      currently 1
  prec    u8       0 = float64, 1 = float32
  count   u32      number of arrays
  table   per array: ndim u32, then ndim dims as u32
  data    raw array bytes in declaration order

The network structure is recovered from the shape table alone, so a file is
self-describing for any NetConfig produced by init_params.
"""

import struct
from pathlib import Path

import numpy as np

from .net import NetConfig, NetParams

MAGIC = b"DMDL"
VERSION = 1
_PREC = {np.dtype(np.float64): 0, np.dtype(np.float32): 1}
_PREC_INV = {0: np.dtype("<f8"), 1: np.dtype("<f4")}


def save_params(params: NetParams, path) -> None:
    arrays = params.arrays()
    dtypes = {a.dtype for a in arrays}
    if len(dtypes) != 1:
        raise ValueError("mixed-precision parameter sets cannot be saved")
    prec = _PREC.get(dtypes.pop())
    if prec is None:
        raise ValueError("only float64/float32 parameters are supported")
    out = [MAGIC, struct.pack("<IBI", VERSION, prec, len(arrays))]
    for a in arrays:
        out.append(struct.pack("<I", a.ndim))
        out.append(struct.pack(f"<{a.ndim}I", *a.shape))
    for a in arrays:
        out.append(np.ascontiguousarray(a, dtype=_PREC_INV[prec]).tobytes())
    Path(path).write_bytes(b"".join(out))


def load_params(path) -> NetParams:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not a DMDL checkpoint")
    version, prec, count = struct.unpack_from("<IBI", buf, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    dtype = _PREC_INV.get(prec)
    if dtype is None:
        raise ValueError(f"{path}: unknown precision flag {prec}")
    off = 4 + struct.calcsize("<IBI")
    shapes = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", buf, off)
        off += 4
        dims = struct.unpack_from(f"<{ndim}I", buf, off)
        off += 4 * ndim
        shapes.append(tuple(int(d) for d in dims))
    arrays = []
    for shape in shapes:
        n = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(buf, dtype=dtype, count=n, offset=off).reshape(shape).copy()
        off += n * dtype.itemsize
        arrays.append(a)
    if off != len(buf):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return _rebuild(arrays)


def _rebuild(arrays) -> NetParams:
    # Declaration order: weights, biases, cond_embed, time_freqs, time_w, time_b.
    if len(arrays) < 6 or (len(arrays) - 4) % 2 != 0:
        raise ValueError("malformed checkpoint array table")
    n_layers = (len(arrays) - 4) // 2
    weights = arrays[:n_layers]
    biases = arrays[n_layers:2 * n_layers]
    cond_embed, time_freqs, time_w, time_b = arrays[2 * n_layers:]
    n_freq = time_freqs.shape[0]
    temb_dim = time_w.shape[1]
    cond_dim = cond_embed.shape[1]
    dim = weights[0].shape[0] - temb_dim - cond_dim
    config = NetConfig(
        dim=dim,
        n_labels=cond_embed.shape[0] - 1,
        hidden=weights[0].shape[1],
        n_hidden=n_layers - 1,
        out_dim=weights[-1].shape[1],
        cond_dim=cond_dim,
        temb_dim=temb_dim,
        n_freq=n_freq,
    )
    return NetParams(config, list(weights), list(biases), cond_embed,
                     time_freqs, time_w, time_b)
