"""Global floating-point precision switch.

fp64 is the default; fp32 can be selected for whole runs. The switch only
affects newly created parameters and noise draws -- existing arrays keep
their dtype.
"""

import numpy as np

_DTYPE = np.float64


def set_dtype(dtype) -> None:
    """Select the working precision ("fp64"/"fp32" or a numpy float dtype)."""
    global _DTYPE
    if isinstance(dtype, str):
        dtype = {"fp64": np.float64, "fp32": np.float32}.get(dtype.lower())
        if dtype is None:
            raise ValueError("precision must be 'fp64' or 'fp32'")
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported precision {dtype}")
    _DTYPE = dtype.type


def get_dtype():
    return _DTYPE
