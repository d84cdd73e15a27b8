"""Hot numeric kernels with numba and pure-numpy twins.

The batched radix-2 transform dominates featurization time, so it carries
a numba @njit implementation next to a vectorized numpy fallback. The
fallback is selected when numba is unavailable or when the environment
variable BIRDSONG_DISABLE_NUMBA is set to a non-empty value other than 0.
Both paths compute the same decimation-in-time butterfly schedule.
"""

from __future__ import annotations

import math
import os
from functools import lru_cache

import numpy as np

_DISABLE_FLAG = "BIRDSONG_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_DISABLE_FLAG, "").strip() in ("", "0")


@lru_cache(maxsize=16)
def bit_reverse_indices(n: int) -> np.ndarray:
    """Bit-reversal permutation for a power-of-two length n (read-only)."""
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (bits - 1))
    rev.setflags(write=False)
    return rev


def fft_batch_numpy(x: np.ndarray) -> np.ndarray:
    """Radix-2 DIT transform of each row of x (complex128, width power of 2)."""
    _, n = x.shape
    out = np.ascontiguousarray(x[:, bit_reverse_indices(n)], dtype=np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        grouped = out.reshape(out.shape[0], n // size, size)
        upper = grouped[:, :, :half]
        lower = grouped[:, :, half:] * twiddle
        grouped[:, :, half:] = upper - lower
        upper += lower
        size *= 2
    return out


def _fft_batch_loops(out: np.ndarray) -> None:
    """Butterfly stages over a bit-reversed batch, in place (numba target)."""
    rows, n = out.shape
    size = 2
    while size <= n:
        half = size // 2
        for j in range(half):
            angle = -2.0 * math.pi * j / size
            w = complex(math.cos(angle), math.sin(angle))
            for r in range(rows):
                for start in range(0, n, size):
                    a = start + j
                    b = a + half
                    u = out[r, a]
                    v = out[r, b] * w
                    out[r, a] = u + v
                    out[r, b] = u - v
        size *= 2


try:  # pragma: no cover - exercised indirectly via backend selection
    if _numba_requested():
        from numba import njit

        _fft_butterflies_numba = njit(cache=True)(_fft_batch_loops)
    else:
        _fft_butterflies_numba = None
except ImportError:  # pragma: no cover
    _fft_butterflies_numba = None


def fft_batch_numba(x: np.ndarray) -> np.ndarray:
    if _fft_butterflies_numba is None:
        raise RuntimeError("numba backend not available")
    _, n = x.shape
    out = np.ascontiguousarray(x[:, bit_reverse_indices(n)], dtype=np.complex128)
    _fft_butterflies_numba(out)
    return out


if _fft_butterflies_numba is not None:
    fft_batch = fft_batch_numba
    BACKEND = "numba"
else:
    fft_batch = fft_batch_numpy
    BACKEND = "numpy"


def backend_name() -> str:
    """Which kernel path is active: "numba" or "numpy"."""
    return BACKEND
