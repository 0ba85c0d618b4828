"""In-place radix-2 decimation-in-time FFT.

Buffers are complex numpy arrays whose last axis has power-of-two length; a
2-D array is a batch of independent transforms, one per row.  A transform reorders the buffer by bit reversal and then runs
``log2(N)`` butterfly stages; every stage is vectorised over all butterflies
of that stage, so the working set is the buffer plus its twiddle table.

The forward transform is unnormalised and the inverse carries the ``1/N``
factor, so ``fft_inverse(fft_forward(x)) == x`` up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ShapeError

#: Largest transform the engine builds twiddle tables for (two 8,192-point chunks).
MAX_TRANSFORM_LENGTH = 16384

COMPLEX_DTYPES = {"single": np.complex64, "double": np.complex128}
REAL_DTYPES = {"single": np.float32, "double": np.float64}


def is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def complex_dtype(precision: str):
    try:
        return COMPLEX_DTYPES[precision]
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}; expected 'single' or 'double'") from None


def real_dtype(precision: str):
    try:
        return REAL_DTYPES[precision]
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}; expected 'single' or 'double'") from None


def _check_length(n: int) -> int:
    if not is_power_of_two(n):
        raise ShapeError(f"length {n} is not a power of two")
    return int(n).bit_length() - 1


@lru_cache(maxsize=32)
def _bit_reversal_indices(n: int) -> np.ndarray:
    bits = _check_length(n)
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


def bit_reverse(i: int, bits: int) -> int:
    """Reverse the lowest ``bits`` bits of ``i``."""
    out = 0
    for _ in range(bits):
        out = (out << 1) | (i & 1)
        i >>= 1
    return out


def bit_reverse_permute(buf):
    """Move element ``i`` to index ``bit_reverse(i, log2(len))``.

    Works in place when ``buf`` is a numpy array, otherwise a new array is
    returned.  The permutation is an involution.
    """
    if not isinstance(buf, np.ndarray):
        buf = np.asarray(buf)
    if buf.ndim not in (1, 2):
        raise ShapeError(f"expected a 1-D buffer or a 2-D batch, got shape {buf.shape}")
    n = buf.shape[-1]
    perm = _bit_reversal_indices(n)
    if n > 2:
        buf[...] = buf[..., perm]
    return buf


@dataclass(frozen=True, eq=False)
class TwiddleTable:
    """Roots of unity ``exp(-2j*pi*k/n)`` for ``k = 0 .. n/2 - 1``.

    The table also keeps one contiguous view per butterfly stage so the
    transform never gathers strided twiddles on the hot path.  Arrays are
    marked read-only; a table may be shared between threads.
    """

    n: int
    factors: np.ndarray
    stages: tuple

    @property
    def precision(self) -> str:
        return "single" if self.factors.dtype == np.complex64 else "double"


@lru_cache(maxsize=64)
def twiddle_table(n: int, precision: str = "single", max_length: int = MAX_TRANSFORM_LENGTH) -> TwiddleTable:
    """Build (or fetch the cached) twiddle table for length-``n`` transforms."""
    if not is_power_of_two(n) or n < 2:
        raise ShapeError(f"twiddle table length must be a power of two >= 2, got {n}")
    if n > max_length:
        raise ShapeError(f"transform length {n} exceeds the configured maximum {max_length}")
    dtype = complex_dtype(precision)
    k = np.arange(n // 2, dtype=np.float64)
    # evaluate in double and round once so single tables are correctly rounded
    factors = np.exp(-2j * np.pi * k / n).astype(dtype)
    factors[0] = 1.0
    factors.setflags(write=False)

    stages = []
    half = 1
    while half < n:
        w = np.ascontiguousarray(factors[:: n // (2 * half)][:half])
        w.setflags(write=False)
        stages.append(w)
        half *= 2
    return TwiddleTable(n=n, factors=factors, stages=tuple(stages))


def _as_buffer(buf, tw: TwiddleTable) -> np.ndarray:
    if not isinstance(buf, np.ndarray) or not np.iscomplexobj(buf):
        buf = np.array(buf, dtype=tw.factors.dtype)
    if buf.ndim not in (1, 2):
        raise ShapeError(f"expected a 1-D buffer or a 2-D batch, got shape {buf.shape}")
    if not buf.flags.c_contiguous:
        raise ShapeError("transform buffers must be contiguous")
    if buf.shape[-1] != tw.n:
        raise ShapeError(f"buffer length {buf.shape[-1]} does not match twiddle table length {tw.n}")
    return buf


# for short butterfly spans a loop over twiddle columns beats one broadcast op,
# as long as each column is a long strided run rather than a handful of samples
_COLUMN_STAGE_LIMIT = 8
_COLUMN_MIN_RUN = 128


def _butterflies(buf: np.ndarray, tw: TwiddleTable) -> None:
    bit_reverse_permute(buf)
    half = 1
    lead = buf.shape[:-1]
    for w in tw.stages:
        blocks = buf.reshape(lead + (-1, 2, half))
        if half <= _COLUMN_STAGE_LIMIT and buf.size >= 2 * half * _COLUMN_MIN_RUN:
            for k in range(half):
                top = blocks[..., 0, k]
                bottom = blocks[..., 1, k]
                t = bottom * w[k] if k else bottom.copy()
                np.subtract(top, t, out=bottom)
                top += t
        else:
            top = blocks[..., 0, :]
            bottom = blocks[..., 1, :]
            t = bottom * w
            np.subtract(top, t, out=bottom)
            top += t
        half *= 2


def fft_forward(buf, tw: TwiddleTable) -> np.ndarray:
    """Unnormalised DFT ``X[k] = sum_n x[n] exp(-2j*pi*k*n/N)``.

    A complex ndarray is transformed in place and returned; anything else is
    copied into a new buffer of the table's dtype first.
    """
    buf = _as_buffer(buf, tw)
    _butterflies(buf, tw)
    return buf


def fft_inverse(buf, tw: TwiddleTable) -> np.ndarray:
    """Normalised inverse DFT, in place.  Uses ``ifft(X) = conj(fft(conj(X))) / N``."""
    buf = _as_buffer(buf, tw)
    np.conjugate(buf, out=buf)
    _butterflies(buf, tw)
    np.conjugate(buf, out=buf)
    buf /= tw.n
    return buf


def log2_length(n: int) -> int:
    return _check_length(n)

