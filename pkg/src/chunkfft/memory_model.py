"""On-chip memory accounting for a chunk configuration.

The model charges two in-place work buffers of ``2C`` complex samples (the
input chunk and the filter chunk; the product and inverse transform reuse
them) plus a ``C``-entry complex twiddle table, i.e. ``5C`` complex words.
Running ``B`` pairs per kernel call multiplies the work buffers by ``B``; the
twiddle table is shared.
Alternative accountings only need a different :func:`footprint`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import BudgetError, ShapeError
from .fft_core import MAX_TRANSFORM_LENGTH, is_power_of_two

BYTES_PER_COMPLEX = {"single": 8, "double": 16}

#: Largest chunk the engine runs, whatever the budget says.
MAX_CHUNK_SIZE = MAX_TRANSFORM_LENGTH // 2

#: Alveo U200 block RAM, taken as 2.8 * 10**6 bytes.
U200_BRAM_BYTES = 2_800_000

_UNITS = {"": 1, "B": 1, "K": 1e3, "M": 1e6, "G": 1e9}
_SIZE_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*([KMG]?)(I?)B?\s*$", re.IGNORECASE)


def parse_bytes(text, binary: bool = False) -> int:
    """Parse ``"2.8MB"``, ``"512KiB"``, ``"80"`` ... into a byte count.

    Decimal suffixes (KB, MB, GB) are powers of 1000 unless ``binary`` is
    set; the ``KiB``/``MiB``/``GiB`` forms are always powers of 1024.
    Fractional results are floored.
    """
    if isinstance(text, (int, float)):
        value, prefix, iec = float(text), "", ""
    else:
        m = _SIZE_RE.match(str(text))
        if m is None:
            raise ValueError(f"cannot parse byte size {text!r}")
        value, prefix, iec = float(m.group(1)), m.group(2).upper(), m.group(3)
    if prefix and (iec or binary):
        scale = 1024 ** "KMG".index(prefix) * 1024
    else:
        scale = _UNITS[prefix]
    return int(value * scale)


@dataclass(frozen=True)
class MemoryBudget:
    capacity_bytes: int

    def __post_init__(self):
        if self.capacity_bytes <= 0:
            raise BudgetError(f"capacity must be positive, got {self.capacity_bytes}")

    @classmethod
    def parse(cls, text, binary: bool = False) -> "MemoryBudget":
        return cls(parse_bytes(text, binary=binary))


U200_BUDGET = MemoryBudget(U200_BRAM_BYTES)


@dataclass(frozen=True)
class MemoryFootprint:
    chunk_size: int
    precision: str
    input_buffer_bytes: int
    filter_buffer_bytes: int
    twiddle_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.input_buffer_bytes + self.filter_buffer_bytes + self.twiddle_bytes

    def fits(self, budget: MemoryBudget) -> bool:
        return self.total_bytes <= budget.capacity_bytes


def footprint(chunk_size: int, precision: str = "single", batch: int = 1) -> MemoryFootprint:
    if not is_power_of_two(chunk_size) or chunk_size < 2:
        raise ShapeError(f"chunk size must be a power of two >= 2, got {chunk_size}")
    try:
        word = BYTES_PER_COMPLEX[precision]
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}") from None
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    work = 2 * chunk_size * word * batch
    return MemoryFootprint(
        chunk_size=int(chunk_size),
        precision=precision,
        input_buffer_bytes=work,
        filter_buffer_bytes=work,
        twiddle_bytes=chunk_size * word,
    )


def max_chunk_size(budget: MemoryBudget, precision: str = "single", clamp: int | None = MAX_CHUNK_SIZE) -> int:
    """Largest power-of-two chunk whose footprint fits ``budget``.

    The answer is capped at ``clamp`` (the engine limit) unless ``clamp`` is
    None.
    """
    if not footprint(2, precision).fits(budget):
        raise BudgetError(
            f"budget of {budget.capacity_bytes} bytes cannot hold even a 2-sample chunk "
            f"({footprint(2, precision).total_bytes} bytes)"
        )
    per_sample = footprint(2, precision).total_bytes // 2  # footprint is linear in C
    c = 1 << ((budget.capacity_bytes // per_sample).bit_length() - 1)
    if clamp is not None:
        c = min(c, clamp)
    return c


def check_chunk(chunk_size: int, budget: MemoryBudget | None, precision: str = "single",
                clamp: int | None = MAX_CHUNK_SIZE, batch: int = 1) -> MemoryFootprint:
    """Raise BudgetError unless ``chunk_size`` is within ``clamp`` and fits ``budget``."""
    fp = footprint(chunk_size, precision, batch)
    if clamp is not None and chunk_size > clamp:
        raise BudgetError(f"chunk size {chunk_size} exceeds the engine maximum {clamp}")
    if budget is not None and not fp.fits(budget):
        raise BudgetError(
            f"chunk size {chunk_size} needs {fp.total_bytes} bytes, "
            f"budget is {budget.capacity_bytes} bytes"
        )
    return fp
