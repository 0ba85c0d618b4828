"""Genomic input, seeded filters and the CFFT sample file format.

CFFT layout (all little-endian)::

    offset  size  field
    0       4     magic  b"CFFT"
    4       2     version (u16, currently 1)
    6       2     precision (u16: 1 = float32, 2 = float64)
    8       8     length (u64, sample count)
    16      ...   raw samples

Filters come from SplitMix64 (64-bit state, increment 0x9E3779B97F4A7C15,
multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB), which is defined
entirely by integer arithmetic and so reproduces bit for bit everywhere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    FastaFormatError,
    FormatError,
    RegionError,
    ShapeError,
    TruncatedPayloadError,
    VersionMismatchError,
)

ENCODINGS = {
    "ordinal": {"A": 1.0, "C": 2.0, "G": 3.0, "T": 4.0},
    "centered": {"A": -1.5, "C": -0.5, "G": 0.5, "T": 1.5},
}

# IUPAC nucleotide codes plus gap
IUPAC = frozenset("ACGTURYSWKMBDHVN-")

MAGIC = b"CFFT"
VERSION = 1
HEADER = struct.Struct("<4sHHQ")
PRECISION_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _lookup_table(encoding: str) -> np.ndarray:
    try:
        mapping = ENCODINGS[encoding]
    except KeyError:
        raise ValueError(f"unknown encoding {encoding!r}; choose from {sorted(ENCODINGS)}") from None
    table = np.zeros(256, dtype=np.float64)
    for base, value in mapping.items():
        table[ord(base)] = value
        table[ord(base.lower())] = value
    return table


def encode_nucleotides(chars, encoding: str = "ordinal", return_unknown: bool = False):
    """Map bases to reals (A, C, G, T case-insensitively; anything else to 0).

    With ``return_unknown`` the number of characters outside ACGT is
    returned alongside the samples.
    """
    if isinstance(chars, str):
        chars = chars.encode("ascii", errors="replace")
    codes = np.frombuffer(bytes(chars), dtype=np.uint8)
    table = _lookup_table(encoding)
    samples = table[codes]
    if return_unknown:
        known = np.zeros(256, dtype=bool)
        for base in "ACGTacgt":
            known[ord(base)] = True
        return samples, int(np.count_nonzero(~known[codes]))
    return samples


@dataclass
class EncodedSequence:
    samples: np.ndarray
    source: str
    encoding: str = "ordinal"
    unknown_count: int = 0

    def __post_init__(self):
        if len(self.samples) == 0:
            raise ShapeError(f"sequence from {self.source} is empty")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")

    def __len__(self):
        return len(self.samples)


def _read_record(path: Path, record: str | None, stop_after: int | None) -> tuple[str, bytes]:
    name = None
    parts = []
    have = 0
    found = False
    seen_header = False
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith(b";"):
                continue
            if line.startswith(b">"):
                seen_header = True
                if found:
                    break
                header = line[1:].decode("ascii", errors="replace").strip()
                label = header.split()[0] if header else ""
                if record is None or label == record:
                    name, found = label, True
                continue
            if not seen_header:
                raise FastaFormatError(f"{path}:{lineno}: sequence data before the first '>' header")
            if not found:
                continue
            bad = set(line.upper().decode("ascii", errors="replace")) - IUPAC
            if bad:
                raise FastaFormatError(f"{path}:{lineno}: illegal sequence characters {sorted(bad)}")
            parts.append(line)
            have += len(line)
            if stop_after is not None and have >= stop_after:
                break
    if not found:
        if record is None:
            raise FastaFormatError(f"{path}: no FASTA records found")
        raise FastaFormatError(f"{path}: record {record!r} not found")
    return name, b"".join(parts)


def load_fasta(path, region: tuple[int, int] | None = None, record: str | None = None,
               encoding: str = "ordinal") -> EncodedSequence:
    """Read one record of a FASTA file and encode it.

    ``region`` is ``(offset, length)`` in bases; reading stops as soon as the
    window is covered, so a window near the start of a multi-gigabyte
    chromosome is cheap.  Raises FileNotFoundError, FastaFormatError or
    RegionError.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"FASTA file not found: {path}")
    stop_after = None
    if region is not None:
        offset, length = region
        if offset < 0 or length < 1:
            raise RegionError(f"invalid region offset={offset} length={length}")
        stop_after = offset + length
    name, seq = _read_record(path, record, stop_after)
    if region is not None:
        if offset + length > len(seq):
            raise RegionError(
                f"region [{offset}, {offset + length}) exceeds record {name!r} of length {len(seq)}"
            )
        seq = seq[offset:offset + length]
        source = f"{path}:{name}:{offset}+{length}"
    else:
        source = f"{path}:{name}"
    if not seq:
        raise ShapeError(f"record {name!r} in {path} has no sequence")
    samples, unknown = encode_nucleotides(seq, encoding, return_unknown=True)
    return EncodedSequence(samples=samples, source=source, encoding=encoding, unknown_count=unknown)


def splitmix64(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Outputs ``start .. start + count - 1`` of the SplitMix64 stream for ``seed``."""
    with np.errstate(over="ignore"):
        steps = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + steps * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def _unit_interval(z: np.ndarray) -> np.ndarray:
    """53-bit uniforms in [0, 1)."""
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


@dataclass(frozen=True)
class FilterSpec:
    length: int
    seed: int = 0
    distribution: str = "uniform"

    def __post_init__(self):
        if self.length < 1:
            raise ShapeError(f"filter length must be >= 1, got {self.length}")
        if self.distribution not in ("uniform", "gaussian"):
            raise ValueError(f"distribution must be 'uniform' or 'gaussian', got {self.distribution!r}")


def generate_filter(spec: FilterSpec) -> np.ndarray:
    """Seeded filter taps: uniform on [-1, 1) or standard normal (Box-Muller)."""
    if spec.distribution == "uniform":
        return 2.0 * _unit_interval(splitmix64(spec.seed, spec.length)) - 1.0
    z = splitmix64(spec.seed, 2 * spec.length)
    u1 = ((z[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u2 = _unit_interval(z[1::2])
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def synthetic_sequence(length: int, seed: int = 0, encoding: str = "ordinal") -> EncodedSequence:
    """Uniformly random ACGT string of ``length`` bases, encoded."""
    if length < 1:
        raise ShapeError(f"sequence length must be >= 1, got {length}")
    # top two bits pick the base; a distinct stream keeps it apart from filter draws
    idx = (splitmix64(seed ^ 0x5EC0E5CE, length) >> np.uint64(62)).astype(np.intp)
    bases = np.frombuffer(b"ACGT", dtype=np.uint8)[idx]
    return EncodedSequence(
        samples=encode_nucleotides(bases.tobytes(), encoding),
        source=f"synthetic:{seed}",
        encoding=encoding,
    )


def write_samples(path, samples, precision: str | None = None) -> None:
    """Write ``samples`` as a CFFT file; precision defaults from the dtype."""
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise ShapeError(f"samples must be one-dimensional, got shape {samples.shape}")
    if precision is None:
        precision = "single" if samples.dtype == np.float32 else "double"
    code = {"single": 1, "double": 2}.get(precision)
    if code is None:
        raise ValueError(f"unknown precision {precision!r}")
    payload = np.ascontiguousarray(samples, dtype=PRECISION_CODES[code])
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, code, len(payload)))
        fh.write(payload.tobytes())


def read_samples(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size or data[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a CFFT file")
    magic, version, code, length = HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatchError(f"{path}: CFFT version {version}, expected {VERSION}")
    if code not in PRECISION_CODES:
        raise FormatError(f"{path}: unknown precision code {code}")
    dtype = PRECISION_CODES[code]
    payload = len(data) - HEADER.size
    if payload != length * dtype.itemsize:
        raise TruncatedPayloadError(
            f"{path}: header declares {length} samples ({length * dtype.itemsize} bytes), "
            f"payload has {payload} bytes"
        )
    return np.frombuffer(data, dtype=dtype, offset=HEADER.size).astype(dtype.newbyteorder("="))
