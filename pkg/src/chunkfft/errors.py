"""Exception hierarchy shared by every chunkfft module."""


class ChunkFFTError(Exception):
    """Base class for all errors raised by chunkfft."""


class ShapeError(ChunkFFTError, ValueError):
    """A buffer or sequence has an unusable length."""


class BudgetError(ChunkFFTError, ValueError):
    """A chunk configuration does not fit the active memory budget."""


class BoundsError(ChunkFFTError, IndexError):
    """An overlap-add deposit would write past the accumulator."""


class FormatError(ChunkFFTError, ValueError):
    """A CFFT sample file is malformed."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class FastaFormatError(ChunkFFTError, ValueError):
    """A FASTA file could not be parsed."""


class RegionError(ChunkFFTError, IndexError):
    """A requested region lies outside the sequence."""
