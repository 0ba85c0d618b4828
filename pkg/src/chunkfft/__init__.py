"""Chunked FFT long convolution under an on-chip memory budget."""

from .chunked_conv import (
    ChunkPlan,
    ConvolutionConfig,
    EngineStats,
    causal_truncate,
    chunked_convolve,
    convolve_chunk_pair,
    direct_convolve,
    overlap_add,
    plan_chunks,
)
from .data_io import (
    EncodedSequence,
    FilterSpec,
    encode_nucleotides,
    generate_filter,
    load_fasta,
    read_samples,
    synthetic_sequence,
    write_samples,
)
from .errors import (
    BadMagicError,
    BoundsError,
    BudgetError,
    ChunkFFTError,
    FastaFormatError,
    FormatError,
    RegionError,
    ShapeError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .fft_core import MAX_TRANSFORM_LENGTH, TwiddleTable, bit_reverse_permute, fft_forward, fft_inverse, twiddle_table
from .memory_model import MAX_CHUNK_SIZE, MemoryBudget, MemoryFootprint, footprint, max_chunk_size
from .pipeline import (
    ConvolutionReport,
    PhaseTimings,
    SweepResult,
    breakdown_percentages,
    flop_count,
    run_instrumented,
    sweep,
)

__version__ = "0.1.0"
