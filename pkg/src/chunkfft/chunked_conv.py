"""Chunked FFT convolution with overlap-add reconstruction.

The input ``x`` and the filter ``h`` are cut into ``m_x = ceil(n_x / C)`` and
``m_h = ceil(n_h / C)`` chunks of ``C`` samples (the last one zero padded).
Every pair ``(i, j)`` is convolved through a ``2C``-point transform and its
``2C - 1`` meaningful samples are added into the output at ``i*C + j*C``.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, ShapeError
from .fft_core import (
    MAX_TRANSFORM_LENGTH,
    complex_dtype,
    fft_forward,
    fft_inverse,
    is_power_of_two,
    real_dtype,
    twiddle_table,
)
from .memory_model import MAX_CHUNK_SIZE, MemoryBudget, check_chunk

PRECISIONS = ("single", "double")


@dataclass(frozen=True)
class ConvolutionConfig:
    chunk_size: int = MAX_CHUNK_SIZE
    causal: bool = False
    precision: str = "single"
    cache_filter_ffts: bool = False
    parallel_pairs: int = 1
    max_chunk_size: int = MAX_CHUNK_SIZE
    budget: MemoryBudget | None = None
    # pairs per kernel call; 0 picks as many as fill one maximum-length transform
    pair_batch: int = 1

    def __post_init__(self):
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}, got {self.precision!r}")
        if self.parallel_pairs < 1:
            raise ValueError(f"parallel_pairs must be >= 1, got {self.parallel_pairs}")
        if self.pair_batch < 0:
            raise ValueError(f"pair_batch must be >= 0, got {self.pair_batch}")
        self.validate()

    def validate(self):
        if not is_power_of_two(self.chunk_size) or self.chunk_size < 2:
            raise ShapeError(f"chunk size must be a power of two >= 2, got {self.chunk_size}")
        check_chunk(self.chunk_size, self.budget, self.precision, clamp=self.max_chunk_size,
                    batch=self.batch_rows())

    def batch_rows(self, m_h: int | None = None) -> int:
        """Pairs handled per kernel call, never more than ``m_h``."""
        rows = self.pair_batch or max(1, MAX_TRANSFORM_LENGTH // (2 * self.chunk_size))
        return rows if m_h is None else max(1, min(rows, m_h))


@dataclass(frozen=True)
class ChunkPlan:
    n_x: int
    n_h: int
    chunk_size: int
    m_x: int
    m_h: int
    fft_len: int
    n_y: int
    pair_count: int

    @property
    def acc_len(self) -> int:
        """Accumulator length: the last pair ends at ``(m_x + m_h) * C - 1``."""
        return (self.m_x + self.m_h) * self.chunk_size

    @property
    def pair_output_len(self) -> int:
        return 2 * self.chunk_size - 1

    def offset(self, i: int, j: int) -> int:
        return (i + j) * self.chunk_size

    def pairs(self):
        """Yield ``(i, j, offset)`` in input-major order."""
        for i in range(self.m_x):
            for j in range(self.m_h):
                yield i, j, (i + j) * self.chunk_size


def plan_chunks(n_x: int, n_h: int, cfg: ConvolutionConfig) -> ChunkPlan:
    if n_x < 1 or n_h < 1:
        raise ShapeError(f"input and filter must be nonempty (n_x={n_x}, n_h={n_h})")
    cfg.validate()
    c = int(cfg.chunk_size)
    m_x = -(-n_x // c)
    m_h = -(-n_h // c)
    return ChunkPlan(
        n_x=int(n_x),
        n_h=int(n_h),
        chunk_size=c,
        m_x=m_x,
        m_h=m_h,
        fft_len=2 * c,
        n_y=int(n_x + n_h - 1),
        pair_count=m_x * m_h,
    )


def _as_real_1d(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional, got shape {a.shape}")
    if a.size == 0:
        raise ShapeError(f"{name} is empty")
    if np.iscomplexobj(a):
        raise TypeError(f"{name} must be real-valued")
    return a


def direct_convolve(x, h) -> np.ndarray:
    """Linear convolution by direct summation, always in double precision.

    O(n_x * n_h); this is the reference the FFT path is checked against.
    The loop runs over the shorter operand and adds scaled copies of the
    longer one.
    """
    x = _as_real_1d(x, "x").astype(np.float64)
    h = _as_real_1d(h, "h").astype(np.float64)
    if len(h) > len(x):
        x, h = h, x
    y = np.zeros(len(x) + len(h) - 1)
    n = len(x)
    for k, tap in enumerate(h):
        y[k:k + n] += tap * x
    return y


def convolve_chunk_pair(x_chunk: np.ndarray, h_chunk: np.ndarray, tw, *, h_transformed: bool = False) -> np.ndarray:
    """Circular convolution of two zero-padded chunks, computed in ``x_chunk``.

    Both buffers have length ``tw.n = 2C`` and only their first ``C``
    samples may be nonzero, so the first ``2C - 1`` outputs are the linear
    convolution.  ``h_chunk`` is transformed in place too unless it already
    holds a spectrum (``h_transformed=True``).
    """
    for name, buf in (("x_chunk", x_chunk), ("h_chunk", h_chunk)):
        if not isinstance(buf, np.ndarray) or buf.ndim != 1 or len(buf) != tw.n:
            raise ShapeError(f"{name} must be a 1-D buffer of length {tw.n}")
        if not np.iscomplexobj(buf):
            raise ShapeError(f"{name} must be a complex buffer")
    if not h_transformed:
        half = tw.n // 2
        if np.any(x_chunk[half:]) or np.any(h_chunk[half:]):
            raise ShapeError("chunks must be zero padded to twice their length")
    return _pair_kernel(x_chunk, h_chunk, tw, h_transformed)


def _pair_kernel(xbuf, hbuf, tw, h_transformed):
    fft_forward(xbuf, tw)
    if not h_transformed:
        fft_forward(hbuf, tw)
    xbuf *= hbuf
    return fft_inverse(xbuf, tw)


def overlap_add(acc: np.ndarray, y_ij, offset: int, length: int | None = None) -> np.ndarray:
    """Add ``Re(y_ij[:length])`` into ``acc`` at ``offset``; ``length`` defaults to ``len(y_ij) - 1``."""
    if length is None:
        length = len(y_ij) - 1
    if offset < 0 or offset + length > len(acc):
        raise BoundsError(
            f"deposit of {length} samples at offset {offset} overruns accumulator of length {len(acc)}"
        )
    seg = y_ij[:length]
    acc[offset:offset + length] += seg.real if np.iscomplexobj(seg) else seg
    return acc


def causal_truncate(y, n_x: int) -> np.ndarray:
    y = np.asarray(y)
    if n_x < 0 or len(y) < n_x:
        raise ShapeError(f"cannot take {n_x} samples from a sequence of length {len(y)}")
    return y[:n_x]


@dataclass
class EngineStats:
    """Counters and per-phase nanosecond totals filled in by one engine run.

    ``compute_ns`` covers the transforms and the spectral product,
    ``staging_ns`` chunk partitioning and copies in and out of the work
    buffers, ``host_ns`` overlap-add and the final slice.
    """

    pairs_executed: int = 0
    forward_ffts: int = 0
    inverse_ffts: int = 0
    filter_ffts: int = 0
    bytes_staged: int = 0
    compute_ns: int = 0
    staging_ns: int = 0
    host_ns: int = 0
    parallel: bool = False

    def merge(self, other: "EngineStats"):
        for name in ("pairs_executed", "forward_ffts", "inverse_ffts", "filter_ffts", "bytes_staged"):
            setattr(self, name, getattr(self, name) + getattr(other, name))


def _partition(a: np.ndarray, m: int, c: int, dtype) -> np.ndarray:
    padded = np.zeros(m * c, dtype=dtype)
    padded[:len(a)] = a
    return padded.reshape(m, c)


def _run_pairs(plan, xs, hs, h_spectra, tw, cdtype, rdtype, pairs, stats: EngineStats, timed: bool):
    """Convolve the given pairs into a private accumulator."""
    c, n = plan.chunk_size, plan.fft_len
    out_len = plan.pair_output_len
    acc = np.zeros(plan.acc_len, dtype=rdtype)
    xbuf = np.zeros(n, dtype=cdtype)
    hbuf = np.zeros(n, dtype=cdtype)
    result = np.empty(out_len, dtype=rdtype)
    word = xbuf.itemsize
    clock = time.perf_counter_ns
    for i, j, offset in pairs:
        t0 = clock() if timed else 0
        xbuf[:c] = xs[i]
        xbuf[c:] = 0
        staged = n * word
        if h_spectra is None:
            hbuf[:c] = hs[j]
            hbuf[c:] = 0
            staged += n * word
            hspec = hbuf
        else:
            hspec = h_spectra[j]
        t1 = clock() if timed else 0

        _pair_kernel(xbuf, hspec, tw, h_transformed=h_spectra is not None)
        if h_spectra is None:
            stats.forward_ffts += 1
        t2 = clock() if timed else 0

        np.copyto(result, xbuf.real[:out_len])
        staged += out_len * result.itemsize
        t3 = clock() if timed else 0

        overlap_add(acc, result, offset, out_len)
        if timed:
            t4 = clock()
            stats.staging_ns += (t1 - t0) + (t3 - t2)
            stats.compute_ns += t2 - t1
            stats.host_ns += t4 - t3
        stats.forward_ffts += 1
        stats.inverse_ffts += 1
        stats.pairs_executed += 1
        stats.bytes_staged += staged
    return acc


def _run_batches(plan, xs, hs, h_spectra, tw, cdtype, rdtype, tasks, stats: EngineStats, timed: bool):
    """Batched variant of :func:`_run_pairs`.

    Each task ``(i, j0, j1)`` convolves input chunk ``i`` with filter chunks
    ``j0 .. j1-1`` as rows of one 2-D work buffer.  Row ``r`` lands at
    ``(i + j0 + r) * C``, so the rows overlap-add as a block: first halves
    tile the block and second halves tile it shifted by one chunk.
    """
    c, n = plan.chunk_size, plan.fft_len
    rows = max(j1 - j0 for _, j0, j1 in tasks) if tasks else 1
    acc = np.zeros(plan.acc_len, dtype=rdtype)
    xbuf = np.zeros((rows, n), dtype=cdtype)
    hbuf = np.zeros((rows, n), dtype=cdtype)
    block = np.zeros((rows + 1, c), dtype=rdtype)
    word = xbuf.itemsize
    clock = time.perf_counter_ns
    for i, j0, j1 in tasks:
        b = j1 - j0
        t0 = clock() if timed else 0
        xb = xbuf[:b]
        xb[:, :c] = xs[i]
        xb[:, c:] = 0
        staged = b * n * word
        if h_spectra is None:
            hb = hbuf[:b]
            hb[:, :c] = hs[j0:j1]
            hb[:, c:] = 0
            staged += b * n * word
        else:
            hb = h_spectra[j0:j1]
        t1 = clock() if timed else 0

        _pair_kernel(xb, hb, tw, h_transformed=h_spectra is not None)
        t2 = clock() if timed else 0

        blk = block[:b + 1]
        blk[:b] = xb.real[:, :c]
        blk[b] = 0
        blk[1:, :c - 1] += xb.real[:, c:n - 1]
        staged += b * (n - 1) * blk.itemsize
        t3 = clock() if timed else 0

        start = (i + j0) * c
        overlap_add(acc, blk.reshape(-1), start, (b + 1) * c)
        if timed:
            t4 = clock()
            stats.staging_ns += (t1 - t0) + (t3 - t2)
            stats.compute_ns += t2 - t1
            stats.host_ns += t4 - t3
        if h_spectra is None:
            stats.forward_ffts += b
        stats.forward_ffts += b
        stats.inverse_ffts += b
        stats.pairs_executed += b
        stats.bytes_staged += staged
    return acc


def chunked_convolve(x, h, cfg: ConvolutionConfig | None = None, *, stats: EngineStats | None = None) -> np.ndarray:
    """Linear convolution of real ``x`` and ``h`` by chunked FFTs and overlap-add.

    Returns ``n_x + n_h - 1`` samples, or the first ``n_x`` when
    ``cfg.causal``.  Pass an :class:`EngineStats` to collect pair counts and
    phase timings.  With ``cfg.parallel_pairs > 1`` pairs are split across
    threads, each with its own accumulator; the sum order then differs from
    the sequential run at round-off level and only wall time of the parallel
    section is recorded (as compute).
    """
    cfg = cfg or ConvolutionConfig()
    x = _as_real_1d(x, "x")
    h = _as_real_1d(h, "h")
    plan = plan_chunks(len(x), len(h), cfg)
    if stats is None:
        stats = EngineStats()
    cdtype = complex_dtype(cfg.precision)
    rdtype = real_dtype(cfg.precision)
    tw = twiddle_table(plan.fft_len, cfg.precision)
    c = plan.chunk_size
    clock = time.perf_counter_ns

    t0 = clock()
    xs = _partition(x, plan.m_x, c, rdtype)
    hs = _partition(h, plan.m_h, c, rdtype)
    stats.bytes_staged += xs.nbytes + hs.nbytes
    t1 = clock()
    stats.staging_ns += t1 - t0

    h_spectra = None
    if cfg.cache_filter_ffts:
        h_spectra = np.zeros((plan.m_h, plan.fft_len), dtype=cdtype)
        h_spectra[:, :c] = hs
        for spec in h_spectra:
            fft_forward(spec, tw)
        stats.filter_ffts += plan.m_h
        stats.forward_ffts += plan.m_h
        stats.compute_ns += clock() - t1

    rows = cfg.batch_rows(plan.m_h)
    if rows == 1:
        runner, units = _run_pairs, list(plan.pairs())
    else:
        runner = _run_batches
        units = [(i, j0, min(j0 + rows, plan.m_h)) for i in range(plan.m_x) for j0 in range(0, plan.m_h, rows)]
    workers = min(cfg.parallel_pairs, len(units))
    if workers <= 1:
        acc = runner(plan, xs, hs, h_spectra, tw, cdtype, rdtype, units, stats, timed=True)
    else:
        stats.parallel = True
        shards = [units[k::workers] for k in range(workers)]
        shard_stats = [EngineStats() for _ in shards]
        t2 = clock()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            accs = list(pool.map(
                lambda args: runner(plan, xs, hs, h_spectra, tw, cdtype, rdtype, args[0], args[1], timed=False),
                zip(shards, shard_stats),
            ))
        t3 = clock()
        stats.compute_ns += t3 - t2
        for s in shard_stats:
            stats.merge(s)
        acc = accs[0]
        for other in accs[1:]:
            acc += other
        stats.host_ns += clock() - t3

    t4 = clock()
    y = acc[:plan.n_x if cfg.causal else plan.n_y]
    stats.host_ns += clock() - t4
    return y

