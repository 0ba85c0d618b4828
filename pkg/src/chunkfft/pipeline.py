"""Instrumented runs and the chunk-size sweep behind the benchmark tables.

Phase mapping for a single host:

* compute  -- per-pair forward/inverse transforms and spectral product (the kernel)
* staging  -- chunk partitioning and copies into/out of work buffers (H2D/D2H analog)
* host     -- overlap-add accumulation and final truncation (CPU processing)

FLOPs are counted with the usual ``5 N log2 N`` real operations per radix-2
transform, ``6 N`` per complex pointwise product and ``2C - 1`` additions
per overlap-add deposit.  The numbers compare runs of this package with each
other, not with FPGA measurements.
"""

from __future__ import annotations

import csv
import io
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .chunked_conv import ChunkPlan, ConvolutionConfig, EngineStats, chunked_convolve, direct_convolve, plan_chunks
from .data_io import FilterSpec, generate_filter, synthetic_sequence
from .errors import BudgetError, ShapeError
from .fft_core import log2_length, twiddle_table
from .memory_model import MemoryBudget, check_chunk

log = logging.getLogger(__name__)

#: Oracle checks are skipped above this many output samples.
ORACLE_LIMIT = 1 << 20

FLOP_CONVENTION = "5*N*log2(N) per FFT, 6*N per complex product, 2C-1 per overlap-add"


@dataclass(frozen=True)
class PhaseTimings:
    compute_s: float
    staging_s: float
    host_s: float
    total_s: float

    def __post_init__(self):
        for name in ("compute_s", "staging_s", "host_s", "total_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} is negative")

    @property
    def attributed_s(self) -> float:
        return self.compute_s + self.staging_s + self.host_s


@dataclass
class ConvolutionReport:
    plan: ChunkPlan
    timings: PhaseTimings
    flops: int
    mflops: float
    bytes_staged: int
    bandwidth_gbs: float
    precision: str = "single"
    cache_filter_ffts: bool = False
    kernel_invocations: int = 0
    max_abs_error: float | None = None
    rel_l2_error: float | None = None

    def summary(self) -> str:
        p, t = self.plan, self.timings
        c, s, h = breakdown_percentages(t)
        line = (
            f"n_x={p.n_x} n_h={p.n_h} C={p.chunk_size} pairs={p.pair_count} "
            f"time={t.total_s:.4f}s mflops={self.mflops:.1f} "
            f"breakdown={c:.1f}/{s:.1f}/{h:.1f}% bandwidth={self.bandwidth_gbs:.2f}GB/s"
        )
        if self.max_abs_error is not None:
            line += f" max_abs_err={self.max_abs_error:.3e} rel_l2={self.rel_l2_error:.3e}"
        return line


def fft_flops(n: int) -> int:
    return 5 * n * log2_length(n)


def flop_count(plan: ChunkPlan, cache_filter_ffts: bool = False) -> int:
    n = plan.fft_len
    fft = fft_flops(n)
    pairs = plan.pair_count
    if cache_filter_ffts:
        transforms = (plan.m_h + pairs) * fft + pairs * (fft + 6 * n)
    else:
        transforms = pairs * (3 * fft + 6 * n)
    return transforms + pairs * (2 * plan.chunk_size - 1)


def breakdown_percentages(t: PhaseTimings) -> tuple[float, float, float]:
    """Compute / staging / host shares of the attributed time, in percent."""
    total = t.compute_s + t.staging_s + t.host_s
    if total <= 0:
        raise ZeroDivisionError("phase timings sum to zero")
    return (100.0 * t.compute_s / total, 100.0 * t.staging_s / total, 100.0 * t.host_s / total)


def run_instrumented(x, h, cfg: ConvolutionConfig | None = None, *, check: bool = False,
                     oracle_limit: int = ORACLE_LIMIT):
    """Run :func:`chunked_convolve` and return ``(y, report)``.

    ``check`` compares against :func:`direct_convolve`; it is silently
    dropped when the output exceeds ``oracle_limit`` samples.  Twiddle
    tables are built before the clock starts; they are shared setup, like a
    kernel's twiddle ROM.
    """
    cfg = cfg or ConvolutionConfig()
    plan = plan_chunks(len(x), len(h), cfg)
    twiddle_table(plan.fft_len, cfg.precision)
    stats = EngineStats()
    start = time.perf_counter_ns()
    y = chunked_convolve(x, h, cfg, stats=stats)
    total_ns = time.perf_counter_ns() - start

    timings = PhaseTimings(
        compute_s=stats.compute_ns * 1e-9,
        staging_s=stats.staging_ns * 1e-9,
        host_s=stats.host_ns * 1e-9,
        total_s=max(total_ns, 1) * 1e-9,
    )
    flops = flop_count(plan, cfg.cache_filter_ffts)
    report = ConvolutionReport(
        plan=plan,
        timings=timings,
        flops=flops,
        mflops=flops / (timings.total_s * 1e6),
        bytes_staged=stats.bytes_staged,
        bandwidth_gbs=stats.bytes_staged / timings.staging_s / 1e9 if timings.staging_s > 0 else 0.0,
        precision=cfg.precision,
        cache_filter_ffts=cfg.cache_filter_ffts,
        kernel_invocations=stats.pairs_executed,
    )
    if check:
        if plan.n_y > oracle_limit:
            log.info("oracle check skipped: %d output samples exceed limit %d", plan.n_y, oracle_limit)
        else:
            ref = direct_convolve(x, h)
            if cfg.causal:
                ref = ref[:plan.n_x]
            diff = np.asarray(y, dtype=np.float64) - ref
            report.max_abs_error = float(np.max(np.abs(diff)))
            norm = float(np.linalg.norm(ref))
            report.rel_l2_error = float(np.linalg.norm(diff) / norm) if norm > 0 else float(np.linalg.norm(diff))
    return y, report


@dataclass
class SweepResult:
    sizes: list
    chunks: list
    reports: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def cell(self, size, chunk) -> ConvolutionReport | None:
        return self.reports.get((size, chunk))

    def degradation_percent(self, chunk) -> float | None:
        """Throughput lost from the smallest to the largest dataset at ``chunk``."""
        present = [s for s in self.sizes if (s, chunk) in self.reports]
        if len(present) < 2:
            return None
        small, large = min(present), max(present)
        first = self.reports[(small, chunk)].mflops
        return 100.0 * (first - self.reports[(large, chunk)].mflops) / first


def sweep_inputs(size: int, seed: int = 0, sequence=None):
    """Input of ``size`` bases plus an equal-length seeded filter.

    ``sequence`` (an encoded genome window) is sliced when given, otherwise a
    synthetic ACGT sequence stands in.
    """
    if sequence is not None:
        if len(sequence) < size:
            raise ShapeError(f"sequence has {len(sequence)} samples, dataset needs {size}")
        x = np.asarray(sequence[:size])
    else:
        x = synthetic_sequence(size, seed).samples
    h = generate_filter(FilterSpec(length=size, seed=seed))
    return x, h


def sweep(sizes, chunks, cfg: ConvolutionConfig | None = None, *, budget: MemoryBudget | None = None,
          seed: int = 0, sequence=None, concurrent: bool = False, check: bool = False,
          repeats: int = 3, min_time: float = 1.0, max_repeats: int = 50) -> SweepResult:
    """Instrumented runs for every (dataset size, chunk size) cell.

    Each cell is run at least ``repeats`` times, and short cells keep
    repeating until ``min_time`` seconds have been spent on them (at most
    ``max_repeats`` runs).  Repeats are interleaved across cells and the
    run with the median total time is reported; the median shrugs off both
    slow bursts and lucky fast runs.
    Cells whose chunk size breaks the budget or the engine clamp are skipped
    with a warning.  ``concurrent`` runs cells in threads; their timings then
    interfere with each other.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    cfg = cfg or ConvolutionConfig()
    sizes, chunks = list(sizes), list(chunks)
    result = SweepResult(sizes=sizes, chunks=chunks)
    budget = budget if budget is not None else cfg.budget

    cells = []
    for chunk in chunks:
        try:
            check_chunk(chunk, budget, cfg.precision, clamp=cfg.max_chunk_size)
            cell_cfg = replace(cfg, chunk_size=chunk, budget=budget)
        except (BudgetError, ShapeError) as exc:
            for size in sizes:
                result.skipped.append((size, chunk, str(exc)))
                warnings.warn(f"skipping {size} x C={chunk}: {exc}", stacklevel=2)
            continue
        for size in sizes:
            cells.append((size, chunk, cell_cfg))

    inputs = {size: sweep_inputs(size, seed, sequence) for size in sizes}

    history: dict = {}
    spent = {cell[:2]: 0.0 for cell in cells}
    runs = {cell[:2]: 0 for cell in cells}

    def pending(cell):
        key = cell[:2]
        k = runs[key]
        return k < repeats or (spent[key] < min_time and k < max_repeats)

    def run(cell):
        size, chunk, cell_cfg = cell
        key = (size, chunk)
        x, h = inputs[size]
        _, report = run_instrumented(x, h, cell_cfg, check=check and runs[key] == 0)
        history.setdefault(key, []).append(report)
        spent[key] += report.timings.total_s
        runs[key] += 1

    # round-robin so a burst of machine noise hits different cells, not every repeat of one
    todo = [cell for cell in cells if pending(cell)]
    if concurrent and len(cells) > 1:
        warnings.warn("concurrent sweep: cell timings interfere with each other", stacklevel=2)
    while todo:
        if concurrent and len(todo) > 1:
            with ThreadPoolExecutor() as pool:
                list(pool.map(run, todo))
        else:
            for cell in todo:
                run(cell)
        todo = [cell for cell in todo if pending(cell)]
    for key, reports in history.items():
        ordered = sorted(reports, key=lambda r: r.timings.total_s)
        median = ordered[(len(ordered) - 1) // 2]
        median.max_abs_error, median.rel_l2_error = reports[0].max_abs_error, reports[0].rel_l2_error
        result.reports[key] = median
    return result


def _label(n: int) -> str:
    """Compact table label: 8192 -> "8K", 450000 -> "450K"."""
    if n >= 1000 and n % 1000 == 0:
        return f"{n // 1000}K"
    if n >= 1024 and n % 1024 == 0:
        return f"{n // 1024}K"
    return str(n)


CSV_FIELDS = ["n_x", "n_h", "chunk_size", "pairs", "seconds", "mflops",
              "compute_pct", "staging_pct", "host_pct", "bandwidth_gbs"]


def render_csv(result: SweepResult) -> str:
    """One row per cell.  Seconds carry 6 decimals, MFLOPS 3, percentages 2, GB/s 4."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for size in result.sizes:
        for chunk in result.chunks:
            r = result.cell(size, chunk)
            if r is None:
                continue
            c, s, h = breakdown_percentages(r.timings)
            writer.writerow([
                r.plan.n_x, r.plan.n_h, chunk, r.plan.pair_count,
                f"{r.timings.total_s:.6f}", f"{r.mflops:.3f}",
                f"{c:.2f}", f"{s:.2f}", f"{h:.2f}", f"{r.bandwidth_gbs:.4f}",
            ])
    return buf.getvalue()


def _md_table(result: SweepResult, title: str, fmt) -> str:
    header = ["Dataset Size"] + [f"{_label(c)} Chunk" for c in result.chunks]
    lines = [f"**{title}**", "", "| " + " | ".join(header) + " |",
             "|" + "|".join(":---:" for _ in header) + "|"]
    for size in result.sizes:
        row = [f"{_label(size)} by {_label(size)}"]
        for chunk in result.chunks:
            r = result.cell(size, chunk)
            row.append("skipped" if r is None else fmt(r))
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def render_markdown(result: SweepResult) -> str:
    def breakdown(r):
        return "{:.1f} / {:.1f} / {:.1f}".format(*breakdown_percentages(r.timings))

    tables = [
        _md_table(result, "Execution time (seconds)", lambda r: f"{r.timings.total_s:.4f}"),
        _md_table(result, f"Throughput (MFLOPS; {FLOP_CONVENTION})", lambda r: f"{r.mflops:.1f}"),
        _md_table(result, "Time breakdown: compute / staging / host (%)", breakdown),
        _md_table(result, "Chunk pairs", lambda r: str(r.plan.pair_count)),
    ]
    return "\n\n".join(tables) + "\n"


def degradation_lines(result: SweepResult) -> list[str]:
    lines = []
    for chunk in result.chunks:
        d = result.degradation_percent(chunk)
        if d is not None:
            lines.append(
                f"C={chunk}: throughput change {_label(min(result.sizes))} -> {_label(max(result.sizes))}: "
                f"{-d:+.1f}%"
            )
    return lines
