"""Command line entry point: ``chunkfft {convolve,verify,bench,budget}``.

Exit codes: 0 success, 1 runtime or verification failure, 2 usage error.
Every flag can also be set from a ``key = value`` config file passed with
``--config`` (keys are flag names without the leading dashes); flags given
on the command line win.  ``CHUNKFFT_BUDGET`` sets the default budget.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

from . import data_io
from .chunked_conv import ConvolutionConfig
from .errors import ChunkFFTError
from .fft_core import is_power_of_two
from .memory_model import MAX_CHUNK_SIZE, MemoryBudget, footprint, max_chunk_size, parse_bytes
from .pipeline import degradation_lines, render_csv, render_markdown, run_instrumented, sweep

BUDGET_ENV = "CHUNKFFT_BUDGET"
DEFAULT_CAPACITY = "2.8MB"
VERIFY_SIZE_CAP = 16384
TOLERANCE = {"single": 1e-5, "double": 1e-12}


def chunk_arg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"chunk size must be a power of two, got {text!r}") from None
    if not is_power_of_two(value) or value < 2:
        raise argparse.ArgumentTypeError(f"chunk size must be a power of two >= 2, got {value}")
    return value


def chunk_list(text: str) -> list[int]:
    return [chunk_arg(part) for part in text.split(",") if part.strip()]


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {value}")
    return value


def parse_size(text: str, k_binary: bool = False) -> int:
    """``"450000"``, ``"450K"`` or ``"1M"``; K is 1000 unless ``k_binary``."""
    text = text.strip().upper()
    base = 1024 if k_binary else 1000
    scale = 1
    if text.endswith("K"):
        text, scale = text[:-1], base
    elif text.endswith("M"):
        text, scale = text[:-1], base * base
    value = int(float(text) * scale)
    if value < 1:
        raise ValueError(f"dataset size must be positive, got {text!r}")
    return value


def size_list(text: str) -> list[str]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    for p in parts:
        try:
            parse_size(p)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid dataset size {p!r}") from None
    return parts


def region_arg(text: str) -> tuple[int, int]:
    try:
        offset, length = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"region must be OFFSET:LENGTH, got {text!r}") from None
    return offset, length


def _budget_flags(p):
    p.add_argument("--budget", default=os.environ.get(BUDGET_ENV),
                   help=f"on-chip byte budget, e.g. 2.8MB (default: ${BUDGET_ENV} or none)")
    p.add_argument("--binary-mb", action="store_true", help="read KB/MB/GB suffixes as powers of 1024")


def _engine_flags(p):
    p.add_argument("--precision", choices=("single", "double"), default="single")
    p.add_argument("--cache-filter", action="store_true", help="transform each filter chunk once")
    p.add_argument("--parallel", type=positive_int, default=1, help="worker threads over chunk pairs")
    _pair_batch_flag(p, 1)


def _pair_batch_flag(p, default):
    p.add_argument("--pair-batch", type=non_negative_int, default=default,
                   help=f"chunk pairs per kernel call, 0 = fill one 16384-point transform (default {default})")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file mirroring the flags")

    parser = argparse.ArgumentParser(prog="chunkfft", description="Chunked FFT long convolution")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convolve", parents=[common], help="convolve an input with a filter")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--x", help="input samples (CFFT file)")
    src.add_argument("--x-fasta", help="input FASTA file")
    p.add_argument("--region", type=region_arg, help="OFFSET:LENGTH window of the FASTA record")
    p.add_argument("--record", help="FASTA record name (default: first)")
    p.add_argument("--encoding", choices=sorted(data_io.ENCODINGS), default="ordinal")
    p.add_argument("--h", help="filter samples (CFFT file); default is a generated filter")
    p.add_argument("--h-seed", type=int, default=0)
    p.add_argument("--h-length", type=positive_int, help="generated filter length (default: input length)")
    p.add_argument("--h-dist", choices=("uniform", "gaussian"), default="uniform")
    p.add_argument("--chunk", type=chunk_arg, default=MAX_CHUNK_SIZE)
    p.add_argument("--causal", action="store_true", help="keep only the first n_x outputs")
    p.add_argument("--check", action="store_true", help="compare against direct convolution")
    p.add_argument("--out", required=True, help="output CFFT file")
    _engine_flags(p)
    _budget_flags(p)

    p = sub.add_parser("verify", parents=[common], help="chunked vs direct convolution on seeded inputs")
    p.add_argument("--sizes", type=size_list, default=size_list("1,3,100,1000,4096"))
    p.add_argument("--chunks", type=chunk_list, default=[4, 16, 64, 256, 1024])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", choices=("single", "double"), default="single")
    p.add_argument("--k-binary", action="store_true", help="K means 1024 in sizes")
    _pair_batch_flag(p, 0)

    p = sub.add_parser("bench", parents=[common], help="timing / MFLOPS / breakdown tables")
    p.add_argument("--sizes", type=size_list, default=size_list("450K,160K,32K"))
    p.add_argument("--chunks", type=chunk_list, default=[8192, 4096, 2048])
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fasta", help="take inputs from this FASTA record instead of synthetic bases")
    p.add_argument("--record", help="FASTA record name (default: first)")
    p.add_argument("--k-binary", action="store_true", help="K means 1024 in sizes")
    p.add_argument("--repeats", type=positive_int, default=3, help="minimum timed runs per cell")
    p.add_argument("--min-time", type=non_negative_float, default=1.0,
                   help="keep repeating a cell until this many seconds are spent (default 1.0)")
    p.add_argument("--concurrent", action="store_true", help="run cells concurrently (timings interfere)")
    p.add_argument("--check", action="store_true", help="oracle-check cells small enough")
    p.add_argument("--out", help="also write the tables to this file")
    _engine_flags(p)
    _budget_flags(p)

    p = sub.add_parser("budget", parents=[common], help="footprints and the largest chunk for a budget")
    p.add_argument("--capacity", default=os.environ.get(BUDGET_ENV) or DEFAULT_CAPACITY)
    p.add_argument("--precision", choices=("single", "double"), default="single")
    p.add_argument("--binary-mb", action="store_true", help="read KB/MB/GB suffixes as powers of 1024")

    parser._subparser_map = sub.choices
    return parser


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_config(path) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(parser, argv, args):
    sub = parser._subparser_map[args.command]
    try:
        values = read_config(args.config)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config: {exc}")
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            sub.error(f"unknown config key {key!r}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = value.lower()
            if low not in _TRUE | _FALSE:
                sub.error(f"config key {key!r} expects a boolean, got {value!r}")
            flag = low in _TRUE
            defaults[key] = flag if isinstance(action, argparse._StoreTrueAction) else not flag
        else:
            defaults[key] = value
    # string defaults go through each action's type on the re-parse
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _budget(args, field="budget") -> MemoryBudget | None:
    text = getattr(args, field)
    if text in (None, ""):
        return None
    return MemoryBudget(parse_bytes(text, binary=args.binary_mb))


def cmd_convolve(args) -> int:
    if args.x is not None:
        x = data_io.read_samples(args.x)
    else:
        x = data_io.load_fasta(args.x_fasta, region=args.region, record=args.record,
                               encoding=args.encoding).samples
    if args.h is not None:
        h = data_io.read_samples(args.h)
    else:
        spec = data_io.FilterSpec(length=args.h_length or len(x), seed=args.h_seed, distribution=args.h_dist)
        h = data_io.generate_filter(spec)
    cfg = ConvolutionConfig(
        chunk_size=args.chunk,
        causal=args.causal,
        precision=args.precision,
        cache_filter_ffts=args.cache_filter,
        parallel_pairs=args.parallel,
        budget=_budget(args),
        pair_batch=args.pair_batch,
    )
    y, report = run_instrumented(x, h, cfg, check=args.check)
    data_io.write_samples(args.out, y, precision=args.precision)
    print(report.summary())
    return 0


def cmd_verify(args) -> int:
    sizes = [parse_size(s, args.k_binary) for s in args.sizes]
    too_big = [s for s in sizes if s > VERIFY_SIZE_CAP]
    if too_big:
        print(f"chunkfft verify: sizes {too_big} exceed the oracle cap {VERIFY_SIZE_CAP}", file=sys.stderr)
        return 2
    tol = TOLERANCE[args.precision]
    worst = None
    failures = 0
    for size in sizes:
        x = data_io.generate_filter(data_io.FilterSpec(size, seed=args.seed))
        h = data_io.generate_filter(data_io.FilterSpec(size, seed=args.seed + 1))
        for chunk in args.chunks:
            cfg = ConvolutionConfig(chunk_size=chunk, precision=args.precision, pair_batch=args.pair_batch)
            _, report = run_instrumented(x, h, cfg, check=True)
            err = report.rel_l2_error
            ok = err < tol
            failures += not ok
            if worst is None or err > worst[0]:
                worst = (err, size, chunk)
            print(f"n={size:6d} C={chunk:5d} rel_l2={err:.3e} {'ok' if ok else 'FAIL'}")
    if worst is None:
        print("no cells to verify")
        return 0
    err, size, chunk = worst
    if failures:
        print(f"FAILED {failures} cell(s); worst n={size} C={chunk} rel_l2={err:.3e} (tolerance {tol:g})")
        return 1
    print(f"all cells within {tol:g} ({args.precision}); worst rel_l2={err:.3e} at n={size} C={chunk}")
    return 0


def cmd_bench(args) -> int:
    sizes = [parse_size(s, args.k_binary) for s in args.sizes]
    cfg = ConvolutionConfig(
        precision=args.precision,
        cache_filter_ffts=args.cache_filter,
        parallel_pairs=args.parallel,
        pair_batch=args.pair_batch,
    )
    sequence = None
    if args.fasta:
        need = max(sizes) if sizes else 1
        sequence = data_io.load_fasta(args.fasta, region=(0, need), record=args.record).samples
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = sweep(sizes, args.chunks, cfg, budget=_budget(args), seed=args.seed,
                       sequence=sequence, concurrent=args.concurrent, check=args.check,
                       repeats=args.repeats, min_time=args.min_time)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if sizes and args.chunks and not result.reports:
        print("chunkfft bench: every cell was skipped", file=sys.stderr)
        return 1
    text = render_csv(result) if args.format == "csv" else render_markdown(result)
    sys.stdout.write(text)
    notes = degradation_lines(result)
    notes_stream = sys.stderr if args.format == "csv" else sys.stdout
    for line in notes:
        print(line, file=notes_stream)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def cmd_budget(args) -> int:
    budget = MemoryBudget(parse_bytes(args.capacity, binary=args.binary_mb))
    unclamped = max_chunk_size(budget, args.precision, clamp=None)
    clamped = max_chunk_size(budget, args.precision)
    print(f"capacity: {budget.capacity_bytes} bytes, precision: {args.precision}")
    print(f"{'chunk':>8} {'input':>10} {'filter':>10} {'twiddle':>10} {'total':>10}  fits")
    c = 2
    while c <= max(2 * unclamped, 2 * MAX_CHUNK_SIZE):
        fp = footprint(c, args.precision)
        print(f"{c:>8} {fp.input_buffer_bytes:>10} {fp.filter_buffer_bytes:>10} "
              f"{fp.twiddle_bytes:>10} {fp.total_bytes:>10}  {'yes' if fp.fits(budget) else 'no'}")
        c *= 2
    print(f"max chunk size (unclamped): {unclamped}")
    note = " (limited by engine clamp)" if clamped < unclamped else ""
    print(f"max chunk size (engine clamp {MAX_CHUNK_SIZE}): {clamped}{note}")
    return 0


COMMANDS = {"convolve": cmd_convolve, "verify": cmd_verify, "bench": cmd_bench, "budget": cmd_budget}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    if args.config:
        args = _apply_config(parser, argv, args)
    try:
        return COMMANDS[args.command](args)
    except (ChunkFFTError, OSError, ValueError) as exc:
        print(f"chunkfft {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
