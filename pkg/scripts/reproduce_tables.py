#!/usr/bin/env python3
"""Run the dataset x chunk-size sweep and write Markdown and CSV tables.

    python3 scripts/reproduce_tables.py --sizes 32K,160K --out results/

The default grid (450K, 160K, 32K by 8192, 4096, 2048) takes a few minutes
on one core; pass ``--fasta`` to slice a genome record instead of using
synthetic bases.
"""

import argparse
import sys
from pathlib import Path

from chunkfft import data_io
from chunkfft.chunked_conv import ConvolutionConfig
from chunkfft.cli import chunk_list, parse_size, size_list
from chunkfft.memory_model import U200_BUDGET
from chunkfft.pipeline import degradation_lines, render_csv, render_markdown, sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=size_list, default=size_list("450K,160K,32K"))
    ap.add_argument("--chunks", type=chunk_list, default=[8192, 4096, 2048])
    ap.add_argument("--precision", choices=("single", "double"), default="single")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--min-time", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fasta")
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args(argv)

    sizes = [parse_size(s) for s in args.sizes]
    sequence = None
    if args.fasta:
        sequence = data_io.load_fasta(args.fasta, region=(0, max(sizes))).samples
    result = sweep(sizes, args.chunks, ConvolutionConfig(precision=args.precision), budget=U200_BUDGET,
                   seed=args.seed, sequence=sequence, repeats=args.repeats, min_time=args.min_time)

    md = render_markdown(result) + "\n" + "\n".join(degradation_lines(result)) + "\n"
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "tables.md").write_text(md)
    (args.out / "tables.csv").write_text(render_csv(result))
    sys.stdout.write(md)
    print(f"wrote {args.out / 'tables.md'} and {args.out / 'tables.csv'}")


if __name__ == "__main__":
    main()
