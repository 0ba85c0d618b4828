#!/usr/bin/env python3
"""Print chunk plans, FLOP counts and memory footprints for the benchmark grid.

No convolution is run; this only shows how each configuration is tiled and
whether it fits the 2.8 MB on-chip budget.
"""

from chunkfft.chunked_conv import ConvolutionConfig, plan_chunks
from chunkfft.memory_model import MAX_CHUNK_SIZE, U200_BUDGET, footprint
from chunkfft.pipeline import flop_count

SIZES = [32_000, 160_000, 450_000]
CHUNKS = [2048, 4096, 8192, 16384]


def main():
    print(f"{'n':>8} {'C':>6} {'m':>5} {'pairs':>7} {'n_y':>8} {'GFLOP':>8} {'bytes':>9} fits  runs")
    for n in SIZES:
        for c in CHUNKS:
            plan = plan_chunks(n, n, ConvolutionConfig(chunk_size=c, max_chunk_size=None))
            fp = footprint(c)
            print(f"{n:>8} {c:>6} {plan.m_x:>5} {plan.pair_count:>7} {plan.n_y:>8} "
                  f"{flop_count(plan) / 1e9:>8.2f} {fp.total_bytes:>9} {'yes' if fp.fits(U200_BUDGET) else 'no ':<4} "
                  f"{'yes' if c <= MAX_CHUNK_SIZE else 'no (above engine clamp)'}")


if __name__ == "__main__":
    main()
