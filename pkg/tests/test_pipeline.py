import csv
import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chunkfft.chunked_conv import ConvolutionConfig, chunked_convolve, plan_chunks
from chunkfft.memory_model import MemoryBudget
from chunkfft.pipeline import (
    CSV_FIELDS,
    PhaseTimings,
    breakdown_percentages,
    flop_count,
    render_csv,
    render_markdown,
    run_instrumented,
    sweep,
)


def plan(n_x, n_h, c):
    return plan_chunks(n_x, n_h, ConvolutionConfig(chunk_size=c))


def test_flop_count_smallest():
    assert flop_count(plan(2, 2, 2)) == 3 * (5 * 4 * 2) + 6 * 4 + 3 == 147


def test_flop_count_single_8k_pair():
    assert flop_count(plan(8192, 8192, 8192)) == 3 * 5 * 16384 * 14 + 6 * 16384 + 16383 == 3_555_327


def test_flop_count_cache_equal_for_single_pair():
    p = plan(8192, 8192, 8192)
    assert flop_count(p, True) == flop_count(p, False)


def test_flop_count_cache_saves_filter_transforms():
    p = plan(4096, 1024, 1024)  # m_x = 4, m_h = 1
    fft = 5 * 2048 * 11
    assert flop_count(p, False) - flop_count(p, True) == (p.pair_count - p.m_h) * fft


def test_breakdown_reference_row():
    assert breakdown_percentages(PhaseTimings(98, 1.4, 0.6, 100)) == pytest.approx((98.0, 1.4, 0.6))


def test_breakdown_simple():
    assert breakdown_percentages(PhaseTimings(1, 1, 2, 4)) == pytest.approx((25, 25, 50))


def test_breakdown_equal_phases():
    assert breakdown_percentages(PhaseTimings(3, 3, 3, 9)) == pytest.approx((100 / 3,) * 3)


def test_breakdown_zero_total():
    with pytest.raises(ZeroDivisionError):
        breakdown_percentages(PhaseTimings(0, 0, 0, 0))


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0, 1e3))
def test_breakdown_sums_to_100(c, s, h):
    if c + s + h <= 0:
        return
    parts = breakdown_percentages(PhaseTimings(c, s, h, c + s + h))
    assert min(parts) >= 0
    assert sum(parts) == pytest.approx(100, abs=0.1)


def test_instrumented_identity_filter():
    x = np.arange(1, 20, dtype=np.float64)
    y, report = run_instrumented(x, [1.0], ConvolutionConfig(chunk_size=4, precision="double"), check=True)
    np.testing.assert_array_equal(y, x)
    assert report.max_abs_error == 0


def test_instrumented_report_fields(rng):
    x, h = rng.uniform(-1, 1, 3000), rng.uniform(-1, 1, 2000)
    cfg = ConvolutionConfig(chunk_size=256)
    y, report = run_instrumented(x, h, cfg, check=True)
    t = report.timings
    assert min(t.compute_s, t.staging_s, t.host_s) >= 0
    assert t.compute_s + t.staging_s + t.host_s <= t.total_s
    assert report.mflops * t.total_s * 1e6 == pytest.approx(report.flops, rel=1e-12)
    assert report.kernel_invocations == report.plan.pair_count
    assert report.bytes_staged > 0 and report.bandwidth_gbs > 0
    assert report.rel_l2_error < 1e-5
    # instrumentation is transparent
    np.testing.assert_array_equal(y, chunked_convolve(x, h, cfg))
    assert "pairs=" in report.summary()


def test_instrumented_flops_deterministic(rng):
    x, h = rng.standard_normal(1000), rng.standard_normal(1000)
    cfg = ConvolutionConfig(chunk_size=128)
    assert run_instrumented(x, h, cfg)[1].flops == run_instrumented(x, h, cfg)[1].flops


def test_oracle_skipped_above_limit(rng):
    x = rng.standard_normal(100)
    _, report = run_instrumented(x, x, ConvolutionConfig(chunk_size=16), check=True, oracle_limit=50)
    assert report.max_abs_error is None


def test_sweep_empty():
    result = sweep([], [2048, 4096])
    assert result.reports == {}
    assert render_csv(result).strip() == ",".join(CSV_FIELDS)


def test_sweep_plan_column():
    result = sweep([160_000], [8192], repeats=1, min_time=0)
    report = result.cell(160_000, 8192)
    assert report.plan.pair_count == 20 * 20 == 400
    rows = list(csv.DictReader(io.StringIO(render_csv(result))))
    assert rows[0]["pairs"] == "400"


def test_sweep_skips_over_budget():
    with pytest.warns(UserWarning):
        result = sweep([4096], [2048, 16, 16384], budget=MemoryBudget(100_000), repeats=1, min_time=0)
    assert set(result.reports) == {(4096, 2048), (4096, 16)}
    assert {(s, c) for s, c, _ in result.skipped} == {(4096, 16384)}


def test_sweep_time_ordering_32k():
    result = sweep([32_768], [2048, 4096, 8192])
    t = [result.cell(32_768, c).timings.total_s for c in (2048, 4096, 8192)]
    assert t[0] >= t[1] >= t[2]


def test_csv_and_markdown_same_numbers():
    result = sweep([4096, 8192], [512, 1024], repeats=1, min_time=0)
    rows = list(csv.DictReader(io.StringIO(render_csv(result))))
    assert len(rows) == 4
    md = render_markdown(result)
    for row in rows:
        r = result.cell(int(row["n_x"]), int(row["chunk_size"]))
        assert float(row["seconds"]) == pytest.approx(r.timings.total_s, abs=5e-7)
        assert float(row["mflops"]) == pytest.approx(r.mflops, abs=5e-4)
        assert f"{r.mflops:.1f}" in md
        pct = [float(row[k]) for k in ("compute_pct", "staging_pct", "host_pct")]
        assert sum(pct) == pytest.approx(100, abs=0.1)
    assert md.count("| 4K by 4K |") == 4
    assert "| 512 Chunk | 1K Chunk |" in md


def test_concurrent_sweep_warns():
    with pytest.warns(UserWarning, match="interfere"):
        result = sweep([2048], [256, 512], concurrent=True, repeats=1, min_time=0)
    assert len(result.reports) == 2


def test_sweep_repeats_and_median():
    result = sweep([1024], [64], repeats=5, min_time=0)
    assert (1024, 64) in result.reports


def test_sweep_rejects_zero_repeats():
    with pytest.raises(ValueError):
        sweep([1024], [64], repeats=0)


def test_sweep_keeps_check_errors_on_reported_run():
    result = sweep([2048], [256], repeats=3, min_time=0, check=True)
    assert result.cell(2048, 256).rel_l2_error < 1e-5
