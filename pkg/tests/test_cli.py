import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from chunkfft import cli
from chunkfft.data_io import read_samples, write_samples


@pytest.fixture
def inputs(tmp_path, rng):
    x, h = rng.uniform(-1, 1, 3000), rng.uniform(-1, 1, 1000)
    write_samples(tmp_path / "a.cfft", x)
    write_samples(tmp_path / "b.cfft", h)
    return tmp_path, x, h


FAST = ["--repeats", "1", "--min-time", "0"]


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_convolve_writes_full_length(inputs, capsys):
    d, x, h = inputs
    code, out, _ = run(["convolve", "--x", str(d / "a.cfft"), "--h", str(d / "b.cfft"),
                        "--chunk", "512", "--out", str(d / "y.cfft"), "--check"], capsys)
    assert code == 0
    y = read_samples(d / "y.cfft")
    assert len(y) == 3000 + 1000 - 1
    assert y.dtype == np.float32
    assert "pairs=" in out and "rel_l2=" in out


def test_convolve_causal(inputs, capsys):
    d, x, _ = inputs
    code, _, _ = run(["convolve", "--x", str(d / "a.cfft"), "--h", str(d / "b.cfft"), "--chunk", "256",
                      "--causal", "--precision", "double", "--out", str(d / "y.cfft")], capsys)
    assert code == 0
    y = read_samples(d / "y.cfft")
    assert len(y) == len(x) and y.dtype == np.float64


def test_convolve_bad_chunk_is_usage_error(inputs, capsys):
    d, _, _ = inputs
    with pytest.raises(SystemExit) as exc:
        cli.main(["convolve", "--x", str(d / "a.cfft"), "--chunk", "3000", "--out", str(d / "y.cfft")])
    assert exc.value.code == 2
    assert "chunk size must be a power of two" in capsys.readouterr().err


def test_convolve_missing_file_exits_1(tmp_path, capsys):
    code, _, err = run(["convolve", "--x", str(tmp_path / "none.cfft"), "--out", str(tmp_path / "y")], capsys)
    assert code == 1 and "chunkfft convolve" in err


def test_convolve_budget_violation_exits_1(inputs, capsys):
    d, _, _ = inputs
    code, _, err = run(["convolve", "--x", str(d / "a.cfft"), "--chunk", "64", "--budget", "80",
                        "--out", str(d / "y.cfft")], capsys)
    assert code == 1 and "budget" in err


def test_convolve_fasta_with_generated_filter(tmp_path, capsys):
    fa = tmp_path / "g.fa"
    fa.write_text(">chr\n" + "ACGT" * 50 + "\n")
    code, _, _ = run(["convolve", "--x-fasta", str(fa), "--region", "10:100", "--h-seed", "4",
                      "--chunk", "32", "--out", str(tmp_path / "y.cfft")], capsys)
    assert code == 0
    assert len(read_samples(tmp_path / "y.cfft")) == 199


def test_verify_passes(capsys):
    code, out, _ = run(["verify", "--sizes", "1,100,700", "--chunks", "4,64"], capsys)
    assert code == 0
    assert out.count(" ok") == 6


def test_verify_double(capsys):
    code, out, _ = run(["verify", "--sizes", "300", "--chunks", "16", "--precision", "double"], capsys)
    assert code == 0 and "1e-12" in out


def test_verify_detects_corruption(monkeypatch, capsys):
    real = cli.run_instrumented

    def corrupted(x, h, cfg, check=False):
        y, report = real(x, h, cfg, check=check)
        report.rel_l2_error = 1e-3
        return y, report

    monkeypatch.setattr(cli, "run_instrumented", corrupted)
    code, out, _ = run(["verify", "--sizes", "64", "--chunks", "16"], capsys)
    assert code == 1 and "FAILED" in out and "worst" in out


def test_verify_per_pair_mode(capsys):
    code, out, _ = run(["verify", "--sizes", "200", "--chunks", "8", "--pair-batch", "1"], capsys)
    assert code == 0 and " ok" in out


def test_negative_pair_batch_is_usage_error(inputs, capsys):
    d, _, _ = inputs
    with pytest.raises(SystemExit) as exc:
        cli.main(["convolve", "--x", str(d / "a.cfft"), "--out", str(d / "y.cfft"), "--pair-batch", "-2"])
    assert exc.value.code == 2


def test_convolve_batched_matches_per_pair(inputs, capsys):
    d, x, h = inputs
    outs = []
    for batch in ("1", "0"):
        code, _, _ = run(["convolve", "--x", str(d / "a.cfft"), "--h", str(d / "b.cfft"), "--chunk", "64",
                          "--precision", "double", "--pair-batch", batch, "--out", str(d / f"y{batch}.cfft")],
                         capsys)
        assert code == 0
        outs.append(read_samples(d / f"y{batch}.cfft"))
    np.testing.assert_allclose(outs[0], outs[1], rtol=0, atol=1e-9)


def test_bench_repeats_flags(capsys):
    code, out, _ = run(["bench", "--sizes", "1024", "--chunks", "256", "--repeats", "2", "--min-time", "0",
                        "--format", "csv"], capsys)
    assert code == 0 and len(list(csv.DictReader(io.StringIO(out)))) == 1


def test_verify_size_cap(capsys):
    code, _, err = run(["verify", "--sizes", "100K"], capsys)
    assert code == 2 and "cap" in err


def test_bench_markdown_layout(capsys):
    code, out, _ = run(["bench", *FAST, "--sizes", "4096", "--chunks", "1024,512,256"], capsys)
    assert code == 0
    assert out.count("| Dataset Size | 1K Chunk | 512 Chunk | 256 Chunk |") == 4
    assert out.count("| 4K by 4K |") == 4


def test_bench_csv_round_trips(capsys):
    code, out, _ = run(["bench", *FAST, "--sizes", "4K,2K", "--chunks", "512,1024", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 4
    assert {int(r["n_x"]) for r in rows} == {4000, 2000}
    for r in rows:
        for key in ("seconds", "mflops", "compute_pct", "staging_pct", "host_pct", "bandwidth_gbs"):
            assert f"{float(r[key]):.{len(r[key].split('.')[1])}f}" == r[key]


def test_bench_k_binary(capsys):
    code, out, _ = run(["bench", *FAST, "--sizes", "4K", "--chunks", "1024", "--format", "csv", "--k-binary"], capsys)
    assert code == 0
    assert list(csv.DictReader(io.StringIO(out)))[0]["n_x"] == "4096"


def test_bench_budget_skips_everything(capsys):
    code, _, err = run(["bench", *FAST, "--sizes", "32768", "--chunks", "2048,4096,8192", "--budget", "100"], capsys)
    assert code == 1
    assert "skipped" in err


def test_bench_env_budget(monkeypatch, capsys):
    monkeypatch.setenv("CHUNKFFT_BUDGET", "100")
    code, _, _ = run(["bench", *FAST, "--sizes", "1024", "--chunks", "256"], capsys)
    assert code == 1


def test_bench_fasta_input(tmp_path, capsys):
    fa = tmp_path / "g.fa"
    fa.write_text(">chr\n" + "ACGTTGCA" * 300 + "\n")
    code, out, _ = run(["bench", *FAST, "--fasta", str(fa), "--sizes", "2000", "--chunks", "256", "--format", "csv"],
                       capsys)
    assert code == 0 and "2000" in out


def test_budget_u200(capsys):
    code, out, _ = run(["budget", "--capacity", "2.8MB"], capsys)
    assert code == 0
    assert "max chunk size (unclamped): 65536" in out
    assert "max chunk size (engine clamp 8192): 8192" in out


def test_budget_tiny(capsys):
    code, out, _ = run(["budget", "--capacity", "80"], capsys)
    assert code == 0 and "max chunk size (unclamped): 2" in out


def test_budget_double_halves(capsys):
    _, single, _ = run(["budget", "--capacity", "2.8MB"], capsys)
    _, double, _ = run(["budget", "--capacity", "2.8MB", "--precision", "double"], capsys)
    assert "max chunk size (unclamped): 65536" in single
    assert "max chunk size (unclamped): 32768" in double


def test_budget_too_small_exits_1(capsys):
    code, _, err = run(["budget", "--capacity", "10"], capsys)
    assert code == 1


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# bench settings\nsizes = 2048\nchunks = 256\nformat = csv\nk-binary = true\n")
    code, out, _ = run(["bench", *FAST, "--config", str(cfg)], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [(r["n_x"], r["chunk_size"]) for r in rows] == [("2048", "256")]
    code, out, _ = run(["bench", *FAST, "--config", str(cfg), "--chunks", "512"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["chunk_size"] for r in rows] == ["512"]


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("warp = 9\n")
    with pytest.raises(SystemExit) as exc:
        cli.main(["budget", "--config", str(cfg)])
    assert exc.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chunkfft", "budget", "--capacity", "80"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "max chunk size" in proc.stdout
