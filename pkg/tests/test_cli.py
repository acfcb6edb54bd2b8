import json

import numpy as np
import pytest

import grmf.cli as cli
from grmf import load_csv_matrix, load_pgm, save_pgm, synth_lowrank
from grmf.core import NumericalError


def run(args):
    return cli.main(args)


def test_synth_writes_matrix_and_truth(tmp_path):
    out = tmp_path / "y.pgm"
    tu = tmp_path / "u.csv"
    tv = tmp_path / "v.csv"
    code = run([
        "synth", "--d", "16", "--n", "12", "--rank", "3", "--groups", "2",
        "--zero-frac", "0.25", "--seed", "7",
        "--out", str(out), "--truth-u", str(tu), "--truth-v", str(tv),
    ])
    assert code == 0
    y = load_pgm(out)
    assert y.shape == (16, 12)
    assert load_csv_matrix(tu).shape == (16, 3)
    assert load_csv_matrix(tv).shape == (12, 3)


def test_corrupt_roundtrip(tmp_path):
    src = tmp_path / "in.pgm"
    dst = tmp_path / "out.pgm"
    y, _ = synth_lowrank(12, 10, 2, 2, seed=3)
    save_pgm(src, y)
    code = run(["corrupt", "--input", str(src), "--ratio", "0.5", "--seed", "42",
                "--output", str(dst)])
    assert code == 0
    orig = load_pgm(src)
    out = load_pgm(dst)
    assert out.shape == orig.shape
    assert (out != orig).sum() <= 60  # exactly floor(0.5*120) minus collisions
    assert (out != orig).sum() >= 40


def test_factorize_tsvd_and_grmf(tmp_path):
    src = tmp_path / "in.csv"
    y, _ = synth_lowrank(14, 12, 2, 2, seed=4)
    np.savetxt(src, y, delimiter=",")
    for variant in ("tsvd", "grmf"):
        out_u = tmp_path / f"{variant}_u.csv"
        out_v = tmp_path / f"{variant}_v.csv"
        metrics = tmp_path / f"{variant}_m.json"
        code = run([
            "factorize", "--input", str(src), "--rank", "2", "--variant", variant,
            "--out-u", str(out_u), "--out-v", str(out_v), "--metrics", str(metrics),
        ])
        assert code == 0
        assert load_csv_matrix(out_u).shape == (14, 2)
        assert load_csv_matrix(out_v).shape == (12, 2)
        payload = json.loads(metrics.read_text())
        assert payload["variant"] == variant
        assert 0 <= payload["relative_mae_vs_input"] <= 1.5


def test_factorize_flags_override_config(tmp_path):
    src = tmp_path / "in.csv"
    y, _ = synth_lowrank(10, 8, 2, 2, seed=5)
    np.savetxt(src, y, delimiter=",")
    cfg = tmp_path / "run.toml"
    cfg.write_text('rank = 2\nvariant = "tsvd"\nmax_alt = 2\n')
    metrics = tmp_path / "m.json"
    # config supplies rank/variant; the explicit flag overrides the variant
    code = run(["factorize", "--input", str(src), "--variant", "grmf",
                "--metrics", str(metrics), "--config", str(cfg)])
    assert code == 0
    assert json.loads(metrics.read_text())["variant"] == "grmf"


def test_sweep_from_config(tmp_path):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(
        "\n".join([
            'variants = ["tsvd"]',
            "ranks = [2, 3]",
            "ratios = [0.0, 0.5]",
            "seeds = [0]",
            "synth_d = 12",
            "synth_n = 10",
            "synth_rank = 3",
            "synth_groups = 2",
            "synth_seed = 5",
        ])
    )
    out = tmp_path / "results.csv"
    summary = tmp_path / "summary.json"
    code = run(["sweep", "--config", str(cfg), "--out", str(out), "--summary", str(summary)])
    assert code == 0
    assert len(out.read_text().splitlines()) == 5
    assert "tsvd|rank=2|ratio=0" in json.loads(summary.read_text())


def test_usage_errors_exit_one(tmp_path):
    assert run(["factorize", "--no-such-flag"]) == 1
    assert run(["factorize"]) == 1  # missing required input
    assert run([]) == 1
    # rank out of range for the data counts as a usage error
    src = tmp_path / "small.csv"
    np.savetxt(src, np.ones((3, 3)), delimiter=",")
    assert run(["factorize", "--input", str(src), "--rank", "9", "--variant", "tsvd"]) == 1


def test_parse_errors_exit_two(tmp_path):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P9\nnope\n")
    assert run(["corrupt", "--input", str(bad), "--ratio", "0.1", "--output",
                str(tmp_path / "o.pgm")]) == 2
    assert run(["corrupt", "--input", str(tmp_path / "missing.pgm"), "--ratio", "0.1",
                "--output", str(tmp_path / "o.pgm")]) == 2


def test_numerical_failures_exit_three(tmp_path, monkeypatch):
    src = tmp_path / "in.csv"
    np.savetxt(src, np.ones((6, 5)) * 7, delimiter=",")

    def boom(*args, **kwargs):
        raise NumericalError("synthetic blowup")

    monkeypatch.setattr(cli, "fit", boom)
    code = run(["factorize", "--input", str(src), "--rank", "2", "--variant", "grmf"])
    assert code == 3


def test_help_exits_zero():
    assert run(["--help"]) == 0
