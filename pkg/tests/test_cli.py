import json

import numpy as np
import pytest
from PIL import Image

from cascadic import __version__
from cascadic.benchmark import CSV_COLUMNS, BenchmarkConfig, parse_csv, rows_to_csv, run_benchmark
from cascadic.cli import main
from cascadic.degradation import apply_blur, gaussian_psf
from cascadic.imageio import read_image, read_png, to_uint8, write_png
from cascadic.metrics import psnr
from cascadic.oracle import perturbed_kernel, run_checks
from cascadic.synthetic import checkerboard
from cascadic.tensor import load_eten, save_eten


def _save_png(path, X):
    Image.fromarray(to_uint8(X)).save(path)


# -- image I/O -----------------------------------------------------------------


def test_png_roundtrip_lossless(tmp_path):
    q = np.random.default_rng(0).integers(0, 256, (5, 7, 3))
    X = q / 255.0
    write_png(tmp_path / "x.png", X)
    np.testing.assert_array_equal(read_png(tmp_path / "x.png"), X)


def test_png_grayscale_roundtrip(tmp_path):
    X = np.arange(12).reshape(3, 4, 1) / 255.0
    write_png(tmp_path / "g.png", X)
    np.testing.assert_array_equal(read_png(tmp_path / "g.png"), X)


def test_quantization_clamps_and_rounds_half_up():
    np.testing.assert_array_equal(to_uint8([-0.5, 0.0, 0.5 / 255, 1.5 / 255, 1.0, 7.0]), [0, 0, 1, 2, 255, 255])


def test_read_image_dispatch(tmp_path):
    X = np.random.default_rng(1).random((4, 4, 3))
    save_eten(tmp_path / "x.bin", X)
    np.testing.assert_array_equal(read_image(tmp_path / "x.bin"), X)
    write_png(tmp_path / "x.png", X)
    assert read_image(tmp_path / "x.png").shape == (4, 4, 3)


# -- blur and restore commands ----------------------------------------------------


@pytest.fixture()
def board_png(tmp_path):
    path = tmp_path / "board.png"
    _save_png(path, checkerboard(32, 32))
    return path


def test_blur_noise_free_matches_apply_blur(tmp_path, board_png):
    out = tmp_path / "g.eten"
    assert main(["blur", "--input", str(board_png), "--sigma", "0.7", "--noise", "0", "--out-eten", str(out)]) == 0
    F = read_png(board_png)
    assert load_eten(out).tobytes() == apply_blur(gaussian_psf(0.7), F).tobytes()


def test_blur_same_seed_same_bytes(tmp_path, board_png):
    a, b = tmp_path / "a.eten", tmp_path / "b.eten"
    for out in (a, b):
        main(["blur", "--input", str(board_png), "--sigma", "0.8", "--noise", "0.001", "--seed", "5", "--out-eten", str(out)])
    assert a.read_bytes() == b.read_bytes()


def test_wider_blur_lower_psnr(tmp_path, board_png):
    F = read_png(board_png)
    scores = []
    for sigma in ("0.7", "0.9"):
        out = tmp_path / f"g{sigma}.eten"
        main(["blur", "--input", str(board_png), "--sigma", sigma, "--out-eten", str(out)])
        scores.append(psnr(F, load_eten(out)))
    assert scores[1] < scores[0]


def test_blur_png_is_clamped(tmp_path, board_png):
    png = tmp_path / "g.png"
    main(["blur", "--input", str(board_png), "--sigma", "0.7", "--noise", "0.5", "--out-png", str(png)])
    assert read_png(png).max() <= 1.0


def test_blur_rejects_indivisible(tmp_path):
    path = tmp_path / "odd.png"
    _save_png(path, checkerboard(20, 20))
    assert main(["blur", "--input", str(path), "--sigma", "0.7", "--levels", "4", "--out-eten", str(tmp_path / "x")]) == 2


def test_restore_baseline_recovers_noise_free(tmp_path, board_png):
    g, ref = tmp_path / "g.eten", tmp_path / "f.eten"
    main(["blur", "--input", str(board_png), "--sigma", "0.7", "--out-eten", str(g), "--reference-out", str(ref)])
    report = tmp_path / "r.json"
    rc = main(
        ["restore", "--method", "baseline", "--smoother", "cr", "--input", str(g), "--sigma", "0.7",
         "--rel-tol", "1e-8", "--reference", str(board_png), "--out-png", str(tmp_path / "r.png"),
         "--out-eten", str(tmp_path / "r.eten"), "--report", str(report)]
    )
    assert rc == 0
    doc = json.loads(report.read_text())
    assert doc["version"] == __version__
    assert doc["config"]["method"] == "baseline" and doc["config"]["rel_tol"] == 1e-8
    assert doc["result"]["re"] < 1e-3
    assert report.with_suffix(".txt").read_text().startswith(f"cascadic {__version__}")
    assert load_eten(tmp_path / "r.eten").shape == (32, 32, 3)


@pytest.mark.parametrize("method", ["ctmg", "ectmg"])
def test_restore_cascade_report(tmp_path, board_png, method):
    g = tmp_path / "g.eten"
    main(["blur", "--input", str(board_png), "--sigma", "0.9", "--noise", "0.001", "--out-eten", str(g)])
    report = tmp_path / "r.json"
    rc = main(["restore", "--method", method, "--smoother", "cgs", "--levels", "3", "--input", str(g), "--sigma", "0.9",
               "--pm-iters", "5", "--report", str(report)])
    assert rc == 0
    doc = json.loads(report.read_text())
    assert doc["config"]["pm"] == {"iters": 5}
    assert doc["result"]["settings"]["pm"]["iters"] == 5
    assert len(doc["result"]["iters_per_level"]) == 2
    assert "psnr_db" not in doc["result"]


def test_restore_rejects_bad_config(tmp_path):
    X = tmp_path / "x.eten"
    save_eten(X, np.ones((8, 8, 3)))
    assert main(["restore", "--input", str(X), "--sigma", "-1"]) == 2
    assert main(["restore", "--input", str(X), "--sigma", "0.7", "--tau", "0.5"]) == 2


# -- benchmark --------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_rows():
    cfg = BenchmarkConfig(images=("shapes",), size=32, levels=3)
    return cfg, run_benchmark(cfg)


def test_benchmark_cardinality_and_order(small_rows):
    cfg, rows = small_rows
    assert len(rows) == 27
    keys = [(r.sigma, r.method, r.smoother) for r in rows]
    assert keys == [(s, m, k) for s in cfg.sigmas for m in cfg.methods for k in cfg.smoothers]
    assert all(r.error is None for r in rows)


def test_benchmark_economic_cheaper(small_rows):
    _, rows = small_rows
    by = {(r.sigma, r.method, r.smoother): r for r in rows}
    for (sigma, method, smoother), r in by.items():
        if method == "ectmg":
            assert sum(r.iters_per_level) <= sum(by[(sigma, "ctmg", smoother)].iters_per_level)


def test_benchmark_csv_roundtrip(small_rows):
    _, rows = small_rows
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    parsed = parse_csv(text)
    for r, p in zip(rows, parsed):
        assert p["re"] == r.re and p["psnr_db"] == r.psnr and p["cpu_seconds"] == r.cpu_seconds
        assert p["iters_per_level"] == r.iters_per_level
    assert rows_to_csv(rows) == text


def test_benchmark_records_failures():
    cfg = BenchmarkConfig(images=("shapes", "/nonexistent.png"), sigmas=(0.8,), methods=("ctmg",), smoothers=("cr",), size=32, levels=3)
    rows = run_benchmark(cfg)
    assert rows[0].error is None
    assert rows[1].error is not None and "nan" in rows_to_csv(rows).splitlines()[2]


def test_benchmark_command(tmp_path):
    out = tmp_path / "b.csv"
    rc = main(["benchmark", "--images", "texture", "--sigmas", "0.8", "--size", "32", "--levels", "3", "--out", str(out)])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 10
    traces = json.loads(out.with_suffix(".traces.json").read_text())
    assert traces["version"] == __version__ and len(traces["rows"]) == 9
    cr = [r for r in traces["rows"] if r["smoother"] == "cr"]
    for row in cr:
        for h in row["residual_histories"]:
            assert all(b <= a * (1 + 1e-12) for a, b in zip(h, h[1:]))


# -- oracle -----------------------------------------------------------------------


def test_oracle_passes(capsys):
    assert main(["oracle"]) == 0
    first = capsys.readouterr().out
    main(["oracle"])
    second = capsys.readouterr().out
    names = lambda s: [line.split()[1] for line in s.splitlines()[:-1]]
    assert names(first) == names(second)
    assert len(names(first)) == 11


def test_oracle_negative_control():
    results = {r.name: r.passed for r in run_checks(perturbed_kernel(1e-6))}
    assert not results["blur_dense_equivalence[sigma=0.7]"]
    assert results["unfold_homomorphism"]
    assert main(["oracle", "--perturb-kernel", "1e-6"]) == 1
