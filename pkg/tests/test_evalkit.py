"""Metric oracles, report assembly, and spectral fixture invariants."""

import numpy as np
import pytest

from skygan.colorcue import span_channels
from skygan.evalkit import (
    FIXTURE_SMOOTHNESS_BOUND,
    EvalReport,
    PSNR_CAP_DB,
    evaluate,
    gaussian_window,
    make_spectral_fixtures,
    psnr,
    ssim,
)
from skygan.hazegen import build_dataset
from skygan.imagecore import ImageTensor, save_image


def naive_psnr(a, b):
    mse = np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2)
    return 120.0 if mse < 1e-12 else 10.0 * np.log10(1.0 / mse)


def naive_ssim(a, b):
    """Sliding-window reference: explicit weighted stats per 11×11 window."""
    k1d = gaussian_window()
    kernel = np.outer(k1d, k1d)
    c1, c2 = 0.01**2, 0.03**2
    per_channel = []
    for ch in range(a.channels):
        x = a.data[..., ch].astype(np.float64)
        y = b.data[..., ch].astype(np.float64)
        h, w = x.shape
        scores = []
        for i in range(h - 10):
            for j in range(w - 10):
                wx = x[i : i + 11, j : j + 11]
                wy = y[i : i + 11, j : j + 11]
                mu_x = (kernel * wx).sum()
                mu_y = (kernel * wy).sum()
                var_x = (kernel * wx * wx).sum() - mu_x**2
                var_y = (kernel * wy * wy).sum() - mu_y**2
                cov = (kernel * wx * wy).sum() - mu_x * mu_y
                scores.append(
                    ((2 * mu_x * mu_y + c1) * (2 * cov + c2))
                    / ((mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2))
                )
        per_channel.append(np.mean(scores))
    return float(np.mean(per_channel))


class TestPsnr:
    def test_identical_hits_cap(self):
        rng = np.random.default_rng(0)
        img = ImageTensor(rng.random((16, 16, 3)))
        assert psnr(img, img) == PSNR_CAP_DB

    def test_zero_vs_one_is_zero_db(self):
        a = ImageTensor(np.zeros((8, 8, 3)))
        b = ImageTensor(np.ones((8, 8, 3)))
        assert psnr(a, b) == 0.0

    def test_half_offset(self):
        a = ImageTensor(np.zeros((8, 8, 3)))
        b = ImageTensor(np.full((8, 8, 3), 0.5))
        assert abs(psnr(a, b) - 10.0 * np.log10(4.0)) < 1e-12

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a = ImageTensor(rng.random((12, 12, 3)))
        b = ImageTensor(rng.random((12, 12, 3)))
        assert psnr(a, b) == psnr(b, a)

    def test_decreases_with_noise_amplitude(self):
        rng = np.random.default_rng(2)
        base = rng.random((32, 32, 3)) * 0.5 + 0.25
        img = ImageTensor(base)
        values = []
        for amp in (0.02, 0.08, 0.2):
            noisy = ImageTensor(np.clip(base + rng.uniform(-amp, amp, base.shape), 0, 1))
            values.append(psnr(img, noisy))
        assert values[0] > values[1] > values[2]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            psnr(ImageTensor(np.zeros((8, 8, 3))), ImageTensor(np.zeros((8, 9, 3))))


class TestSsim:
    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(3)
        img = ImageTensor(rng.random((24, 24, 3)))
        assert abs(ssim(img, img) - 1.0) < 1e-12

    def test_constant_images_closed_form(self):
        a = ImageTensor(np.zeros((16, 16, 3)))
        b = ImageTensor(np.ones((16, 16, 3)))
        expected = 1e-4 / (1.0 + 1e-4)
        assert abs(ssim(a, b) - expected) < 1e-12

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(3):
            a = ImageTensor(rng.random((20, 18, 3)))
            b = ImageTensor(np.clip(a.data + rng.normal(0, 0.1, a.data.shape), 0, 1))
            assert abs(ssim(a, b) - naive_ssim(a, b)) < 1e-6

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        a = ImageTensor(rng.random((16, 16, 3)))
        b = ImageTensor(rng.random((16, 16, 3)))
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12

    def test_in_range(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            a = ImageTensor(rng.random((16, 16, 3)))
            b = ImageTensor(rng.random((16, 16, 3)))
            assert -1.0 <= ssim(a, b) <= 1.0

    def test_too_small(self):
        with pytest.raises(ValueError, match="window"):
            ssim(ImageTensor(np.zeros((10, 16, 3))), ImageTensor(np.zeros((10, 16, 3))))

    def test_requires_three_channels(self):
        with pytest.raises(ValueError):
            ssim(ImageTensor(np.zeros((16, 16, 1))), ImageTensor(np.zeros((16, 16, 1))))


def _toy_manifest(tmp_path, n_sources=1, size=16, levels=(1, 3)):
    src = tmp_path / "src"
    src.mkdir(exist_ok=True)
    rng = np.random.default_rng(9)
    for i in range(n_sources):
        save_image(ImageTensor(rng.random((size, size, 3))), src / f"s{i}.png")
    return build_dataset(src, tmp_path / "data", set(levels), size, size, seed=4)


class TestEvaluate:
    def test_identity_dehazer_equals_baseline(self, tmp_path):
        manifest = _toy_manifest(tmp_path)
        report = evaluate(manifest, lambda img: img, root=tmp_path / "data")
        dehazed = sorted(
            (r["source_id"], r["level"], r["psnr"], r["ssim"])
            for r in report.rows
            if r["kind"] == "dehazed"
        )
        original = sorted(
            (r["source_id"], r["level"], r["psnr"], r["ssim"])
            for r in report.rows
            if r["kind"] == "original"
        )
        assert dehazed == original
        assert not report.warnings

    def test_row_and_aggregate_counts(self, tmp_path):
        manifest = _toy_manifest(tmp_path, levels=(1, 2, 3))
        report = evaluate(manifest, lambda img: img, root=tmp_path / "data")
        assert sum(r["kind"] == "dehazed" for r in report.rows) == 3
        aggs = report.aggregates()
        # one aggregate per (kind, level) plus one overall per kind
        assert sum(a["kind"] == "dehazed" and a["level"] is not None for a in aggs) == 3
        assert sum(a["kind"] == "dehazed" and a["level"] is None for a in aggs) == 1

    def test_aggregates_recompute_from_rows(self, tmp_path):
        manifest = _toy_manifest(tmp_path, n_sources=2, levels=(1, 2))
        report = evaluate(manifest, lambda img: img, root=tmp_path / "data")
        for agg in report.aggregates():
            rows = [
                r
                for r in report.rows
                if r["kind"] == agg["kind"]
                and (agg["level"] is None or r["level"] == agg["level"])
            ]
            assert agg["count"] == len(rows)
            assert abs(agg["mean_psnr"] - np.mean([r["psnr"] for r in rows])) < 1e-12
            assert abs(agg["mean_ssim"] - np.mean([r["ssim"] for r in rows])) < 1e-12

    def test_missing_files_warn_and_continue(self, tmp_path):
        manifest = _toy_manifest(tmp_path, n_sources=2, levels=(1,))
        victim = tmp_path / "data" / manifest.pairs[0].hazy_path
        victim.unlink()
        report = evaluate(manifest, lambda img: img, root=tmp_path / "data")
        assert len(report.warnings) == 1
        assert sum(r["kind"] == "dehazed" for r in report.rows) == 1

    def test_serializations(self, tmp_path):
        manifest = _toy_manifest(tmp_path)
        report = evaluate(manifest, lambda img: img, root=tmp_path / "data")
        assert '"aggregates"' in report.to_json()
        text = report.to_text()
        assert "SSIM" in text and "PSNR" in text
        csv = report.to_csv()
        assert csv.splitlines()[0] == "kind,source_id,level,psnr,ssim"
        assert len(csv.splitlines()) == 1 + len(report.rows)


class TestFixtures:
    def test_deterministic(self):
        a = make_spectral_fixtures(2, 16, 16, seed=3)
        b = make_spectral_fixtures(2, 16, 16, seed=3)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.cube.data, fb.cube.data)

    def test_band_smoothness_bound(self):
        for fixture in make_spectral_fixtures(4, 24, 24, seed=5):
            diffs = np.abs(np.diff(fixture.cube.data.astype(np.float64), axis=-1))
            assert diffs.max() <= FIXTURE_SMOOTHNESS_BOUND

    def test_rgb_projection_matches_anchor_bands(self):
        fixture = make_spectral_fixtures(1, 8, 8, seed=6)[0]
        assert np.array_equal(fixture.rgb.data, fixture.cube.data[..., [25, 15, 5]])

    def test_respanned_projection_within_convex_bounds(self):
        fixture = make_spectral_fixtures(1, 12, 12, seed=7)[0]
        spanned = span_channels(fixture.rgb)
        lo = fixture.rgb.data.min(axis=-1, keepdims=True)
        hi = fixture.rgb.data.max(axis=-1, keepdims=True)
        assert np.all(spanned.data >= lo - 1e-7)
        assert np.all(spanned.data <= hi + 1e-7)

    def test_count_validation(self):
        with pytest.raises(ValueError):
            make_spectral_fixtures(0, 8, 8, seed=0)
