"""Tests for PSNR, the MS-SSIM metric and the evaluation report."""

import csv
import math

import numpy as np
import pytest

from app.core.errors import ShapeError
from app.imaging import srgb_encode
from app.training.metrics import PSNR_CAP, REPORT_COLUMNS, EvalReport, msssim_metric, psnr


def naive_psnr(a, b):
    total, count = 0.0, 0
    for x, y in zip(a.reshape(-1), b.reshape(-1)):
        total += (x - y) ** 2
        count += 1
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / (total / count)))


class TestPsnr:
    def test_identical_images_hit_cap(self, rng):
        x = rng.uniform(size=(4, 4, 3))
        assert psnr(x, x) == PSNR_CAP == 99.0

    def test_known_value(self):
        assert psnr(np.zeros((4, 4, 3)), np.full((4, 4, 3), 0.1)) == pytest.approx(20.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_naive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        height, width = rng.integers(2, 9, size=2)
        a = rng.uniform(size=(height, width, 3))
        b = np.clip(a + rng.normal(0.0, rng.uniform(0.001, 0.3), a.shape), 0.0, 1.0)
        assert psnr(a, b) == pytest.approx(naive_psnr(a, b), rel=1e-9)

    def test_symmetric(self, rng):
        a, b = rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))
        assert psnr(a, b) == psnr(b, a)

    def test_decreases_with_noise(self, rng):
        clean = rng.uniform(0.2, 0.8, size=(16, 16, 3))
        noise = rng.normal(size=clean.shape)
        values = [psnr(clean + scale * noise, clean) for scale in (0.01, 0.03, 0.1)]
        assert values[0] > values[1] > values[2]

    def test_srgb_space_encodes_first(self, rng):
        a, b = rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))
        assert psnr(a, b, "srgb") == pytest.approx(psnr(srgb_encode(a), srgb_encode(b)), rel=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))

    def test_unknown_space_rejected(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), "lab")


class TestMsssimMetric:
    def test_identical_images(self, rng):
        x = rng.uniform(size=(16, 16, 3))
        assert msssim_metric(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_noisy_copy_scores_lower(self, rng):
        x = rng.uniform(size=(16, 16, 3))
        noisy = np.clip(x + rng.normal(scale=0.1, size=x.shape), 0.0, 1.0)
        assert msssim_metric(noisy, x) < 1.0


# =============================================================================
# Report
# =============================================================================


class TestEvalReport:
    @pytest.fixture
    def report(self, rng):
        report = EvalReport(fingerprint="abc123")
        targets = [rng.uniform(size=(16, 16, 3)) for _ in range(3)]
        for index, target in enumerate(targets):
            noisy = np.clip(target + rng.normal(scale=0.02 * (index + 1), size=target.shape), 0.0, 1.0)
            report.add(f"img{index}", "model", noisy, target)
            report.add(f"img{index}", "baseline", target, target)
        return report

    def test_tags_in_insertion_order(self, report):
        assert report.tags == ["model", "baseline"]

    def test_aggregate_is_arithmetic_mean(self, report):
        rows = [row for row in report.rows if row.tag == "model"]
        means = report.aggregate("model")
        assert means["psnr_linear"] == pytest.approx(np.mean([r.psnr_linear for r in rows]), rel=1e-12)
        assert means["ms_ssim"] == pytest.approx(np.mean([r.ms_ssim for r in rows]), rel=1e-12)

    def test_perfect_rows(self, report):
        means = report.aggregate("baseline")
        assert means["psnr_linear"] == 99.0 and means["psnr_srgb"] == 99.0
        assert means["ms_ssim"] == pytest.approx(1.0, abs=1e-12)

    def test_unknown_tag_rejected(self, report):
        with pytest.raises(ValueError):
            report.aggregate("absent")

    def test_csv_layout(self, report, tmp_path):
        path = report.to_csv(tmp_path / "out" / "report.csv")
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == REPORT_COLUMNS
        assert len(rows) == 1 + 6 + 2
        assert [row[:2] for row in rows[-2:]] == [["mean", "model"], ["mean", "baseline"]]
        assert float(rows[-2][2]) == report.aggregate("model")["psnr_linear"]

    def test_summary_mentions_each_tag(self, report):
        text = report.summary()
        assert "abc123" in text
        assert "model" in text and "baseline" in text
