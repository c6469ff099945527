"""Sidecar generation and the end-to-end hop into the producer's metrics."""

import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from trainer_adapter import AdapterError, compute_lpips_sidecar, perceptual_backend


def write_png(path, image):
    Image.fromarray(np.round(np.clip(image, 0, 1) * 255).astype(np.uint8)).save(path)


@pytest.fixture(scope="module")
def image_pair_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("pairs")
    pred, gt = root / "pred", root / "gt"
    pred.mkdir(), gt.mkdir()
    rng = np.random.default_rng(9)
    for i in range(3):
        image = rng.random((32, 32, 3))
        write_png(gt / f"img_{i}.png", image)
        noise = rng.normal(0.0, 0.05 * (i + 1), image.shape)
        write_png(pred / f"img_{i}.png", image + noise)
    return pred, gt


class TestSidecar:
    def test_identical_images_score_near_zero(self, image_pair_dirs, tmp_path):
        _, gt = image_pair_dirs
        out = compute_lpips_sidecar(gt, gt, tmp_path / "same.csv")
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["filename", "lpips"]
        assert len(rows) == 4
        for _, value in rows[1:]:
            assert 0.0 <= float(value) < 1e-3

    def test_noise_scores_above_identity(self, image_pair_dirs, tmp_path):
        pred, gt = image_pair_dirs
        out = compute_lpips_sidecar(pred, gt, tmp_path / "noisy.csv")
        with open(out, newline="") as fh:
            values = {row[0]: float(row[1]) for row in list(csv.reader(fh))[1:]}
        assert all(v > 1e-3 for v in values.values())
        # heavier noise reads as perceptually farther
        assert values["img_2.png"] > values["img_0.png"]

    def test_deterministic_across_runs(self, image_pair_dirs, tmp_path):
        pred, gt = image_pair_dirs
        a = compute_lpips_sidecar(pred, gt, tmp_path / "a.csv").read_bytes()
        b = compute_lpips_sidecar(pred, gt, tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_unmatched_files_listed(self, image_pair_dirs, tmp_path):
        pred, gt = image_pair_dirs
        lop = tmp_path / "lop"
        shutil.copytree(pred, lop)
        write_png(lop / "stray.png", np.zeros((8, 8, 3)))
        with pytest.raises(AdapterError, match="stray.png"):
            compute_lpips_sidecar(lop, gt, tmp_path / "x.csv")

    def test_backend_is_stable_for_the_process(self):
        assert perceptual_backend() is perceptual_backend()


class TestMetricsIntegration:
    def test_sidecar_feeds_the_producer_metrics_command(self, image_pair_dirs, tmp_path):
        pred, gt = image_pair_dirs
        sidecar = compute_lpips_sidecar(pred, gt, tmp_path / "lpips.csv")
        report_path = tmp_path / "report.json"
        result = subprocess.run(
            [sys.executable, "-m", "viewaug.cli", "metrics",
             "--pred", str(pred), "--gt", str(gt),
             "--lpips", str(sidecar), "--out", str(report_path)],
            capture_output=True, text=True,
        )
        assert result.returncode == 0, result.stderr[-1000:]
        header = result.stdout.splitlines()[0]
        assert "avge" in header and "lpips" in header
        report = json.loads(report_path.read_text())
        for name, row in report["images"].items():
            assert set(row) == {"psnr", "ssim", "lpips", "avge"}
            assert row["avge"] > 0.0
