"""LPIPS sidecar generation for the producer's metrics command.

When the `lpips` package is importable and can build its network (it
fetches backbone weights on first use, which offline boxes cannot), the
sidecar carries real LPIPS. Otherwise a deterministic stand-in runs: a
fixed-seed bank of random convolutional features compared across scales.
That distance is zero for identical images, grows with perceptual
difference, and never varies between runs, which is what the metrics
pipeline needs from the column; absolute values are not comparable to
published LPIPS numbers.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate

from .errors import AdapterError

_SCALES = 3
_FILTERS = 8
_KERNEL = 3


def _feature_bank() -> np.ndarray:
    rng = np.random.default_rng(408121)
    bank = rng.normal(size=(_FILTERS, _KERNEL, _KERNEL, 3))
    norms = np.sqrt((bank * bank).sum(axis=(1, 2, 3), keepdims=True))
    return bank / norms


class RandomFeatureDistance:
    """Fixed random projections standing in for a learned perceptual net."""

    name = "random-feature"

    def __init__(self):
        self._bank = _feature_bank()

    def _maps(self, image: np.ndarray) -> list:
        maps = []
        level = image
        for _ in range(_SCALES):
            responses = []
            for k in self._bank:
                acc = np.zeros(level.shape[:2])
                for ch in range(3):
                    acc += correlate(level[:, :, ch], k[:, :, ch], mode="nearest")
                responses.append(np.maximum(acc, 0.0))
            stack = np.stack(responses)
            mean = stack.mean(axis=(1, 2), keepdims=True)
            spread = stack.std(axis=(1, 2), keepdims=True) + 1e-6
            maps.append((stack - mean) / spread)
            if min(level.shape[:2]) < 4:
                break
            level = _halve(level)
        return maps

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        total = 0.0
        count = 0
        for fa, fb in zip(self._maps(a), self._maps(b)):
            diff = fa - fb
            total += float((diff * diff).mean())
            count += 1
        return total / count


def _halve(image: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    h -= h % 2
    w -= w % 2
    trimmed = image[:h, :w]
    return 0.25 * (
        trimmed[0::2, 0::2] + trimmed[1::2, 0::2] + trimmed[0::2, 1::2] + trimmed[1::2, 1::2]
    )


class LearnedDistance:
    """Real LPIPS, when the package and its weights are available."""

    name = "lpips-alex"

    def __init__(self, net):
        import torch

        self._torch = torch
        self._net = net

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        torch = self._torch

        def prep(img):
            t = torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1))).float()
            return (t * 2.0 - 1.0).unsqueeze(0)

        with torch.no_grad():
            return float(self._net(prep(a), prep(b)).item())


_backend = None


def perceptual_backend():
    """The learned metric when loadable, the deterministic fallback otherwise."""
    global _backend
    if _backend is None:
        try:
            import lpips

            net = lpips.LPIPS(net="alex", verbose=False)
            _backend = LearnedDistance(net)
        except Exception:
            _backend = RandomFeatureDistance()
    return _backend


def _load(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def compute_lpips_sidecar(pred_dir, gt_dir, out_csv) -> Path:
    """Score matching PNGs and write the filename,lpips table."""
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    pred_names = {p.name for p in pred_dir.glob("*.png")}
    gt_names = {p.name for p in gt_dir.glob("*.png")}
    unmatched = sorted(pred_names ^ gt_names)
    if unmatched:
        raise AdapterError("unmatched files: " + ", ".join(unmatched))
    if not pred_names:
        raise AdapterError(f"no .png files under {pred_dir}")

    backend = perceptual_backend()
    out_csv = Path(out_csv)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "lpips"])
        for name in sorted(pred_names):
            value = backend.distance(_load(pred_dir / name), _load(gt_dir / name))
            writer.writerow([name, f"{value:.6f}"])
    return out_csv
