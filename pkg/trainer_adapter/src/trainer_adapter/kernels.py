"""Loss kernels the trainer calls, reimplemented on this side of the fence.

The producing package documents its objectives precisely (Gaussian-window
SSIM with zero padding, channel-mean masked L1); these are fresh
implementations of the same definitions, kept free of any import from the
producer so the two codebases only ever agree through numbers. The golden
suite pins that agreement to 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .errors import AdapterError, FrameShapeError


@dataclass(frozen=True)
class LossSettings:
    """Parameters of the blended photometric objective."""

    ssim_weight: float = 0.2
    window_size: int = 11
    sigma: float = 1.5
    data_range: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.ssim_weight < 1.0):
            raise AdapterError(f"ssim_weight must be in [0, 1), got {self.ssim_weight}")
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise AdapterError(f"window_size must be odd and >= 3, got {self.window_size}")


def _as_pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise FrameShapeError(f"image shapes differ: {pred.shape} vs {target.shape}")
    if pred.ndim != 3:
        raise FrameShapeError(f"expected (H, W, C) images, got {pred.shape}")
    return pred, target


def _window(settings: LossSettings) -> np.ndarray:
    half = (settings.window_size - 1) / 2.0
    x = np.arange(settings.window_size) - half
    taps = np.exp(-(x * x) / (2.0 * settings.sigma * settings.sigma))
    taps = taps / taps.sum()
    return np.outer(taps, taps)


def _smooth(plane: np.ndarray, window: np.ndarray) -> np.ndarray:
    # zero padding: the producer's documented border convention, and it
    # keeps the operator its own adjoint, which the gradient uses
    return correlate(plane, window, mode="constant", cval=0.0)


def _structural_stats(pred, target, window):
    per_channel = []
    for ch in range(pred.shape[2]):
        x, y = pred[:, :, ch], target[:, :, ch]
        per_channel.append(
            (
                _smooth(x, window),
                _smooth(y, window),
                _smooth(x * x, window),
                _smooth(y * y, window),
                _smooth(x * y, window),
            )
        )
    return per_channel


def _score_terms(mx, my, sxx, syy, sxy, settings):
    c1 = (0.01 * settings.data_range) ** 2
    c2 = (0.03 * settings.data_range) ** 2
    a = 2.0 * mx * my + c1
    b = mx * mx + my * my + c1
    c = 2.0 * (sxy - mx * my) + c2
    d = (sxx - mx * mx) + (syy - my * my) + c2
    return a, b, c, d


def structural_similarity(pred, target, settings: LossSettings | None = None) -> float:
    settings = settings or LossSettings()
    pred, target = _as_pair(pred, target)
    window = _window(settings)
    total = 0.0
    for mx, my, sxx, syy, sxy in _structural_stats(pred, target, window):
        a, b, c, d = _score_terms(mx, my, sxx, syy, sxy, settings)
        total += float(((a * c) / (b * d)).mean())
    return total / pred.shape[2]


def structural_similarity_grad(pred, target, settings: LossSettings | None = None) -> np.ndarray:
    settings = settings or LossSettings()
    pred, target = _as_pair(pred, target)
    window = _window(settings)
    grad = np.empty_like(pred)
    n = pred.size
    for ch, (mx, my, sxx, syy, sxy) in enumerate(_structural_stats(pred, target, window)):
        a, b, c, d = _score_terms(mx, my, sxx, syy, sxy, settings)
        v = b * d
        s = (a * c) / v
        da = c / v
        db = -s / b
        dc = a / v
        dd = -s / d
        # chain through a, b, c, d to the five local statistics
        d_mean_x = da * 2.0 * my + db * 2.0 * mx + dc * (-2.0 * my) + dd * (-2.0 * mx)
        d_sxx = dd
        d_sxy = 2.0 * dc
        x, y = pred[:, :, ch], target[:, :, ch]
        grad[:, :, ch] = (
            _smooth(d_mean_x, window)
            + 2.0 * x * _smooth(d_sxx, window)
            + y * _smooth(d_sxy, window)
        )
    return grad / n


def blended_photometric(pred, target, settings: LossSettings | None = None) -> float:
    """(1 - w) * mean absolute error + w * (1 - structural similarity)."""
    settings = settings or LossSettings()
    pred, target = _as_pair(pred, target)
    mae = float(np.abs(pred - target).mean())
    return (1.0 - settings.ssim_weight) * mae + settings.ssim_weight * (
        1.0 - structural_similarity(pred, target, settings)
    )


def blended_photometric_grad(pred, target, settings: LossSettings | None = None) -> np.ndarray:
    settings = settings or LossSettings()
    pred, target = _as_pair(pred, target)
    mae_grad = np.sign(pred - target) / pred.size
    return (1.0 - settings.ssim_weight) * mae_grad - settings.ssim_weight * (
        structural_similarity_grad(pred, target, settings)
    )


def _as_maps(pred, mask, weights):
    mask = np.asarray(mask, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if mask.shape != pred.shape[:2] or weights.shape != pred.shape[:2]:
        raise FrameShapeError(
            f"mask {mask.shape} / weights {weights.shape} do not match image {pred.shape[:2]}"
        )
    return mask, weights


def supervised_l1(pred, target, mask, weights) -> float:
    """Weighted channel-mean absolute error over the supervision mask."""
    pred, target = _as_pair(pred, target)
    mask, weights = _as_maps(pred, mask, weights)
    covered = mask.sum()
    if covered == 0.0:
        return 0.0
    per_pixel = np.abs(pred - target).mean(axis=2)
    return float((mask * weights * per_pixel).sum() / covered)


def supervised_l1_grad(pred, target, mask, weights) -> np.ndarray:
    pred, target = _as_pair(pred, target)
    mask, weights = _as_maps(pred, mask, weights)
    covered = mask.sum()
    if covered == 0.0:
        return np.zeros_like(pred)
    per_channel = mask * weights / (pred.shape[2] * covered)
    return np.sign(pred - target) * per_channel[:, :, None]
