"""Reconstruction losses, their gradients, and evaluation metrics.

Two training losses live here. Real captured views use the blended
l1 + structural-dissimilarity objective; synthesized views use a masked,
per-pixel-weighted l1 only, because their global structure is not
reliable enough to supervise a structural term. The dispatch constants
at the bottom name that policy in one place.

Gradients are with respect to the predicted image and are exact (checked
against central finite differences in the test suite), which makes the
kernels usable as a reference for autodiff ports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ShapeMismatchError, ViewaugError


@dataclass(frozen=True)
class LossConfig:
    """Knobs for the blended photometric loss.

    ssim_weight is the blend factor: loss = (1 - w) * l1 + w * (1 - ssim).
    Window size and sigma parameterize the Gaussian local statistics.
    """

    ssim_weight: float = 0.2
    window_size: int = 11
    sigma: float = 1.5
    data_range: float = 1.0

    def __post_init__(self):
        # the l1 share (1 - weight) must stay positive: pure structural loss
        # has flat spots that stall training
        if not (0.0 <= self.ssim_weight < 1.0):
            raise ViewaugError(f"ssim_weight must be in [0, 1), got {self.ssim_weight}")
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise ViewaugError(f"window_size must be odd and >= 3, got {self.window_size}")
        if self.sigma <= 0.0:
            raise ViewaugError(f"sigma must be positive, got {self.sigma}")
        if self.data_range <= 0.0:
            raise ViewaugError(f"data_range must be positive, got {self.data_range}")


@dataclass(frozen=True)
class MetricReport:
    """Evaluation summary for one image pair.

    avge is the geometric mean of mean-squared error, sqrt(1 - ssim), and
    a perceptual distance; it exists exactly when that perceptual score
    was supplied.
    """

    psnr: float
    ssim: float
    lpips: float | None = None
    avge: float | None = None

    def __post_init__(self):
        if (self.lpips is None) != (self.avge is None):
            raise ViewaugError("avge and lpips must be supplied together or not at all")


def _check_pair(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ViewaugError("images are empty")
    return a, b


def l1(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean absolute difference over every element."""
    pred, target = _check_pair(pred, target)
    return float(np.abs(pred - target).mean())


def l1_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """d l1 / d pred: the elementwise sign, averaged."""
    pred, target = _check_pair(pred, target)
    return np.sign(pred - target) / pred.size


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """1-D Gaussian taps, normalized to sum to one."""
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _local_mean(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Separable windowed correlation, zero padding past the borders.

    Zero padding keeps the operator self-adjoint (the window is
    symmetric), which the analytic ssim gradient relies on.
    """
    out = correlate1d(img, window, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, window, axis=1, mode="constant", cval=0.0)


def _ssim_stats(pred, target, config):
    window = gaussian_window(config.window_size, config.sigma)
    if pred.ndim == 2:
        pred = pred[:, :, None]
        target = target[:, :, None]
    mu_x = np.empty_like(pred)
    mu_y = np.empty_like(pred)
    s_xx = np.empty_like(pred)
    s_yy = np.empty_like(pred)
    s_xy = np.empty_like(pred)
    for c in range(pred.shape[2]):
        x = pred[:, :, c]
        y = target[:, :, c]
        mu_x[:, :, c] = _local_mean(x, window)
        mu_y[:, :, c] = _local_mean(y, window)
        s_xx[:, :, c] = _local_mean(x * x, window)
        s_yy[:, :, c] = _local_mean(y * y, window)
        s_xy[:, :, c] = _local_mean(x * y, window)
    return pred, target, window, mu_x, mu_y, s_xx, s_yy, s_xy


def _ssim_terms(mu_x, mu_y, s_xx, s_yy, s_xy, config):
    c1 = (0.01 * config.data_range) ** 2
    c2 = (0.03 * config.data_range) ** 2
    var_x = s_xx - mu_x * mu_x
    var_y = s_yy - mu_y * mu_y
    cov = s_xy - mu_x * mu_y
    a = 2.0 * mu_x * mu_y + c1
    b = mu_x * mu_x + mu_y * mu_y + c1
    c = 2.0 * cov + c2
    d = var_x + var_y + c2
    return a, b, c, d


def ssim(pred: np.ndarray, target: np.ndarray, config: LossConfig | None = None) -> float:
    """Mean structural similarity with Gaussian local statistics.

    Accepts (H, W) or (H, W, C); channels are scored independently and
    averaged. Identical inputs score exactly 1.
    """
    if config is None:
        config = LossConfig()
    pred, target = _check_pair(pred, target)
    pred, target, _, mu_x, mu_y, s_xx, s_yy, s_xy = _ssim_stats(pred, target, config)
    a, b, c, d = _ssim_terms(mu_x, mu_y, s_xx, s_yy, s_xy, config)
    return float(((a * c) / (b * d)).mean())


def ssim_grad(pred: np.ndarray, target: np.ndarray, config: LossConfig | None = None) -> np.ndarray:
    """d ssim / d pred, exact.

    Works by pushing the per-pixel score's partial derivatives with
    respect to the five local statistics back through the (self-adjoint)
    windowing operator.
    """
    if config is None:
        config = LossConfig()
    pred, target = _check_pair(pred, target)
    orig_shape = pred.shape
    pred, target, window, mu_x, mu_y, s_xx, s_yy, s_xy = _ssim_stats(pred, target, config)
    a, b, c, d = _ssim_terms(mu_x, mu_y, s_xx, s_yy, s_xy, config)

    bd = b * d
    p_a = c / bd
    p_b = -(a * c) / (b * bd)
    p_c = a / bd
    p_d = -(a * c) / (bd * d)

    d_mu_x = p_a * (2.0 * mu_y) + p_b * (2.0 * mu_x) + p_c * (-2.0 * mu_y) + p_d * (-2.0 * mu_x)
    d_s_xx = p_d
    d_s_xy = 2.0 * p_c

    grad = np.empty_like(pred)
    for ch in range(pred.shape[2]):
        back_mu = _local_mean(d_mu_x[:, :, ch], window)
        back_xx = _local_mean(d_s_xx[:, :, ch], window)
        back_xy = _local_mean(d_s_xy[:, :, ch], window)
        grad[:, :, ch] = back_mu + 2.0 * pred[:, :, ch] * back_xx + target[:, :, ch] * back_xy
    return (grad / pred.size).reshape(orig_shape)


def gs_loss(pred: np.ndarray, target: np.ndarray, config: LossConfig | None = None) -> float:
    """Blended photometric objective for views with reliable structure."""
    if config is None:
        config = LossConfig()
    lam = config.ssim_weight
    return (1.0 - lam) * l1(pred, target) + lam * (1.0 - ssim(pred, target, config))


def gs_loss_grad(pred: np.ndarray, target: np.ndarray, config: LossConfig | None = None) -> np.ndarray:
    if config is None:
        config = LossConfig()
    lam = config.ssim_weight
    return (1.0 - lam) * l1_grad(pred, target) - lam * ssim_grad(pred, target, config)


def masked_weighted_l1(
    pred: np.ndarray,
    target: np.ndarray,
    mask: np.ndarray,
    weights: np.ndarray,
) -> float:
    """Per-pixel weighted l1 restricted to a supervision mask.

    Each masked pixel contributes its channel-mean absolute difference
    scaled by its weight; the total is divided by the masked pixel count.
    An empty mask yields 0 (no supervision, no loss).
    """
    pred, target = _check_pair(pred, target)
    if pred.ndim != 3:
        raise ShapeMismatchError(f"expected (H, W, C) images, got {pred.shape}")
    mask = np.asarray(mask, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if mask.shape != pred.shape[:2] or weights.shape != pred.shape[:2]:
        raise ShapeMismatchError(
            f"mask {mask.shape} / weights {weights.shape} do not match image {pred.shape[:2]}"
        )
    denom = mask.sum()
    if denom == 0.0:
        return 0.0
    per_pixel = np.abs(pred - target).mean(axis=2)
    return float((mask * weights * per_pixel).sum() / denom)


def masked_weighted_l1_grad(
    pred: np.ndarray,
    target: np.ndarray,
    mask: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    pred, target = _check_pair(pred, target)
    mask = np.asarray(mask, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    denom = mask.sum()
    if denom == 0.0:
        return np.zeros_like(pred)
    channels = pred.shape[2]
    scale = (mask * weights / (channels * denom))[:, :, None]
    return np.sign(pred - target) * scale


def generated_view_loss(pred: np.ndarray, view) -> float:
    """Masked weighted l1 against a synthesized training view.

    `view` is anything exposing image, mask, and weights attributes, such
    as the views the augmentation pipeline produces.
    """
    return masked_weighted_l1(pred, view.image, view.mask, view.weights)


def generated_view_loss_grad(pred: np.ndarray, view) -> np.ndarray:
    return masked_weighted_l1_grad(pred, view.image, view.mask, view.weights)


def psnr(pred: np.ndarray, target: np.ndarray, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical images give inf."""
    pred, target = _check_pair(pred, target)
    if data_range <= 0.0:
        raise ViewaugError(f"data_range must be positive, got {data_range}")
    mse = float(((pred - target) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10((data_range * data_range) / mse)


def avge(psnr_db: float, ssim_value: float, lpips_value: float) -> float:
    """Geometric mean of MSE, sqrt(1 - ssim), and a perceptual distance.

    Folds three complementary error measures into one number; lower is
    better. psnr of inf contributes zero error, and ssim above 1 has no
    defined error term, so it is rejected.
    """
    if ssim_value > 1.0:
        raise ViewaugError(f"ssim must be <= 1, got {ssim_value}")
    if lpips_value < 0.0:
        raise ViewaugError(f"perceptual distance must be >= 0, got {lpips_value}")
    mse = 0.0 if math.isinf(psnr_db) else 10.0 ** (-psnr_db / 10.0)
    return (mse * math.sqrt(1.0 - ssim_value) * lpips_value) ** (1.0 / 3.0)


# Loss policy: which objective supervises which kind of frame.
LOSS_FOR_ORIGINAL = "gs_loss"
LOSS_FOR_GENERATED = "masked_weighted_l1"
