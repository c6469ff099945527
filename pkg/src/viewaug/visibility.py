"""Supervision masks and per-pixel weights for synthesized views.

A synthesized view is trustworthy where the geometry that fed it was
actually observed. Two coverage masks say so: one from the single source
view's points, one from the union of every view's points. Pixels where
the two disagree are places the source view could not see but some other
view could (or vice versa), so they are excluded from supervision. The
per-pixel splat weight sum, rescaled to [0, 1], then softly down-weights
thinly supported pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraPose
from .errors import ShapeMismatchError
from .splat import RenderOutput


@dataclass(frozen=True)
class GeneratedView:
    """A synthesized training frame and everything its loss needs.

    image:      (H, W, 3) composited splat render
    mask:       (H, W) bool, pixels where supervision applies
    weights:    (H, W) in [0, 1], per-pixel confidence inside the mask
    foreground: (H, W) bool, coverage of the source view's points alone
    """

    image: np.ndarray
    mask: np.ndarray
    weights: np.ndarray
    foreground: np.ndarray
    pose: CameraPose
    source_index: int
    h: float


def xnor_mask(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pixels where two coverage masks agree (both set or both clear)."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a == b


def normalize_weights(weight_sum: np.ndarray) -> np.ndarray:
    """Rescale a raw weight map to [0, 1] by its own min and max.

    A constant map carries no ranking information, so it normalizes to
    all ones rather than dividing by zero (or zeroing frames whose
    coverage happens to be uniform).
    """
    w = np.asarray(weight_sum, dtype=np.float64)
    lo = w.min()
    hi = w.max()
    if hi == lo:
        return np.ones_like(w)
    return (w - lo) / (hi - lo)


def build_generated_view(
    partial: RenderOutput,
    union_foreground: np.ndarray,
    pose: CameraPose,
    source_index: int,
    h: float,
) -> GeneratedView:
    """Assemble a training frame from the source-only render and the
    union coverage of all views."""
    union_foreground = np.asarray(union_foreground, dtype=bool)
    if union_foreground.shape != partial.foreground.shape:
        raise ShapeMismatchError(
            f"union mask {union_foreground.shape} does not match render {partial.foreground.shape}"
        )
    return GeneratedView(
        image=partial.rgb,
        mask=xnor_mask(partial.foreground, union_foreground),
        weights=normalize_weights(partial.weight_sum),
        foreground=partial.foreground,
        pose=pose,
        source_index=source_index,
        h=h,
    )
