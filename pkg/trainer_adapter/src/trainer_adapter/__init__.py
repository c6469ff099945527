"""Bundle consumption for an external splatting trainer.

Open an export bundle, dispatch the right per-frame loss over images the
trainer renders, and emit LPIPS sidecars the producer's metrics command
understands. This package reads the bundle format and golden files; it
never imports the producer.
"""

from .errors import AdapterError, BundleSchemaError, FrameShapeError
from .kernels import (
    LossSettings,
    blended_photometric,
    blended_photometric_grad,
    structural_similarity,
    structural_similarity_grad,
    supervised_l1,
    supervised_l1_grad,
)
from .perceptual import RandomFeatureDistance, compute_lpips_sidecar, perceptual_backend
from .session import (
    LOSS_BY_KIND,
    BundleFrame,
    BundleSession,
    frame_loss,
    open_bundle,
    verify_checksums,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "BundleFrame",
    "BundleSchemaError",
    "BundleSession",
    "FrameShapeError",
    "LOSS_BY_KIND",
    "LossSettings",
    "RandomFeatureDistance",
    "blended_photometric",
    "blended_photometric_grad",
    "compute_lpips_sidecar",
    "frame_loss",
    "open_bundle",
    "perceptual_backend",
    "structural_similarity",
    "structural_similarity_grad",
    "supervised_l1",
    "supervised_l1_grad",
    "verify_checksums",
]
