"""Training-data augmentation for sparse-view scene reconstruction.

Posed RGB-D views come in; interpolated camera poses, point-splatted
images, coverage masks, and reliability weights come out, packaged as an
on-disk bundle a downstream trainer can consume. The pieces compose:

    scene  = viewaug.load_blender_scene("lego/")
    views  = viewaug.augment_scene(scene)
    viewaug.write_bundle(scene, views, "out/")

The command line (`viewaug augment|metrics|validate|preview`) wraps the
same calls.
"""

from .camera import (
    CameraPose,
    Intrinsics,
    back_project,
    camera_center,
    intrinsics_from_fov,
    look_at,
    project,
    project_points,
)
from .cloud import PointCloud, apply_mask_to_image, filter_cloud, lift, union
from .dataset import (
    Scene,
    load_blender_scene,
    load_bundle,
    load_real_scene,
    read_manifest,
    write_bundle,
)
from .errors import (
    BundleFormatError,
    BundleVersionError,
    DegenerateGeometryError,
    InsufficientViewsError,
    InvalidDepthError,
    InvalidQuaternionError,
    InvalidRotationError,
    SceneFormatError,
    ShapeMismatchError,
    ViewaugError,
)
from .metrics import (
    LossConfig,
    MetricReport,
    avge,
    generated_view_loss,
    generated_view_loss_grad,
    gs_loss,
    gs_loss_grad,
    l1,
    masked_weighted_l1,
    masked_weighted_l1_grad,
    psnr,
    ssim,
    ssim_grad,
)
from .pipeline import augment_scene, lift_scene_clouds, synthesize_view
from .posing import (
    InterpolationGrid,
    SampledPose,
    interpolate_pose,
    sample_poses,
    slerp,
)
from .splat import (
    WEIGHT_MODES,
    RenderOutput,
    SplatConfig,
    render,
    render_mask_only,
)
from .visibility import (
    GeneratedView,
    build_generated_view,
    normalize_weights,
    xnor_mask,
)

__version__ = "0.1.0"

__all__ = [
    "BundleFormatError",
    "BundleVersionError",
    "CameraPose",
    "DegenerateGeometryError",
    "GeneratedView",
    "InsufficientViewsError",
    "InterpolationGrid",
    "Intrinsics",
    "InvalidDepthError",
    "InvalidQuaternionError",
    "InvalidRotationError",
    "LossConfig",
    "MetricReport",
    "PointCloud",
    "RenderOutput",
    "SampledPose",
    "Scene",
    "SceneFormatError",
    "ShapeMismatchError",
    "SplatConfig",
    "ViewaugError",
    "WEIGHT_MODES",
    "apply_mask_to_image",
    "augment_scene",
    "avge",
    "back_project",
    "build_generated_view",
    "camera_center",
    "filter_cloud",
    "generated_view_loss",
    "generated_view_loss_grad",
    "gs_loss",
    "gs_loss_grad",
    "interpolate_pose",
    "intrinsics_from_fov",
    "l1",
    "lift",
    "lift_scene_clouds",
    "load_blender_scene",
    "load_bundle",
    "load_real_scene",
    "look_at",
    "masked_weighted_l1",
    "masked_weighted_l1_grad",
    "normalize_weights",
    "project",
    "project_points",
    "psnr",
    "read_manifest",
    "render",
    "render_mask_only",
    "sample_poses",
    "slerp",
    "ssim",
    "ssim_grad",
    "synthesize_view",
    "union",
    "write_bundle",
    "xnor_mask",
]
