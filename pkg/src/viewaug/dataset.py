"""Scene loading and the on-disk export bundle.

Two scene layouts are read. Blender-style directories hold a
transforms_<split>.json with camera-to-world matrices in the GL
convention (camera looks along -z, y up) plus rendered images, and
optionally 16-bit depth maps this package's own writer adds. Real-capture
directories hold a scene.json with world-to-camera matrices in our own
convention plus per-view depth, confidence, and segmentation rasters
produced by an offline estimation stage.

The export bundle is the hand-off point to downstream trainers: a
manifest.json plus PNG rasters per frame. Everything in the manifest is
plain JSON, poses are 16 row-major numbers whose decimal text round-trips
to the exact float64, and writing the same data twice produces byte
identical directories, so bundles can be content-addressed.

Raster codecs and their precision:
  images      8-bit RGB PNG
  masks       8-bit PNG, 0 or 255
  weights     16-bit PNG; positive values never quantize to zero, so
              weight > 0 survives the round-trip exactly
  depths      16-bit PNG, 0 means invalid, full scale = depth_scale units
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .camera import CameraPose, Intrinsics, camera_center, intrinsics_from_fov
from .cloud import apply_mask_to_image
from .errors import (
    BundleFormatError,
    BundleVersionError,
    SceneFormatError,
    ShapeMismatchError,
    ViewaugError,
)
from .metrics import LOSS_FOR_GENERATED, LOSS_FOR_ORIGINAL
from .posing import InterpolationGrid
from .splat import SplatConfig
from .visibility import GeneratedView

BUNDLE_VERSION = "1"
SCENE_VERSION = "1"


@dataclass(frozen=True)
class Scene:
    """A set of posed views sharing one camera model.

    depths, seg_masks, and confidences are optional but, when present,
    cover every view. scene_center anchors pose interpolation and
    depth_scale maps stored 16-bit depth to scene units.
    """

    images: list
    poses: list
    intrinsics: Intrinsics
    scene_center: np.ndarray
    depth_scale: float
    depths: list | None = None
    seg_masks: list | None = None
    confidences: list | None = None

    def __post_init__(self):
        n = len(self.images)
        if len(self.poses) != n:
            raise ShapeMismatchError(f"{n} images but {len(self.poses)} poses")
        for name in ("depths", "seg_masks", "confidences"):
            per_view = getattr(self, name)
            if per_view is not None and len(per_view) != n:
                raise ShapeMismatchError(f"{n} images but {len(per_view)} {name}")
        shape = (self.intrinsics.height, self.intrinsics.width)
        for i, img in enumerate(self.images):
            if img.shape != shape + (3,):
                raise ShapeMismatchError(
                    f"image {i} is {img.shape}, camera expects {shape + (3,)}"
                )
        for name in ("depths", "seg_masks", "confidences"):
            per_view = getattr(self, name)
            if per_view is None:
                continue
            for i, grid in enumerate(per_view):
                if grid.shape != shape:
                    raise ShapeMismatchError(f"{name}[{i}] is {grid.shape}, camera expects {shape}")
        if not (self.depth_scale > 0.0 and math.isfinite(self.depth_scale)):
            raise ViewaugError(f"depth_scale must be positive, got {self.depth_scale}")
        center = np.asarray(self.scene_center, dtype=np.float64)
        if center.shape != (3,):
            raise ShapeMismatchError(f"scene_center must be a 3-vector, got {center.shape}")
        object.__setattr__(self, "scene_center", center)

    def __len__(self) -> int:
        return len(self.images)


def evenly_spaced(total: int, count: int) -> list:
    """`count` view indices spread uniformly over range(total)."""
    if not (1 <= count <= total):
        raise ViewaugError(f"cannot pick {count} views out of {total}")
    return [int(round(x)) for x in np.linspace(0, total - 1, count)]


# ---------------------------------------------------------------------------
# PNG helpers


def save_image_png(path: Path, image: np.ndarray):
    data = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data).save(path)


def load_image_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        data = np.asarray(img.convert("RGB"), dtype=np.float64)
    return data / 255.0


def save_mask_png(path: Path, mask: np.ndarray):
    Image.fromarray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)).save(path)


def load_mask_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        data = np.asarray(img.convert("L"))
    return data != 0


def save_scaled_u16_png(path: Path, values: np.ndarray, scale: float):
    """Store non-negative values as 16-bit PNG with full scale = `scale`.

    Zero stays zero and positive values never round down to zero, so the
    valid/invalid distinction survives quantization. Values above `scale`
    are out of range and rejected rather than silently clipped.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.min() < 0.0:
        raise ViewaugError(f"negative value {values.min()} cannot be stored in {path.name}")
    if values.max() > scale:
        raise ViewaugError(
            f"value {values.max()} exceeds full scale {scale} in {path.name}"
        )
    stored = np.round(values / scale * 65535.0)
    stored = np.where(values > 0.0, np.maximum(stored, 1.0), 0.0)
    Image.fromarray(stored.astype(np.uint16)).save(path)


def load_scaled_u16_png(path: Path, scale: float) -> np.ndarray:
    with Image.open(path) as img:
        data = np.asarray(img, dtype=np.float64)
    return data / 65535.0 * scale


# ---------------------------------------------------------------------------
# Blender-style scenes


def _nearest_rotation(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def _pose_from_c2w_gl(matrix: np.ndarray) -> CameraPose:
    """Camera-to-world in the GL convention to our world-to-camera."""
    r_c2w = matrix[:3, :3].copy()
    r_c2w[:, 1] = -r_c2w[:, 1]
    r_c2w[:, 2] = -r_c2w[:, 2]
    center = matrix[:3, 3]
    r = r_c2w.T
    try:
        return CameraPose(R=r, t=-r @ center)
    except ViewaugError:
        drift = np.abs(r @ r.T - np.eye(3)).max()
        if drift > 1e-4:
            raise
        r = _nearest_rotation(r)
        return CameraPose(R=r, t=-r @ center)


def pose_to_c2w_gl(pose: CameraPose) -> np.ndarray:
    """Inverse of the loader's conversion, for scene writers."""
    r_c2w = pose.R.T.copy()
    r_c2w[:, 1] = -r_c2w[:, 1]
    r_c2w[:, 2] = -r_c2w[:, 2]
    out = np.eye(4)
    out[:3, :3] = r_c2w
    out[:3, 3] = camera_center(pose)
    return out


def _read_json(path: Path, error_cls) -> dict:
    if not path.is_file():
        raise error_cls(f"{path} not found")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise error_cls(f"{path} is not valid JSON: {exc}") from exc


def _resolve_image_path(scene_dir: Path, file_path: str) -> Path:
    p = scene_dir / file_path
    if p.suffix.lower() != ".png":
        p = p.with_name(p.name + ".png")
    return p


def load_blender_scene(scene_dir, split: str = "train", subsample: list | None = None) -> Scene:
    """Read a transforms_<split>.json directory.

    subsample picks that subset of frame indices, in the given order.
    Depth maps attach when the transforms file carries depth_path entries
    (16-bit PNG scaled by its top-level depth_scale).
    """
    scene_dir = Path(scene_dir)
    meta = _read_json(scene_dir / f"transforms_{split}.json", SceneFormatError)
    if "camera_angle_x" not in meta:
        raise SceneFormatError(f"transforms_{split}.json is missing 'camera_angle_x'")
    frames = meta.get("frames")
    if not frames:
        raise SceneFormatError(f"transforms_{split}.json has no frames")

    indices = list(range(len(frames))) if subsample is None else list(subsample)
    for i in indices:
        if not (0 <= i < len(frames)):
            raise SceneFormatError(f"frame index {i} out of range, scene has {len(frames)} frames")

    depth_scale = float(meta.get("depth_scale", 1.0))
    images, poses, depths = [], [], []
    size = None
    for i in indices:
        frame = frames[i]
        if "transform_matrix" not in frame or "file_path" not in frame:
            raise SceneFormatError(f"frame {i} lacks file_path or transform_matrix")
        img_path = _resolve_image_path(scene_dir, frame["file_path"])
        if not img_path.is_file():
            raise SceneFormatError(f"{img_path} not found")
        image = load_image_png(img_path)
        if size is None:
            size = image.shape
        elif image.shape != size:
            raise ShapeMismatchError(
                f"{img_path.name} is {image.shape[1]}x{image.shape[0]}, "
                f"expected {size[1]}x{size[0]}"
            )
        matrix = np.asarray(frame["transform_matrix"], dtype=np.float64)
        if matrix.shape != (4, 4):
            raise SceneFormatError(f"frame {i} transform_matrix is not 4x4")
        images.append(image)
        poses.append(_pose_from_c2w_gl(matrix))
        if "depth_path" in frame:
            depth_path = scene_dir / frame["depth_path"]
            if not depth_path.is_file():
                raise SceneFormatError(f"{depth_path} not found")
            depths.append(load_scaled_u16_png(depth_path, depth_scale))

    if depths and len(depths) != len(images):
        raise SceneFormatError("some frames have depth_path and some do not")

    height, width = size[0], size[1]
    intr = intrinsics_from_fov(width, height, float(meta["camera_angle_x"]))
    center = np.asarray(meta.get("scene_center", (0.0, 0.0, 0.0)), dtype=np.float64)
    return Scene(
        images=images,
        poses=poses,
        intrinsics=intr,
        scene_center=center,
        depth_scale=depth_scale,
        depths=depths or None,
    )


# ---------------------------------------------------------------------------
# Real-capture scenes


def estimate_scene_center(poses: list) -> np.ndarray:
    """Least-squares point nearest to every camera's optical axis."""
    lhs = np.zeros((3, 3))
    rhs = np.zeros(3)
    for pose in poses:
        d = pose.R[2, :]
        proj = np.eye(3) - np.outer(d, d)
        lhs += proj
        rhs += proj @ camera_center(pose)
    center, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return center


def load_real_scene(scene_dir) -> Scene:
    """Read a scene.json directory produced by the offline estimation stage.

    Segmentation masks, when present, are applied to the images on load
    (background forced to white); confidence maps attach as-is for the
    point filter to threshold later.
    """
    scene_dir = Path(scene_dir)
    meta = _read_json(scene_dir / "scene.json", SceneFormatError)
    if meta.get("version") != SCENE_VERSION:
        raise SceneFormatError(
            f"scene.json version {meta.get('version')!r} is not supported (expected {SCENE_VERSION!r})"
        )
    try:
        k = meta["intrinsics"]
        intr = Intrinsics(
            fx=float(k["fx"]), fy=float(k["fy"]),
            cx=float(k["cx"]), cy=float(k["cy"]),
            width=int(k["width"]), height=int(k["height"]),
        )
        depth_scale = float(meta["depth_scale"])
        frames = meta["frames"]
    except KeyError as exc:
        raise SceneFormatError(f"scene.json is missing key {exc}") from exc
    confidence_scale = float(meta.get("confidence_scale", 1.0))

    shape = (intr.height, intr.width)
    images, poses, depths, seg_masks, confidences = [], [], [], [], []
    for i, frame in enumerate(frames):
        try:
            img_path = scene_dir / frame["image"]
            w2c = np.asarray(frame["w2c"], dtype=np.float64)
        except KeyError as exc:
            raise SceneFormatError(f"frame {i} is missing key {exc}") from exc
        if w2c.shape != (16,):
            raise SceneFormatError(f"frame {i} w2c must hold 16 numbers, got {w2c.shape}")
        if not img_path.is_file():
            raise SceneFormatError(f"{img_path} not found")
        image = load_image_png(img_path)
        if image.shape[:2] != shape:
            raise ShapeMismatchError(
                f"{img_path.name} is {image.shape[1]}x{image.shape[0]}, "
                f"intrinsics expect {intr.width}x{intr.height}"
            )
        poses.append(CameraPose.from_matrix(w2c.reshape(4, 4)))
        for key, store, loader, scale in (
            ("depth", depths, load_scaled_u16_png, depth_scale),
            ("confidence", confidences, load_scaled_u16_png, confidence_scale),
        ):
            if key in frame:
                path = scene_dir / frame[key]
                if not path.is_file():
                    raise SceneFormatError(f"{path} not found")
                grid = loader(path, scale)
                if grid.shape != shape:
                    raise ShapeMismatchError(f"{path.name} is {grid.shape}, expected {shape}")
                store.append(grid)
        if "seg_mask" in frame:
            path = scene_dir / frame["seg_mask"]
            if not path.is_file():
                raise SceneFormatError(f"{path} not found")
            mask = load_mask_png(path)
            if mask.shape != shape:
                raise ShapeMismatchError(f"{path.name} is {mask.shape}, expected {shape}")
            seg_masks.append(mask)
            image = apply_mask_to_image(image, mask)
        images.append(image)

    n = len(images)
    for name, store in (("depth", depths), ("confidence", confidences), ("seg_mask", seg_masks)):
        if store and len(store) != n:
            raise SceneFormatError(f"some frames have a {name} entry and some do not")

    if "scene_center" in meta:
        center = np.asarray(meta["scene_center"], dtype=np.float64)
    else:
        center = estimate_scene_center(poses)
    return Scene(
        images=images,
        poses=poses,
        intrinsics=intr,
        scene_center=center,
        depth_scale=depth_scale,
        depths=depths or None,
        seg_masks=seg_masks or None,
        confidences=confidences or None,
    )


# ---------------------------------------------------------------------------
# Export bundle


def _pose_row_major(pose: CameraPose) -> list:
    return [float(x) for x in pose.matrix().reshape(16)]


def write_bundle(
    scene: Scene,
    generated: list,
    out_dir,
    splat_config: SplatConfig | None = None,
    grid: InterpolationGrid | None = None,
) -> Path:
    """Write originals plus generated views; returns the manifest path.

    The manifest is serialized with sorted keys and no timestamps, and
    the PNG encoder is deterministic, so identical inputs give byte
    identical bundles.
    """
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for i, (image, pose) in enumerate(zip(scene.images, scene.poses)):
        name = f"original_{i:03d}.png"
        save_image_png(frames_dir / name, image)
        records.append(
            {
                "kind": "original",
                "image": f"frames/{name}",
                "pose": _pose_row_major(pose),
                "loss": LOSS_FOR_ORIGINAL,
            }
        )
    for i, view in enumerate(generated):
        stem = f"generated_{i:03d}"
        save_image_png(frames_dir / f"{stem}_image.png", view.image)
        save_mask_png(frames_dir / f"{stem}_mask.png", view.mask)
        save_mask_png(frames_dir / f"{stem}_foreground.png", view.foreground)
        save_scaled_u16_png(frames_dir / f"{stem}_weights.png", view.weights, 1.0)
        records.append(
            {
                "kind": "generated",
                "image": f"frames/{stem}_image.png",
                "mask": f"frames/{stem}_mask.png",
                "foreground": f"frames/{stem}_foreground.png",
                "weights": f"frames/{stem}_weights.png",
                "pose": _pose_row_major(view.pose),
                "source_index": int(view.source_index),
                "h": float(view.h),
                "loss": LOSS_FOR_GENERATED,
            }
        )

    manifest = {
        "version": BUNDLE_VERSION,
        "intrinsics": {
            "fx": scene.intrinsics.fx,
            "fy": scene.intrinsics.fy,
            "cx": scene.intrinsics.cx,
            "cy": scene.intrinsics.cy,
            "width": scene.intrinsics.width,
            "height": scene.intrinsics.height,
        },
        "scene_center": [float(x) for x in scene.scene_center],
        "depth_scale": float(scene.depth_scale),
        "splat": None
        if splat_config is None
        else {
            "kernel_radius": splat_config.kernel_radius,
            "top_k": splat_config.top_k,
            "weight_mode": splat_config.weight_mode,
            "background": list(splat_config.background),
        },
        "grid": None
        if grid is None
        else {"h_min": grid.h_min, "h_max": grid.h_max, "h_step": grid.h_step},
        "frames": records,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def _frame_field(record: dict, key: str, frame_id: str):
    if key not in record:
        raise BundleFormatError(f"frame {frame_id}: missing key '{key}'")
    return record[key]


def _frame_pose(record: dict, frame_id: str) -> CameraPose:
    numbers = _frame_field(record, "pose", frame_id)
    arr = np.asarray(numbers, dtype=np.float64)
    if arr.shape != (16,):
        raise BundleFormatError(f"frame {frame_id}: pose must hold 16 numbers, got {arr.shape}")
    try:
        return CameraPose.from_matrix(arr.reshape(4, 4))
    except ViewaugError as exc:
        raise BundleFormatError(f"frame {frame_id}: {exc}") from exc


def _frame_file(bundle_dir: Path, record: dict, key: str, frame_id: str) -> Path:
    rel = _frame_field(record, key, frame_id)
    path = bundle_dir / rel
    if not path.is_file():
        raise BundleFormatError(f"frame {frame_id}: referenced file {path} not found")
    return path


def read_manifest(bundle_dir) -> dict:
    bundle_dir = Path(bundle_dir)
    manifest = _read_json(bundle_dir / "manifest.json", BundleFormatError)
    version = manifest.get("version")
    if version != BUNDLE_VERSION:
        raise BundleVersionError(
            f"bundle version {version!r} is not supported (expected {BUNDLE_VERSION!r})"
        )
    for key in ("intrinsics", "scene_center", "depth_scale", "frames"):
        if key not in manifest:
            raise BundleFormatError(f"manifest is missing key '{key}'")
    return manifest


def load_bundle(bundle_dir) -> tuple:
    """Inverse of write_bundle: (original views as a Scene, generated views)."""
    bundle_dir = Path(bundle_dir)
    manifest = read_manifest(bundle_dir)
    try:
        k = manifest["intrinsics"]
        intr = Intrinsics(
            fx=float(k["fx"]), fy=float(k["fy"]),
            cx=float(k["cx"]), cy=float(k["cy"]),
            width=int(k["width"]), height=int(k["height"]),
        )
    except (KeyError, TypeError) as exc:
        raise BundleFormatError(f"manifest intrinsics are malformed: {exc}") from exc

    images, poses, generated = [], [], []
    for i, record in enumerate(manifest["frames"]):
        kind = _frame_field(record, "kind", str(i))
        frame_id = f"{i} ({kind})"
        pose = _frame_pose(record, frame_id)
        image = load_image_png(_frame_file(bundle_dir, record, "image", frame_id))
        if kind == "original":
            images.append(image)
            poses.append(pose)
        elif kind == "generated":
            mask = load_mask_png(_frame_file(bundle_dir, record, "mask", frame_id))
            fg = load_mask_png(_frame_file(bundle_dir, record, "foreground", frame_id))
            weights = load_scaled_u16_png(
                _frame_file(bundle_dir, record, "weights", frame_id), 1.0
            )
            generated.append(
                GeneratedView(
                    image=image,
                    mask=mask,
                    weights=weights,
                    foreground=fg,
                    pose=pose,
                    source_index=int(_frame_field(record, "source_index", frame_id)),
                    h=float(_frame_field(record, "h", frame_id)),
                )
            )
        else:
            raise BundleFormatError(f"frame {frame_id}: unknown kind {kind!r}")

    originals = Scene(
        images=images,
        poses=poses,
        intrinsics=intr,
        scene_center=np.asarray(manifest["scene_center"], dtype=np.float64),
        depth_scale=float(manifest["depth_scale"]),
    )
    return originals, generated
