"""Read-side of the view-augmentation export bundle.

A bundle directory holds manifest.json (version "1") plus one PNG per
raster: 8-bit images, 0/255 masks, 16-bit weight maps at unit scale.
Frame records carry a loss name; originals train with the blended
photometric objective, generated views with the masked weighted L1.
This module never recomputes masks or weights, it only decodes what the
producer wrote.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import AdapterError, BundleSchemaError, FrameShapeError
from .kernels import (
    LossSettings,
    blended_photometric,
    blended_photometric_grad,
    supervised_l1,
    supervised_l1_grad,
)

SUPPORTED_VERSION = "1"

LOSS_BY_KIND = {
    "original": "gs_loss",
    "generated": "masked_weighted_l1",
}

_KEYS_BY_KIND = {
    "original": ("image", "pose", "loss"),
    "generated": ("image", "mask", "weights", "foreground", "pose",
                  "source_index", "h", "loss"),
}


@dataclass
class BundleFrame:
    kind: str
    pose: np.ndarray
    loss_name: str
    paths: dict
    source_index: int | None = None
    h: float | None = None


@dataclass
class BundleSession:
    root: Path
    manifest: dict
    frames: list
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.frames)

    def loss_for(self, frame_id: int) -> str:
        return self.frames[frame_id].loss_name

    def _decoded(self, frame_id: int, key: str, decoder):
        tag = (frame_id, key)
        if tag not in self._cache:
            self._cache[tag] = decoder(self.frames[frame_id].paths[key])
        return self._cache[tag]

    def image(self, frame_id: int) -> np.ndarray:
        return self._decoded(frame_id, "image", _decode_image)

    def mask(self, frame_id: int) -> np.ndarray:
        return self._decoded(frame_id, "mask", _decode_mask)

    def weights(self, frame_id: int) -> np.ndarray:
        return self._decoded(frame_id, "weights", _decode_weights)


def _decode_image(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def _decode_mask(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) != 0


def _decode_weights(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        data = np.asarray(img)
    if data.dtype != np.uint16:
        raise BundleSchemaError(f"{path.name} decodes as {data.dtype}, expected 16-bit")
    return data.astype(np.float64) / 65535.0


def open_bundle(bundle_dir) -> BundleSession:
    """Validate the manifest and stage lazy frame access."""
    root = Path(bundle_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise BundleSchemaError(f"{manifest_path} not found")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise BundleSchemaError(f"{manifest_path} is not valid JSON: {exc}") from exc

    version = manifest.get("version")
    if version != SUPPORTED_VERSION:
        raise BundleSchemaError(
            f"bundle version {version!r} is not supported (expected {SUPPORTED_VERSION!r})"
        )
    for key in ("intrinsics", "frames"):
        if key not in manifest:
            raise BundleSchemaError(f"manifest is missing key '{key}'")

    frames = []
    for i, record in enumerate(manifest["frames"]):
        kind = record.get("kind")
        if kind not in LOSS_BY_KIND:
            raise BundleSchemaError(f"frame {i}: unknown kind {kind!r}")
        missing = [k for k in _KEYS_BY_KIND[kind] if k not in record]
        if missing:
            raise BundleSchemaError(f"frame {i}: missing keys {missing}")
        if record["loss"] != LOSS_BY_KIND[kind]:
            raise BundleSchemaError(
                f"frame {i}: loss {record['loss']!r} does not match kind {kind!r}"
            )
        pose = np.asarray(record["pose"], dtype=np.float64)
        if pose.shape != (16,):
            raise BundleSchemaError(f"frame {i}: pose must hold 16 numbers")
        file_keys = (
            ("image",) if kind == "original"
            else ("image", "mask", "weights", "foreground")
        )
        paths = {}
        for key in file_keys:
            path = root / record[key]
            if not path.is_file():
                raise BundleSchemaError(f"frame {i}: referenced file {path} not found")
            paths[key] = path
        frames.append(
            BundleFrame(
                kind=kind,
                pose=pose.reshape(4, 4),
                loss_name=record["loss"],
                paths=paths,
                source_index=record.get("source_index"),
                h=record.get("h"),
            )
        )
    return BundleSession(root=root, manifest=manifest, frames=frames)


def frame_loss(
    session: BundleSession,
    frame_id: int,
    rendered: np.ndarray,
    settings: LossSettings | None = None,
) -> tuple:
    """Score a trainer-rendered image against one bundle frame.

    Returns (loss, gradient with respect to the rendered image). The
    objective follows the frame's loss tag: blended photometric for
    originals, masked weighted L1 for generated views.
    """
    if not (0 <= frame_id < len(session)):
        raise AdapterError(f"frame {frame_id} out of range, bundle has {len(session)}")
    frame = session.frames[frame_id]
    rendered = np.asarray(rendered, dtype=np.float64)
    target = session.image(frame_id)
    if rendered.shape != target.shape:
        raise FrameShapeError(
            f"rendered image is {rendered.shape}, frame {frame_id} is {target.shape}"
        )
    if frame.kind == "original":
        return (
            blended_photometric(rendered, target, settings),
            blended_photometric_grad(rendered, target, settings),
        )
    mask = session.mask(frame_id)
    weights = session.weights(frame_id)
    return (
        supervised_l1(rendered, target, mask, weights),
        supervised_l1_grad(rendered, target, mask, weights),
    )


def _raster_digest(path: Path) -> str:
    with Image.open(path) as img:
        if img.mode == "I;16":
            data = np.asarray(img, dtype=np.uint16)
        elif img.mode == "L":
            data = np.asarray(img, dtype=np.uint8)
        else:
            data = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return hashlib.sha256(np.ascontiguousarray(data).tobytes()).hexdigest()


def verify_checksums(session: BundleSession, checksums_path) -> list:
    """Compare decoded rasters against the producer's checksum table.

    Returns a list of mismatch descriptions; empty means the bundle
    crossed the language boundary intact.
    """
    table = json.loads(Path(checksums_path).read_text())
    problems = []
    for frame_id, expected in table.items():
        i = int(frame_id)
        if not (0 <= i < len(session)):
            problems.append(f"frame {frame_id}: not present in bundle")
            continue
        for key, digest in expected.items():
            path = session.frames[i].paths.get(key)
            if path is None:
                problems.append(f"frame {frame_id}: no {key} raster")
                continue
            actual = _raster_digest(path)
            if actual != digest:
                problems.append(f"frame {frame_id}: {key} checksum mismatch")
    return problems
