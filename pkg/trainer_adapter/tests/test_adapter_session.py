"""Opening bundles, dispatching losses, and cross-checking checksums."""

import json
import shutil

import numpy as np
import pytest
from PIL import Image

from trainer_adapter import (
    BundleSchemaError,
    LOSS_BY_KIND,
    open_bundle,
    verify_checksums,
)


class TestOpenBundle:
    def test_synthetic_preset_bundle_has_160_frames(self, bundle_dir):
        session = open_bundle(bundle_dir)
        assert len(session) == 160
        kinds = [f.kind for f in session.frames]
        assert kinds.count("original") == 4
        assert kinds.count("generated") == 156

    def test_dispatch_table(self, bundle_dir):
        session = open_bundle(bundle_dir)
        for i, frame in enumerate(session.frames):
            assert session.loss_for(i) == LOSS_BY_KIND[frame.kind]
            if frame.kind == "original":
                assert session.loss_for(i) == "gs_loss"
            else:
                assert session.loss_for(i) == "masked_weighted_l1"

    def test_generated_frames_carry_interpolation_provenance(self, bundle_dir):
        session = open_bundle(bundle_dir)
        for frame in session.frames:
            if frame.kind == "generated":
                assert frame.source_index is not None
                assert 0.0 < frame.h < 1.0
            else:
                assert frame.source_index is None

    def test_lazy_decoding_ranges(self, bundle_dir):
        session = open_bundle(bundle_dir)
        gen = next(i for i, f in enumerate(session.frames) if f.kind == "generated")
        image = session.image(gen)
        mask = session.mask(gen)
        weights = session.weights(gen)
        assert image.shape == (48, 48, 3) and 0.0 <= image.min() and image.max() <= 1.0
        assert mask.dtype == bool
        assert weights.shape == (48, 48)
        assert 0.0 <= weights.min() and weights.max() <= 1.0
        assert session.image(gen) is image  # cached, not re-decoded

    def test_pose_is_a_4x4_matrix(self, bundle_dir):
        session = open_bundle(bundle_dir)
        for frame in session.frames[:5]:
            assert frame.pose.shape == (4, 4)
            r = frame.pose[:3, :3]
            assert np.abs(r @ r.T - np.eye(3)).max() < 1e-9

    def test_missing_directory(self, tmp_path):
        with pytest.raises(BundleSchemaError, match="manifest.json"):
            open_bundle(tmp_path / "nowhere")

    def test_version_mismatch_rejected(self, bundle_dir, tmp_path):
        work = tmp_path / "copy"
        shutil.copytree(bundle_dir, work)
        manifest = json.loads((work / "manifest.json").read_text())
        manifest["version"] = "2"
        (work / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(BundleSchemaError, match="version"):
            open_bundle(work)

    def test_tampered_record_rejected(self, bundle_dir, tmp_path):
        work = tmp_path / "copy"
        shutil.copytree(bundle_dir, work)
        manifest = json.loads((work / "manifest.json").read_text())
        del manifest["frames"][10]["weights"]
        (work / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(BundleSchemaError, match="weights"):
            open_bundle(work)

    def test_wrong_loss_tag_rejected(self, bundle_dir, tmp_path):
        work = tmp_path / "copy"
        shutil.copytree(bundle_dir, work)
        manifest = json.loads((work / "manifest.json").read_text())
        manifest["frames"][0]["loss"] = "masked_weighted_l1"
        (work / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(BundleSchemaError, match="loss"):
            open_bundle(work)

    def test_missing_raster_rejected(self, bundle_dir, tmp_path):
        work = tmp_path / "copy"
        shutil.copytree(bundle_dir, work)
        (work / "frames" / "generated_000_mask.png").unlink()
        with pytest.raises(BundleSchemaError, match="generated_000_mask.png"):
            open_bundle(work)


class TestChecksums:
    def test_fixture_bundle_passes(self, kit, bundle_dir):
        session = open_bundle(bundle_dir)
        assert verify_checksums(session, kit / "checksums.json") == []

    def test_flipped_pixel_is_caught(self, kit, bundle_dir, tmp_path):
        work = tmp_path / "copy"
        shutil.copytree(bundle_dir, work)
        victim = work / "frames" / "generated_004_image.png"
        data = np.asarray(Image.open(victim)).copy()
        data[0, 0, 0] ^= 1
        Image.fromarray(data).save(victim)
        session = open_bundle(work)
        problems = verify_checksums(session, kit / "checksums.json")
        assert len(problems) == 1
        assert "image checksum mismatch" in problems[0]
