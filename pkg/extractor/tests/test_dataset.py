"""Tree walking, split assignment, and format writers in isolation."""

import numpy as np
import pytest

from cbcl_extractor.dataset import assign_splits, read_split_manifest, walk_pairs
from cbcl_extractor.formats import path_id, write_cbf


class TestWalkPairs:
    def test_sorted_and_categorized(self, image_dataset):
        samples = walk_pairs(image_dataset, "rgb", "depth")
        assert len(samples) == 10
        assert [s.relpath for s in samples] == sorted(s.relpath for s in samples)
        assert {s.category for s in samples} == {"kitchen", "office"}
        assert all(s.rgb_path.exists() and s.depth_path.exists() for s in samples)

    def test_missing_modality_folder(self, image_dataset):
        with pytest.raises(FileNotFoundError):
            walk_pairs(image_dataset, "rgb", "hha")

    def test_file_outside_category_rejected(self, image_dataset):
        for sub in ("rgb", "depth"):
            (image_dataset / sub / "stray.png").write_bytes(b"x")
        with pytest.raises(ValueError, match="category folder"):
            walk_pairs(image_dataset, "rgb", "depth")


class TestSplits:
    def test_ratio_applied_per_category_within_rounding(self, image_dataset):
        samples = walk_pairs(image_dataset, "rgb", "depth")
        for ratio in (0.2, 0.5, 0.6, 1.0):
            splits = assign_splits(samples, ratio)
            per_cat = {}
            for s in samples:
                per_cat.setdefault(s.category, []).append(splits[s.relpath])
            for values in per_cat.values():
                assert values.count("train") == int(round(ratio * 5))

    def test_explicit_manifest(self, image_dataset, tmp_path):
        samples = walk_pairs(image_dataset, "rgb", "depth")
        rows = ["relpath,split"]
        rows += [f"{s.relpath},{'train' if i % 2 == 0 else 'test'}" for i, s in enumerate(samples)]
        manifest = tmp_path / "split.csv"
        manifest.write_text("\n".join(rows) + "\n")
        splits = read_split_manifest(manifest)
        assert len(splits) == 10
        assert splits[samples[0].relpath] == "train"

    def test_bad_ratio(self, image_dataset):
        samples = walk_pairs(image_dataset, "rgb", "depth")
        with pytest.raises(ValueError):
            assign_splits(samples, 1.5)


class TestFormats:
    def test_cbf_writer_rejects_non_finite(self, tmp_path):
        bad = np.zeros((2, 3), dtype=np.float32)
        bad[1, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            write_cbf(tmp_path / "x.cbf", "rgb", [1, 2], bad)

    def test_path_id_matches_documented_rule(self):
        import hashlib

        rel = "kitchen/img_00.png"
        expected = int.from_bytes(hashlib.sha256(rel.encode()).digest()[:8], "little")
        assert path_id(rel) == expected
