"""Paired-modality dataset walking and split assignment.

The dataset root holds one subfolder per modality, each with identical
category/file trees:

    root/<rgb_sub>/<category>/<image>
    root/<depth_sub>/<category>/<image>

A sample's identity is its modality-relative path ``category/image``; both
trees must contain exactly the same relative file set.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}


@dataclass(frozen=True)
class Sample:
    relpath: str  # POSIX-style, relative to the modality subfolder
    category: str
    rgb_path: Path
    depth_path: Path


def _relative_images(tree: Path) -> set[str]:
    if not tree.is_dir():
        raise FileNotFoundError(f"modality folder not found: {tree}")
    return {
        p.relative_to(tree).as_posix()
        for p in tree.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    }


def walk_pairs(root, rgb_sub: str, depth_sub: str) -> list[Sample]:
    """Enumerate paired samples, sorted by relative path.

    Raises if the two modality trees do not contain the same files.
    """
    root = Path(root)
    rgb_tree, depth_tree = root / rgb_sub, root / depth_sub
    rgb_files = _relative_images(rgb_tree)
    depth_files = _relative_images(depth_tree)
    if rgb_files != depth_files:
        missing = sorted(rgb_files.symmetric_difference(depth_files))
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise ValueError(
            f"modality trees disagree: {len(missing)} unpaired files: {shown}{more}"
        )
    if not rgb_files:
        raise ValueError(f"no images found under {rgb_tree}")
    samples = []
    for relpath in sorted(rgb_files):
        parts = relpath.split("/")
        if len(parts) < 2:
            raise ValueError(
                f"image {relpath!r} sits outside a category folder; expected "
                "<category>/<image>"
            )
        samples.append(
            Sample(
                relpath=relpath,
                category=parts[0],
                rgb_path=rgb_tree / relpath,
                depth_path=depth_tree / relpath,
            )
        )
    return samples


def assign_splits(samples, split_ratio: float) -> dict[str, str]:
    """Per category, the first round(ratio * k) samples (sorted order) train."""
    if not 0.0 <= split_ratio <= 1.0:
        raise ValueError(f"split ratio must be within [0, 1], got {split_ratio}")
    by_category: dict[str, list[Sample]] = {}
    for s in samples:
        by_category.setdefault(s.category, []).append(s)
    splits = {}
    for category in sorted(by_category):
        members = by_category[category]  # already sorted by relpath
        n_train = int(round(split_ratio * len(members)))
        for i, s in enumerate(members):
            splits[s.relpath] = "train" if i < n_train else "test"
    return splits


def read_split_manifest(path) -> dict[str, str]:
    """Explicit split assignment: CSV rows of ``relpath,split``."""
    splits = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and row == ["relpath", "split"]:
                continue
            if len(row) != 2 or row[1] not in ("train", "test"):
                raise ValueError(f"split manifest row {lineno}: expected relpath,train|test")
            splits[row[0]] = row[1]
    return splits
