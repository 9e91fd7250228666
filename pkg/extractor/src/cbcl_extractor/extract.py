"""Feature extraction from paired image trees into CBF files.

Images are resized, center-cropped (deterministic; no augmentation at
extraction time), normalized, and pushed through the backbone's truncated
second-FC head in batches. Depth images are consumed as already-encoded
3-channel files and go through the same pipeline.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image
from torchvision import transforms

from .backbones import build_feature_head
from .dataset import Sample, assign_splits, read_split_manifest, walk_pairs
from .formats import path_id, write_cbf, write_manifest

log = logging.getLogger("cbcl_extract")

IMAGENET_MEAN = [0.485, 0.456, 0.406]
IMAGENET_STD = [0.229, 0.224, 0.225]


@dataclass(frozen=True)
class ExtractSpec:
    """What to extract, with what backbone, and where to write it."""

    root: str
    rgb_sub: str = "rgb"
    depth_sub: str = "depth"
    out_rgb: str = "rgb.cbf"
    out_depth: str = "depth.cbf"
    manifest: str = "labels.csv"
    backbone: str = "vgg16"
    weights: str = "imagenet"
    resize: int = 256
    crop: int = 224
    split_ratio: float = 0.5
    split_manifest: str | None = None
    batch_size: int = 16
    seed: int = 0
    device: str = "cpu"

    def __post_init__(self):
        if self.crop > self.resize:
            raise ValueError(f"crop {self.crop} exceeds resize {self.resize}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ExtractSummary:
    extracted: int = 0
    skipped: int = 0
    skipped_paths: list = field(default_factory=list)
    rgb_dim: int = 0
    depth_dim: int = 0


def _preprocess(resize: int, crop: int):
    return transforms.Compose(
        [
            transforms.Resize((resize, resize)),
            transforms.CenterCrop(crop),
            transforms.ToTensor(),
            transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
        ]
    )


def _load_image(path, pipeline):
    with Image.open(path) as img:
        return pipeline(img.convert("RGB"))


def _run_batches(head, tensors, batch_size, device):
    chunks = []
    with torch.no_grad():
        for start in range(0, len(tensors), batch_size):
            batch = torch.stack(tensors[start : start + batch_size]).to(device)
            chunks.append(head(batch).cpu().numpy().astype(np.float32))
    return np.vstack(chunks)


def extract(spec: ExtractSpec) -> ExtractSummary:
    """Walk the dataset, extract both modalities, and write the three files."""
    samples = walk_pairs(spec.root, spec.rgb_sub, spec.depth_sub)
    if spec.split_manifest:
        splits = read_split_manifest(spec.split_manifest)
        missing = [s.relpath for s in samples if s.relpath not in splits]
        if missing:
            raise ValueError(
                f"split manifest lacks {len(missing)} paths, e.g. {missing[:3]}"
            )
    else:
        splits = assign_splits(samples, spec.split_ratio)

    head, width = build_feature_head(spec.backbone, spec.weights, spec.seed)
    head = head.to(spec.device)
    pipeline = _preprocess(spec.resize, spec.crop)

    summary = ExtractSummary(rgb_dim=width, depth_dim=width)
    kept: list[Sample] = []
    rgb_tensors, depth_tensors = [], []
    for s in samples:
        try:
            # load both before keeping either, so one bad side never
            # leaves an orphan tensor
            rgb_tensor = _load_image(s.rgb_path, pipeline)
            depth_tensor = _load_image(s.depth_path, pipeline)
        except (OSError, SyntaxError) as exc:
            log.warning("skipping unreadable sample %s: %s", s.relpath, exc)
            summary.skipped += 1
            summary.skipped_paths.append(s.relpath)
            continue
        rgb_tensors.append(rgb_tensor)
        depth_tensors.append(depth_tensor)
        kept.append(s)
    if not kept:
        raise ValueError("no readable image pairs to extract")

    rgb_features = _run_batches(head, rgb_tensors, spec.batch_size, spec.device)
    depth_features = _run_batches(head, depth_tensors, spec.batch_size, spec.device)
    summary.extracted = len(kept)

    ids = [path_id(s.relpath) for s in kept]
    write_cbf(spec.out_rgb, "rgb", ids, rgb_features)
    write_cbf(spec.out_depth, "depth", ids, depth_features)
    write_manifest(
        spec.manifest,
        [(sample_id, s.category, splits[s.relpath]) for sample_id, s in zip(ids, kept)],
    )
    log.info(
        "extracted %d samples (%d skipped) at %d dims per modality",
        summary.extracted,
        summary.skipped,
        width,
    )
    return summary
