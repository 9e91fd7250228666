"""Serialization of concept models ("CBM" container, version 1).

Layout, all little-endian:

    magic    4 bytes  b"CBM1"
    version  u16      format version (currently 1)
    rgb_dim  u32
    depth_dim u32
    w_rgb    f64
    w_depth  f64
    distance_threshold f64
    n_categories u32
    per category:
        label_len u16, label bytes (UTF-8)
        train_count u64
        n_centroids u32
        per centroid: weight u64, rgb_dim x f32, depth_dim x f32
    crc32    u32      CRC32 of all preceding bytes

Vectors are stored as float32; values not exactly representable in float32
are rounded once at save time. Loading yields float32 vectors, so a second
save/load round trip is bitwise identical.
"""

import struct

import numpy as np

from . import binio
from .errors import FormatError
from .model import CategoryModel, CentroidPair, ConceptModel, FusionWeights

MAGIC = b"CBM1"
FORMAT_VERSION = 1

__all__ = ["save_model", "load_model", "model_to_bytes", "model_from_bytes"]


def model_to_bytes(m: ConceptModel) -> bytes:
    parts = [
        MAGIC,
        struct.pack(
            "<HIIdddI",
            FORMAT_VERSION,
            m.rgb_dim,
            m.depth_dim,
            m.fusion.w_rgb,
            m.fusion.w_depth,
            m.distance_threshold,
            len(m.categories),
        ),
    ]
    for cat in m.categories:
        label = cat.label.encode("utf-8")
        if len(label) > 0xFFFF:
            raise FormatError(f"category label too long to serialize: {cat.label[:40]!r}...")
        parts.append(struct.pack("<H", len(label)))
        parts.append(label)
        parts.append(struct.pack("<QI", cat.train_count, len(cat.centroids)))
        for c in cat.centroids:
            parts.append(struct.pack("<Q", c.weight))
            parts.append(np.ascontiguousarray(c.rgb, dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(c.depth, dtype="<f4").tobytes())
    return binio.seal(b"".join(parts))


def model_from_bytes(blob: bytes) -> ConceptModel:
    binio.check_magic(blob, MAGIC, "model file")
    body = binio.unseal(blob, "model file")
    r = binio.Reader(body, "model file")
    r.take(len(MAGIC))
    binio.check_version(r, FORMAT_VERSION)
    rgb_dim, depth_dim = r.u32(), r.u32()
    w_rgb, w_depth, threshold = r.f64(), r.f64(), r.f64()
    n_categories = r.u32()
    categories = []
    for _ in range(n_categories):
        label_len = r.u16()
        label = r.take(label_len).decode("utf-8")
        train_count = r.u64()
        n_centroids = r.u32()
        centroids = []
        for _ in range(n_centroids):
            weight = r.u64()
            rgb = np.frombuffer(r.take(4 * rgb_dim), dtype="<f4").astype(np.float32)
            depth = np.frombuffer(r.take(4 * depth_dim), dtype="<f4").astype(np.float32)
            centroids.append(CentroidPair(rgb=rgb, depth=depth, weight=weight))
        categories.append(
            CategoryModel(label=label, centroids=tuple(centroids), train_count=train_count)
        )
    r.expect_end()
    return ConceptModel(
        categories=tuple(categories),
        fusion=FusionWeights(w_rgb=w_rgb, w_depth=w_depth),
        rgb_dim=rgb_dim,
        depth_dim=depth_dim,
        distance_threshold=threshold,
    )


def save_model(m: ConceptModel, path) -> None:
    """Serialize a model to ``path`` atomically (temp file + rename)."""
    binio.atomic_write_bytes(path, model_to_bytes(m))


def load_model(path) -> ConceptModel:
    """Load and validate a model file, verifying its checksum and version."""
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
