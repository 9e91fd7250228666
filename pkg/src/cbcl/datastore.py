"""Feature-file and label-manifest I/O, dataset joining, synthetic data.

Feature payloads are float32 on disk and in memory. Two encodings carry
the same data:

* Binary ("CBF" container, version 1), little-endian: magic ``CBF1``,
  u16 version, u8 modality tag (0 = rgb, 1 = depth), u32 dim, u64 record
  count, then per record a u64 sample id and dim float32 values, and a
  trailing CRC32 of all preceding bytes.
* CSV (interop/tests): header ``id,v0,...,v{dim-1}``, UTF-8, ``.`` decimal.
  Values are quantized to float32 on read, so both encodings of the same
  data load identically.

The label manifest is UTF-8 CSV with header ``id,category,split`` and
split values ``train`` or ``test``.

Sample ids are u64. Ids derived from files use the first 8 bytes of the
SHA-256 digest of the POSIX-style relative path (UTF-8), interpreted
little-endian; see :func:`path_id`. Feature extractors that implement the
same rule produce ids this package agrees with.
"""

import csv
import hashlib
import io
import struct
from dataclasses import dataclass

import numpy as np

from . import binio
from .errors import FormatError, JoinError, ValidationError
from .model import FeaturePair

CBF_MAGIC = b"CBF1"
CBF_VERSION = 1
MODALITY_TAGS = {"rgb": 0, "depth": 1}
TAG_MODALITIES = {v: k for k, v in MODALITY_TAGS.items()}

__all__ = [
    "FeatureFile",
    "ManifestRow",
    "LabelManifest",
    "JoinedDataset",
    "SynthSpec",
    "SynthTruth",
    "path_id",
    "read_features",
    "write_features",
    "read_manifest",
    "write_manifest",
    "join_dataset",
    "generate_synthetic",
]


def path_id(relpath: str) -> int:
    """Stable u64 sample id for a dataset-relative file path.

    The path is normalized to forward slashes, UTF-8 encoded, hashed with
    SHA-256, and the first 8 digest bytes are read as a little-endian u64.
    """
    digest = hashlib.sha256(relpath.replace("\\", "/").encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class FeatureFile:
    """One modality's feature vectors keyed by sample id."""

    modality: str
    dim: int
    ids: np.ndarray  # (n,) uint64
    vectors: np.ndarray  # (n, dim) float32

    def __post_init__(self):
        if self.modality not in MODALITY_TAGS:
            raise ValidationError(
                f"modality must be one of {sorted(MODALITY_TAGS)}, got {self.modality!r}"
            )
        ids = np.asarray(self.ids, dtype=np.uint64)
        vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.dim < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        if vectors.ndim != 2 or vectors.shape[1] != self.dim:
            raise ValidationError(
                f"vectors must have shape (n, {self.dim}), got {vectors.shape}"
            )
        if ids.shape[0] != vectors.shape[0]:
            raise ValidationError(
                f"{ids.shape[0]} ids for {vectors.shape[0]} vectors"
            )
        if len(np.unique(ids)) != len(ids):
            seen, dupes = set(), set()
            for i in ids.tolist():
                (dupes if i in seen else seen).add(i)
            raise ValidationError(f"duplicate sample ids: {sorted(dupes)[:10]}")
        bad = np.where(~np.isfinite(vectors).all(axis=1))[0]
        if bad.size:
            raise ValidationError(
                f"non-finite feature values for sample id {int(ids[bad[0]])}"
            )
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return len(self.ids)

    def records(self):
        for i in range(len(self.ids)):
            yield int(self.ids[i]), self.vectors[i]


def _features_to_cbf(ff: FeatureFile) -> bytes:
    parts = [
        CBF_MAGIC,
        struct.pack("<HBIQ", CBF_VERSION, MODALITY_TAGS[ff.modality], ff.dim, len(ff)),
    ]
    for i in range(len(ff)):
        parts.append(struct.pack("<Q", int(ff.ids[i])))
        parts.append(np.ascontiguousarray(ff.vectors[i], dtype="<f4").tobytes())
    return binio.seal(b"".join(parts))


def _features_from_cbf(blob: bytes) -> FeatureFile:
    binio.check_magic(blob, CBF_MAGIC, "feature file")
    body = binio.unseal(blob, "feature file")
    r = binio.Reader(body, "feature file")
    r.take(len(CBF_MAGIC))
    binio.check_version(r, CBF_VERSION)
    tag = r.u8()
    if tag not in TAG_MODALITIES:
        raise FormatError(f"feature file: unknown modality tag {tag}")
    dim = r.u32()
    count = r.u64()
    ids = np.empty(count, dtype=np.uint64)
    vectors = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        ids[i] = r.u64()
        vectors[i] = np.frombuffer(r.take(4 * dim), dtype="<f4")
    r.expect_end()
    return FeatureFile(modality=TAG_MODALITIES[tag], dim=dim, ids=ids, vectors=vectors)


def _features_to_csv(ff: FeatureFile) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id"] + [f"v{i}" for i in range(ff.dim)])
    for i in range(len(ff)):
        # str() of a float32 scalar is the shortest digits that read back
        # to the identical float32, so the CSV round trip is exact.
        writer.writerow([int(ff.ids[i])] + [str(v) for v in ff.vectors[i]])
    return buf.getvalue()


def _features_from_csv(text: str, modality: str) -> FeatureFile:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("feature CSV: empty file") from None
    if len(header) < 2 or header[0] != "id":
        raise FormatError(f"feature CSV: bad header {header[:5]}")
    dim = len(header) - 1
    expected = ["id"] + [f"v{i}" for i in range(dim)]
    if header != expected:
        raise FormatError("feature CSV: header columns must be id,v0,...,v{dim-1}")
    ids, rows = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != dim + 1:
            raise FormatError(
                f"feature CSV: row {lineno} has {len(row) - 1} values, expected {dim}"
            )
        try:
            ids.append(int(row[0]))
            rows.append(np.asarray([float(v) for v in row[1:]], dtype=np.float32))
        except ValueError as exc:
            raise FormatError(f"feature CSV: row {lineno}: {exc}") from None
    vectors = (
        np.vstack(rows) if rows else np.empty((0, dim), dtype=np.float32)
    )
    return FeatureFile(modality=modality, dim=dim, ids=np.asarray(ids, dtype=np.uint64), vectors=vectors)


def write_features(path, ff: FeatureFile, encoding: str = "cbf") -> None:
    """Write a feature file atomically in the requested encoding."""
    if encoding == "cbf":
        binio.atomic_write_bytes(path, _features_to_cbf(ff))
    elif encoding == "csv":
        binio.atomic_write_text(path, _features_to_csv(ff))
    else:
        raise ValidationError(f"unknown feature encoding {encoding!r}")


def read_features(path, encoding: str = "cbf", modality: str | None = None) -> FeatureFile:
    """Read a feature file; CSV needs the modality stated by the caller."""
    if encoding == "cbf":
        with open(path, "rb") as fh:
            return _features_from_cbf(fh.read())
    if encoding == "csv":
        if modality is None:
            raise ValidationError("reading CSV features requires an explicit modality")
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return _features_from_csv(fh.read(), modality)
    raise ValidationError(f"unknown feature encoding {encoding!r}")


@dataclass(frozen=True)
class ManifestRow:
    id: int
    category: str
    split: str


@dataclass(frozen=True)
class LabelManifest:
    rows: tuple[ManifestRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        seen = set()
        for row in self.rows:
            if row.id in seen:
                raise ValidationError(f"duplicate sample id in manifest: {row.id}")
            seen.add(row.id)
            if not row.category:
                raise ValidationError(f"empty category label for sample id {row.id}")
            if row.split not in ("train", "test"):
                raise ValidationError(
                    f"split must be 'train' or 'test', got {row.split!r} for id {row.id}"
                )

    def ids(self) -> set:
        return {row.id for row in self.rows}


def write_manifest(path, manifest: LabelManifest) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "category", "split"])
    for row in manifest.rows:
        writer.writerow([row.id, row.category, row.split])
    binio.atomic_write_text(path, buf.getvalue())


def read_manifest(path) -> LabelManifest:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("manifest: empty file") from None
        if header != ["id", "category", "split"]:
            raise FormatError(f"manifest: bad header {header}, expected id,category,split")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"manifest: row {lineno} has {len(row)} columns, expected 3")
            try:
                rows.append(ManifestRow(id=int(row[0]), category=row[1], split=row[2]))
            except ValueError as exc:
                raise FormatError(f"manifest: row {lineno}: {exc}") from None
    return LabelManifest(rows=tuple(rows))


@dataclass(frozen=True)
class JoinedDataset:
    """Per-split labeled feature pairs, in manifest order."""

    train: list
    test: list
    counts: dict  # split -> category -> sample count


def join_dataset(rgb: FeatureFile, depth: FeatureFile, labels: LabelManifest) -> JoinedDataset:
    """Pair up both modalities with labels; the three id sets must coincide."""
    if rgb.modality != "rgb":
        raise ValidationError(f"first feature file is tagged {rgb.modality!r}, expected 'rgb'")
    if depth.modality != "depth":
        raise ValidationError(
            f"second feature file is tagged {depth.modality!r}, expected 'depth'"
        )
    rgb_ids = {int(i) for i in rgb.ids.tolist()}
    depth_ids = {int(i) for i in depth.ids.tolist()}
    manifest_ids = labels.ids()
    if not (rgb_ids == depth_ids == manifest_ids):
        missing = sorted(
            (rgb_ids | depth_ids | manifest_ids) - (rgb_ids & depth_ids & manifest_ids)
        )
        shown = ", ".join(str(i) for i in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise JoinError(
            f"sample ids disagree between rgb features, depth features, and manifest; "
            f"offending ids: {shown}{more}"
        )
    rgb_by_id = {int(rgb.ids[i]): rgb.vectors[i] for i in range(len(rgb))}
    depth_by_id = {int(depth.ids[i]): depth.vectors[i] for i in range(len(depth))}
    splits = {"train": [], "test": []}
    counts = {"train": {}, "test": {}}
    for row in labels.rows:
        pair = FeaturePair(id=row.id, rgb=rgb_by_id[row.id], depth=depth_by_id[row.id])
        splits[row.split].append((pair, row.category))
        counts[row.split][row.category] = counts[row.split].get(row.category, 0) + 1
    return JoinedDataset(train=splits["train"], test=splits["test"], counts=counts)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic two-modality dataset generator.

    Each category gets ``layouts`` hidden layout centers per modality drawn
    from N(0, center_spread^2); each sample is its layout center plus
    N(0, noise_sigma^2) noise. Within every layout the first
    ``round(train_fraction * samples_per_layout)`` samples are assigned to
    the train split, the rest to test. Output is deterministic in ``seed``.
    """

    categories: int
    layouts: int
    rgb_dim: int
    depth_dim: int
    center_spread: float
    noise_sigma: float
    samples_per_layout: int
    seed: int = 0
    train_fraction: float = 0.5

    def __post_init__(self):
        for name in ("categories", "layouts", "rgb_dim", "depth_dim", "samples_per_layout"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.noise_sigma < 0:
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.center_spread < 0:
            raise ValidationError(f"center_spread must be >= 0, got {self.center_spread}")
        if not 0.0 <= self.train_fraction <= 1.0:
            raise ValidationError(
                f"train_fraction must be within [0, 1], got {self.train_fraction}"
            )


@dataclass(frozen=True)
class SynthTruth:
    """Generator-side ground truth: layout assignment and layout centers.

    Centers are quantized to float32, matching the emitted features.
    """

    assignments: tuple  # (sample id, category label, layout index) per sample
    rgb_centers: np.ndarray  # (categories, layouts, rgb_dim) float32
    depth_centers: np.ndarray  # (categories, layouts, depth_dim) float32


def _category_labels(m: int) -> list[str]:
    width = max(2, len(str(m - 1)))
    return [f"cat{j:0{width}d}" for j in range(m)]


def generate_synthetic(spec: SynthSpec):
    """Generate (rgb features, depth features, manifest, ground truth).

    Draw order is fixed (per category: rgb centers, depth centers, then per
    layout and sample: rgb noise, depth noise), so identical specs produce
    byte-identical files.
    """
    rng = np.random.default_rng(spec.seed)
    labels = _category_labels(spec.categories)
    n_total = spec.categories * spec.layouts * spec.samples_per_layout
    rgb_vectors = np.empty((n_total, spec.rgb_dim), dtype=np.float32)
    depth_vectors = np.empty((n_total, spec.depth_dim), dtype=np.float32)
    rgb_centers = np.empty((spec.categories, spec.layouts, spec.rgb_dim), dtype=np.float32)
    depth_centers = np.empty((spec.categories, spec.layouts, spec.depth_dim), dtype=np.float32)
    rows, assignments = [], []
    n_train = int(round(spec.train_fraction * spec.samples_per_layout))
    sample_id = 0
    for j, label in enumerate(labels):
        c_rgb = rng.normal(0.0, spec.center_spread, size=(spec.layouts, spec.rgb_dim))
        c_depth = rng.normal(0.0, spec.center_spread, size=(spec.layouts, spec.depth_dim))
        rgb_centers[j] = c_rgb.astype(np.float32)
        depth_centers[j] = c_depth.astype(np.float32)
        for l in range(spec.layouts):
            for s in range(spec.samples_per_layout):
                rgb_vectors[sample_id] = (
                    c_rgb[l] + rng.normal(0.0, spec.noise_sigma, size=spec.rgb_dim)
                ).astype(np.float32)
                depth_vectors[sample_id] = (
                    c_depth[l] + rng.normal(0.0, spec.noise_sigma, size=spec.depth_dim)
                ).astype(np.float32)
                split = "train" if s < n_train else "test"
                rows.append(ManifestRow(id=sample_id, category=label, split=split))
                assignments.append((sample_id, label, l))
                sample_id += 1
    ids = np.arange(n_total, dtype=np.uint64)
    rgb_ff = FeatureFile(modality="rgb", dim=spec.rgb_dim, ids=ids, vectors=rgb_vectors)
    depth_ff = FeatureFile(modality="depth", dim=spec.depth_dim, ids=ids, vectors=depth_vectors)
    manifest = LabelManifest(rows=tuple(rows))
    truth = SynthTruth(
        assignments=tuple(assignments),
        rgb_centers=rgb_centers,
        depth_centers=depth_centers,
    )
    return rgb_ff, depth_ff, manifest, truth
