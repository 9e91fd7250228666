"""Core domain types and centroid math for dual-modality concept models.

A "concept" is a pair of modality centroids (one RGB-stream vector, one
depth-stream vector) with a member count. Distances between a centroid pair
and a feature pair are fused across modalities as a weighted average of the
per-modality Euclidean distances:

    dist = 0.5 * (w_rgb * ||c_rgb - f_rgb|| + w_depth * ||c_depth - f_depth||)

All arithmetic is carried out in float64 regardless of input dtype. The
square-sum reduction is written out explicitly (not via ``np.linalg.norm``)
so that batched and per-pair computations of the same distance are bitwise
identical.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError

__all__ = [
    "FeaturePair",
    "CentroidPair",
    "FusionWeights",
    "CategoryModel",
    "ConceptModel",
    "as_feature_vector",
    "fused_distance",
    "update_centroid",
    "merge_centroids",
]


def as_feature_vector(values, dtype=np.float32) -> np.ndarray:
    """Validate and convert a sequence of reals into a 1-D feature vector.

    Rejects empty vectors and any non-finite element (NaN or infinity).
    """
    vec = np.asarray(values, dtype=dtype)
    if vec.ndim != 1:
        raise ValidationError(f"feature vector must be 1-D, got shape {vec.shape}")
    if vec.size < 1:
        raise ValidationError("feature vector must have at least one element")
    if not np.all(np.isfinite(vec)):
        raise ValidationError("feature vector contains non-finite values")
    return vec


def _check_finite_1d(vec: np.ndarray, what: str) -> np.ndarray:
    vec = np.asarray(vec)
    if vec.ndim != 1 or vec.size < 1:
        raise ValidationError(f"{what} must be a nonempty 1-D vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"{what} contains non-finite values")
    return vec


@dataclass(frozen=True)
class FeaturePair:
    """One sample's two modality feature vectors plus its sample id.

    Vectors are quantized to float32 on construction; float32 is the storage
    precision of every feature carrier in this package, so quantizing here
    keeps in-memory data identical to what a round trip through disk yields.
    """

    id: int
    rgb: np.ndarray
    depth: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rgb", as_feature_vector(self.rgb))
        object.__setattr__(self, "depth", as_feature_vector(self.depth))


@dataclass(frozen=True)
class CentroidPair:
    """Two modality centroid vectors and the number of member samples.

    Unlike :class:`FeaturePair`, vectors keep their given float dtype:
    running centroids are maintained in float64 during training and only
    quantized to float32 when a model is finalized or serialized.
    """

    rgb: np.ndarray
    depth: np.ndarray
    weight: int

    def __post_init__(self):
        object.__setattr__(self, "rgb", _check_finite_1d(self.rgb, "rgb centroid"))
        object.__setattr__(self, "depth", _check_finite_1d(self.depth, "depth centroid"))
        if int(self.weight) < 1 or int(self.weight) != self.weight:
            raise ValidationError(f"centroid weight must be a positive integer, got {self.weight}")
        object.__setattr__(self, "weight", int(self.weight))


@dataclass(frozen=True)
class FusionWeights:
    """Per-modality multipliers applied inside the fused distance."""

    w_rgb: float = 1.0
    w_depth: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.w_rgb) and np.isfinite(self.w_depth)):
            raise ValidationError("fusion weights must be finite")
        if self.w_rgb < 0 or self.w_depth < 0:
            raise ValidationError(
                f"fusion weights must be nonnegative, got ({self.w_rgb}, {self.w_depth})"
            )
        if self.w_rgb + self.w_depth <= 0:
            raise ValidationError("at least one fusion weight must be positive")
        if self.w_rgb > 1.0 or self.w_depth > 1.0:
            warnings.warn(
                f"fusion weights ({self.w_rgb}, {self.w_depth}) fall outside the "
                "conventional [0, 1] range",
                stacklevel=2,
            )


@dataclass(frozen=True)
class CategoryModel:
    """A named category: its centroid pairs and training-set size."""

    label: str
    centroids: tuple[CentroidPair, ...]
    train_count: int

    def __post_init__(self):
        if not self.label:
            raise ValidationError("category label must be nonempty")
        object.__setattr__(self, "centroids", tuple(self.centroids))
        if not self.centroids:
            raise ValidationError(f"category {self.label!r} has no centroids")
        rd = self.centroids[0].rgb.size
        dd = self.centroids[0].depth.size
        for c in self.centroids:
            if c.rgb.size != rd:
                raise DimensionMismatchError("rgb", rd, c.rgb.size, f"category {self.label!r}")
            if c.depth.size != dd:
                raise DimensionMismatchError("depth", dd, c.depth.size, f"category {self.label!r}")
        weight_sum = sum(c.weight for c in self.centroids)
        if self.train_count != weight_sum:
            raise ValidationError(
                f"category {self.label!r}: train_count {self.train_count} != "
                f"sum of centroid weights {weight_sum}"
            )


@dataclass(frozen=True)
class ConceptModel:
    """The full trained artifact: categories, fusion weights, dimensions.

    ``distance_threshold`` records the threshold the model was built (or last
    condensed) with; it is provenance, not consulted at prediction time.
    """

    categories: tuple[CategoryModel, ...]
    fusion: FusionWeights
    rgb_dim: int
    depth_dim: int
    distance_threshold: float

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if not self.categories:
            raise ValidationError("model must contain at least one category")
        if self.rgb_dim < 1 or self.depth_dim < 1:
            raise ValidationError("modality dimensions must be positive")
        if not self.distance_threshold > 0:
            raise ValidationError(
                f"distance_threshold must be positive, got {self.distance_threshold}"
            )
        labels = [c.label for c in self.categories]
        if len(set(labels)) != len(labels):
            dupes = sorted({l for l in labels if labels.count(l) > 1})
            raise ValidationError(f"duplicate category labels: {dupes}")
        for cat in self.categories:
            first = cat.centroids[0]
            if first.rgb.size != self.rgb_dim:
                raise DimensionMismatchError(
                    "rgb", self.rgb_dim, first.rgb.size, f"category {cat.label!r}"
                )
            if first.depth.size != self.depth_dim:
                raise DimensionMismatchError(
                    "depth", self.depth_dim, first.depth.size, f"category {cat.label!r}"
                )

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.categories)

    def category(self, label: str) -> CategoryModel:
        for cat in self.categories:
            if cat.label == label:
                return cat
        from .errors import UnknownLabelError

        raise UnknownLabelError(label, "model")

    @property
    def total_centroids(self) -> int:
        return sum(len(c.centroids) for c in self.categories)


def _euclidean(a: np.ndarray, b: np.ndarray) -> float:
    # Explicit square-sum keeps this bitwise equal to the batched kernels.
    diff = a.astype(np.float64, copy=False) - b.astype(np.float64, copy=False)
    return float(np.sqrt((diff * diff).sum()))


def _require_same_dim(modality: str, a: np.ndarray, b: np.ndarray, context: str = ""):
    if a.size != b.size:
        raise DimensionMismatchError(modality, a.size, b.size, context)


def fused_distance(c: CentroidPair, f: FeaturePair, w: FusionWeights) -> float:
    """Fused two-modality distance between a centroid pair and a feature pair.

    Returns ``0.5 * (w_rgb * ||c.rgb - f.rgb|| + w_depth * ||c.depth - f.depth||)``.
    The one-half factor is kept so stored thresholds remain comparable across
    tools that report them on the same scale.
    """
    _require_same_dim("rgb", c.rgb, f.rgb)
    _require_same_dim("depth", c.depth, f.depth)
    return 0.5 * (
        w.w_rgb * _euclidean(c.rgb, f.rgb) + w.w_depth * _euclidean(c.depth, f.depth)
    )


def update_centroid(c: CentroidPair, f: FeaturePair) -> CentroidPair:
    """Fold one new member into a centroid pair via a running weighted mean.

    Per modality the new vector is ``(weight * c + f) / (weight + 1)`` and the
    weight increments by one. Computation is in float64; chaining updates over
    members m1..mk therefore reproduces their arithmetic mean to within
    accumulation error (well under 1e-6 relative).
    """
    _require_same_dim("rgb", c.rgb, f.rgb)
    _require_same_dim("depth", c.depth, f.depth)
    w = float(c.weight)
    rgb = (w * c.rgb.astype(np.float64) + f.rgb.astype(np.float64)) / (w + 1.0)
    depth = (w * c.depth.astype(np.float64) + f.depth.astype(np.float64)) / (w + 1.0)
    return CentroidPair(rgb=rgb, depth=depth, weight=c.weight + 1)


def merge_centroids(a: CentroidPair, b: CentroidPair) -> CentroidPair:
    """Combine two centroid pairs into one, weighting by member counts.

    The weight-proportional mean preserves the grand mean of all members
    represented by the two inputs; weights add.
    """
    _require_same_dim("rgb", a.rgb, b.rgb)
    _require_same_dim("depth", a.depth, b.depth)
    wa, wb = float(a.weight), float(b.weight)
    denom = wa + wb
    rgb = (wa * a.rgb.astype(np.float64) + wb * b.rgb.astype(np.float64)) / denom
    depth = (wa * a.depth.astype(np.float64) + wb * b.depth.astype(np.float64)) / denom
    return CentroidPair(rgb=rgb, depth=depth, weight=a.weight + b.weight)
