"""Incremental threshold clustering over labeled feature pairs.

Each category is clustered independently by a single streaming pass: the
first sample seeds centroid 0; every later sample either folds into its
nearest centroid pair (fused distance strictly below the threshold) or
becomes a new centroid pair equal to its own features. Running centroids
are held in float64 and quantized to float32 only when the final model is
assembled.

``condense`` re-runs the same pass over a model's existing centroids with a
larger threshold, merging by weight-proportional means so per-category
weight sums (and the members' grand mean) are preserved.
"""

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from . import binio
from .errors import DimensionMismatchError, ValidationError
from .model import (
    CategoryModel,
    CentroidPair,
    ConceptModel,
    FeaturePair,
    FusionWeights,
)

__all__ = [
    "TrainConfig",
    "TraceRecord",
    "AssignmentTrace",
    "fit",
    "condense",
    "centroid_stats",
    "CategoryStats",
    "ModelStats",
    "write_trace_csv",
]

ORDER_POLICIES = ("dataset-order", "seeded-shuffle")


@dataclass(frozen=True)
class TrainConfig:
    """Clustering hyperparameters and reproducibility knobs.

    ``distance_threshold`` may be ``math.inf`` as an explicit single-cluster
    sentinel. With ``order_policy="seeded-shuffle"`` the whole input sequence
    is permuted once with ``seed`` before grouping; the default keeps dataset
    order for reproducibility.
    """

    distance_threshold: float
    fusion: FusionWeights = FusionWeights()
    order_policy: str = "dataset-order"
    seed: int = 0
    record_assignments: bool = True

    def __post_init__(self):
        if not self.distance_threshold > 0:
            raise ValidationError(
                f"distance_threshold must be positive, got {self.distance_threshold}"
            )
        if self.order_policy not in ORDER_POLICIES:
            raise ValidationError(
                f"order_policy must be one of {ORDER_POLICIES}, got {self.order_policy!r}"
            )


@dataclass(frozen=True)
class TraceRecord:
    sample_id: int
    category: str
    centroid_index: int
    action: str  # "seed" | "absorb" | "create"


@dataclass(frozen=True)
class AssignmentTrace:
    """Per-sample record of which centroid absorbed it (or that it created one).

    Records appear in processing order, category by category. Every training
    sample appears exactly once and the referenced centroid indices are valid
    in the final model.
    """

    records: tuple[TraceRecord, ...]

    def by_centroid(self) -> dict[tuple[str, int], list[int]]:
        """Group sample ids by (category, centroid index)."""
        groups: dict[tuple[str, int], list[int]] = {}
        for rec in self.records:
            groups.setdefault((rec.category, rec.centroid_index), []).append(rec.sample_id)
        return groups


def write_trace_csv(trace: AssignmentTrace, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "category", "centroid_index", "action"])
    for rec in trace.records:
        writer.writerow([rec.sample_id, rec.category, rec.centroid_index, rec.action])
    binio.atomic_write_text(path, buf.getvalue())


class _ClusterState:
    """Growing float64 centroid matrices for one category."""

    def __init__(self, rgb_dim: int, depth_dim: int):
        cap = 8
        self.rgb = np.empty((cap, rgb_dim))
        self.depth = np.empty((cap, depth_dim))
        self.weights: list[int] = []
        self.count = 0

    def _grow(self):
        if self.count == self.rgb.shape[0]:
            self.rgb = np.resize(self.rgb, (2 * self.count, self.rgb.shape[1]))
            self.depth = np.resize(self.depth, (2 * self.count, self.depth.shape[1]))

    def append(self, rgb: np.ndarray, depth: np.ndarray, weight: int):
        self._grow()
        self.rgb[self.count] = rgb
        self.depth[self.count] = depth
        self.weights.append(weight)
        self.count += 1

    def distances(self, rgb: np.ndarray, depth: np.ndarray, w: FusionWeights) -> np.ndarray:
        dr = self.rgb[: self.count] - rgb
        dd = self.depth[: self.count] - depth
        dist_rgb = np.sqrt((dr * dr).sum(axis=1))
        dist_depth = np.sqrt((dd * dd).sum(axis=1))
        return 0.5 * (w.w_rgb * dist_rgb + w.w_depth * dist_depth)

    def absorb(self, index: int, rgb: np.ndarray, depth: np.ndarray, extra_weight: int = 1):
        w = float(self.weights[index])
        ww = float(extra_weight)
        denom = w + ww
        self.rgb[index] = (w * self.rgb[index] + ww * rgb) / denom
        self.depth[index] = (w * self.depth[index] + ww * depth) / denom
        self.weights[index] += extra_weight

    def to_category(self, label: str) -> CategoryModel:
        centroids = tuple(
            CentroidPair(
                rgb=self.rgb[i].astype(np.float32),
                depth=self.depth[i].astype(np.float32),
                weight=self.weights[i],
            )
            for i in range(self.count)
        )
        return CategoryModel(
            label=label, centroids=centroids, train_count=sum(self.weights)
        )


def _check_pair_dims(pair: FeaturePair, rgb_dim: int, depth_dim: int):
    if pair.rgb.size != rgb_dim:
        raise DimensionMismatchError("rgb", rgb_dim, pair.rgb.size, f"sample id {pair.id}")
    if pair.depth.size != depth_dim:
        raise DimensionMismatchError("depth", depth_dim, pair.depth.size, f"sample id {pair.id}")


def fit(
    data, cfg: TrainConfig
) -> tuple[ConceptModel, AssignmentTrace | None]:
    """Cluster labeled feature pairs into a concept model.

    Args:
        data: sequence of ``(FeaturePair, label)`` tuples.
        cfg: clustering configuration.

    Returns:
        ``(model, trace)``; the trace is None when ``cfg.record_assignments``
        is false. Model categories are ordered by label.
    """
    data = list(data)
    if not data:
        raise ValidationError("training data is empty")
    for _, label in data:
        if not label:
            raise ValidationError("training data contains an empty category label")

    if cfg.order_policy == "seeded-shuffle":
        rng = np.random.default_rng(cfg.seed)
        order = rng.permutation(len(data))
        data = [data[i] for i in order]

    first_pair = data[0][0]
    rgb_dim, depth_dim = first_pair.rgb.size, first_pair.depth.size

    groups: dict[str, list[FeaturePair]] = {}
    for pair, label in data:
        _check_pair_dims(pair, rgb_dim, depth_dim)
        groups.setdefault(label, []).append(pair)

    records: list[TraceRecord] = []
    categories = []
    for label in sorted(groups):
        state = _ClusterState(rgb_dim, depth_dim)
        for i, pair in enumerate(groups[label]):
            rgb64 = pair.rgb.astype(np.float64)
            depth64 = pair.depth.astype(np.float64)
            if i == 0:
                state.append(rgb64, depth64, 1)
                action, index = "seed", 0
            else:
                dists = state.distances(rgb64, depth64, cfg.fusion)
                index = int(np.argmin(dists))  # ties resolve to the lowest index
                if dists[index] < cfg.distance_threshold:
                    state.absorb(index, rgb64, depth64)
                    action = "absorb"
                else:
                    state.append(rgb64, depth64, 1)
                    action, index = "create", state.count - 1
            if cfg.record_assignments:
                records.append(TraceRecord(pair.id, label, index, action))
        categories.append(state.to_category(label))

    model = ConceptModel(
        categories=tuple(categories),
        fusion=cfg.fusion,
        rgb_dim=rgb_dim,
        depth_dim=depth_dim,
        distance_threshold=cfg.distance_threshold,
    )
    trace = AssignmentTrace(tuple(records)) if cfg.record_assignments else None
    return model, trace


def condense(m: ConceptModel, new_threshold: float) -> ConceptModel:
    """Re-cluster each category's centroids under a larger threshold.

    Centroids are streamed in stored order; one within the new threshold of
    an existing kept centroid is merged into it by a weight-proportional
    mean, so per-category weight sums are conserved and the centroid count
    never increases. The returned model records ``new_threshold``.
    """
    if not new_threshold > 0:
        raise ValidationError(f"new_threshold must be positive, got {new_threshold}")
    if new_threshold <= m.distance_threshold:
        warnings.warn(
            f"condense threshold {new_threshold} is not larger than the model's "
            f"threshold {m.distance_threshold}; condensation typically uses a larger one",
            stacklevel=2,
        )
    categories = []
    for cat in m.categories:
        state = _ClusterState(m.rgb_dim, m.depth_dim)
        for i, c in enumerate(cat.centroids):
            rgb64 = c.rgb.astype(np.float64)
            depth64 = c.depth.astype(np.float64)
            if i == 0:
                state.append(rgb64, depth64, c.weight)
                continue
            dists = state.distances(rgb64, depth64, m.fusion)
            index = int(np.argmin(dists))
            if dists[index] < new_threshold:
                state.absorb(index, rgb64, depth64, extra_weight=c.weight)
            else:
                state.append(rgb64, depth64, c.weight)
        categories.append(state.to_category(cat.label))
    return ConceptModel(
        categories=tuple(categories),
        fusion=m.fusion,
        rgb_dim=m.rgb_dim,
        depth_dim=m.depth_dim,
        distance_threshold=new_threshold,
    )


@dataclass(frozen=True)
class CategoryStats:
    label: str
    centroid_count: int
    min_weight: int
    max_weight: int
    mean_weight: float
    train_count: int


@dataclass(frozen=True)
class ModelStats:
    categories: tuple[CategoryStats, ...]
    total_centroids: int
    total_train_count: int

    def render(self) -> str:
        lines = [
            f"{'category':<24} {'centroids':>9} {'min_w':>6} {'max_w':>6} {'mean_w':>8} {'N':>7}"
        ]
        for s in self.categories:
            lines.append(
                f"{s.label:<24} {s.centroid_count:>9} {s.min_weight:>6} "
                f"{s.max_weight:>6} {s.mean_weight:>8.2f} {s.train_count:>7}"
            )
        lines.append(f"total centroids: {self.total_centroids}")
        lines.append(f"total training samples: {self.total_train_count}")
        return "\n".join(lines) + "\n"


def centroid_stats(m: ConceptModel) -> ModelStats:
    """Per-category centroid counts and weight statistics, plus totals."""
    cats = []
    for cat in m.categories:
        weights = [c.weight for c in cat.centroids]
        cats.append(
            CategoryStats(
                label=cat.label,
                centroid_count=len(weights),
                min_weight=min(weights),
                max_weight=max(weights),
                mean_weight=float(np.mean(weights)),
                train_count=cat.train_count,
            )
        )
    return ModelStats(
        categories=tuple(cats),
        total_centroids=m.total_centroids,
        total_train_count=sum(c.train_count for c in m.categories),
    )
