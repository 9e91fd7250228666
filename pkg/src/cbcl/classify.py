"""Classification against a concept model and evaluation reporting.

Prediction selects the n globally closest centroid pairs (across all
categories) by fused distance, then scores each category by the sum of
inverse neighbor distances divided by that category's training-set size,
which counters class imbalance. Distances of zero are floored at a small
epsilon before inversion.
"""

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from . import binio
from .errors import DimensionMismatchError, ValidationError
from .model import ConceptModel, FeaturePair

__all__ = [
    "PredictConfig",
    "Neighbor",
    "Prediction",
    "EvalReport",
    "predict",
    "predict_batch",
    "evaluate",
    "format_eval_report",
    "write_predictions_csv",
]


@dataclass(frozen=True)
class PredictConfig:
    """Number of neighbors to pool and the zero-distance floor."""

    n_neighbors: int = 17
    epsilon: float = 1e-9

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise ValidationError(f"n_neighbors must be >= 1, got {self.n_neighbors}")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class Neighbor:
    category: str
    centroid_index: int
    distance: float


@dataclass(frozen=True)
class Prediction:
    label: str
    scores: dict[str, float]
    neighbors: tuple[Neighbor, ...]


class FlatCentroids:
    """All centroid pairs of a model flattened into contiguous matrices.

    Flat order is (category order, centroid index), which doubles as the
    deterministic tie-break order for equidistant centroids.
    """

    def __init__(self, m: ConceptModel):
        self.model = m
        self.labels = list(m.labels)
        rgb_rows, depth_rows, cat_idx, local_idx = [], [], [], []
        for ci, cat in enumerate(m.categories):
            for li, c in enumerate(cat.centroids):
                rgb_rows.append(c.rgb.astype(np.float64))
                depth_rows.append(c.depth.astype(np.float64))
                cat_idx.append(ci)
                local_idx.append(li)
        self.rgb = np.vstack(rgb_rows)
        self.depth = np.vstack(depth_rows)
        self.cat_idx = np.asarray(cat_idx, dtype=np.intp)
        self.local_idx = np.asarray(local_idx, dtype=np.intp)
        self.train_counts = np.asarray([c.train_count for c in m.categories], dtype=np.float64)

    def __len__(self) -> int:
        return self.rgb.shape[0]

    def distances(self, f: FeaturePair) -> np.ndarray:
        """Fused distances from one feature pair to every centroid pair."""
        m = self.model
        if f.rgb.size != m.rgb_dim:
            raise DimensionMismatchError("rgb", m.rgb_dim, f.rgb.size, f"sample id {f.id}")
        if f.depth.size != m.depth_dim:
            raise DimensionMismatchError("depth", m.depth_dim, f.depth.size, f"sample id {f.id}")
        dr = self.rgb - f.rgb.astype(np.float64)
        dd = self.depth - f.depth.astype(np.float64)
        dist_rgb = np.sqrt((dr * dr).sum(axis=1))
        dist_depth = np.sqrt((dd * dd).sum(axis=1))
        return 0.5 * (m.fusion.w_rgb * dist_rgb + m.fusion.w_depth * dist_depth)


def _predict_flat(flat: FlatCentroids, f: FeaturePair, cfg: PredictConfig) -> Prediction:
    m = flat.model
    n = cfg.n_neighbors
    if n > len(flat):
        warnings.warn(
            f"n_neighbors={n} exceeds the model's {len(flat)} centroids; clamping",
            stacklevel=3,
        )
        n = len(flat)
    dists = flat.distances(f)
    # Stable sort: equidistant centroids resolve to the lowest flat index,
    # i.e. lowest (category order, centroid index).
    selected = np.argsort(dists, kind="stable")[:n]

    scores = {label: 0.0 for label in flat.labels}
    neighbors = []
    for idx in selected:
        ci = flat.cat_idx[idx]
        label = flat.labels[ci]
        d = float(dists[idx])
        scores[label] += 1.0 / max(d, cfg.epsilon)
        neighbors.append(Neighbor(label, int(flat.local_idx[idx]), d))
    for ci, label in enumerate(flat.labels):
        scores[label] = float(scores[label] / flat.train_counts[ci])

    best = max(scores.values())
    label = min(l for l, v in scores.items() if v == best)
    return Prediction(label=label, scores=scores, neighbors=tuple(neighbors))


def predict(m: ConceptModel, f: FeaturePair, cfg: PredictConfig) -> Prediction:
    """Classify one feature pair against the model."""
    return _predict_flat(FlatCentroids(m), f, cfg)


def predict_batch(m: ConceptModel, fs, cfg: PredictConfig) -> list[Prediction]:
    """Classify a sequence of feature pairs; output order matches input order."""
    flat = FlatCentroids(m)
    return [_predict_flat(flat, f, cfg) for f in fs]


@dataclass(frozen=True)
class EvalReport:
    """Accuracy figures and the confusion matrix of one evaluation run.

    ``labels`` gives the (sorted) row and column order of ``confusion``;
    rows are ground truth, columns are predictions. ``mean_class_accuracy``
    averages per-class accuracy over classes with at least one test sample.
    """

    overall_accuracy: float
    mean_class_accuracy: float
    labels: tuple[str, ...]
    confusion: np.ndarray
    per_class_accuracy: dict[str, float]

    @property
    def test_counts(self) -> dict[str, int]:
        sums = self.confusion.sum(axis=1)
        return {label: int(sums[i]) for i, label in enumerate(self.labels)}


def evaluate(m: ConceptModel, test, cfg: PredictConfig) -> EvalReport:
    """Predict every labeled test pair and tabulate accuracy.

    Test labels absent from the model are legal; such samples can never be
    predicted correctly and occupy confusion rows with an all-zero diagonal.
    """
    test = list(test)
    if not test:
        raise ValidationError("test set is empty")
    truth = [label for _, label in test]
    preds = predict_batch(m, [pair for pair, _ in test], cfg)

    labels = tuple(sorted(set(m.labels) | set(truth)))
    index = {label: i for i, label in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for true_label, pred in zip(truth, preds):
        confusion[index[true_label], index[pred.label]] += 1

    row_sums = confusion.sum(axis=1)
    diag = np.diag(confusion)
    per_class = {
        label: float(diag[i]) / float(row_sums[i])
        for i, label in enumerate(labels)
        if row_sums[i] > 0
    }
    overall = float(diag.sum()) / float(len(test))
    mean_class = float(np.mean([per_class[l] for l in labels if l in per_class]))
    return EvalReport(
        overall_accuracy=overall,
        mean_class_accuracy=mean_class,
        labels=labels,
        confusion=confusion,
        per_class_accuracy=per_class,
    )


def format_eval_report(report: EvalReport, header: dict | None = None) -> str:
    """Render an evaluation report as a deterministic text document.

    ``header`` holds provenance key/value pairs (hyperparameters, paths)
    emitted before the figures, in the order given.
    """
    lines = ["# evaluation report"]
    for key, value in (header or {}).items():
        lines.append(f"{key}: {value}")
    lines.append(f"overall_accuracy: {report.overall_accuracy:.6f}")
    lines.append(f"mean_class_accuracy: {report.mean_class_accuracy:.6f}")
    lines.append("per_class_accuracy:")
    counts = report.test_counts
    for label in report.labels:
        if label in report.per_class_accuracy:
            lines.append(
                f"  {label}: {report.per_class_accuracy[label]:.6f} ({counts[label]} samples)"
            )
    lines.append("confusion_matrix (rows = ground truth, cols = predicted):")
    lines.append("," + ",".join(report.labels))
    for i, label in enumerate(report.labels):
        lines.append(label + "," + ",".join(str(int(v)) for v in report.confusion[i]))
    return "\n".join(lines) + "\n"


def write_predictions_csv(path, ids, predictions) -> None:
    """Write predictions as CSV: id, label, top score, then each neighbor."""
    predictions = list(predictions)
    n_cols = max((len(p.neighbors) for p in predictions), default=0)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["sample_id", "predicted", "score_top1"]
    for i in range(1, n_cols + 1):
        header += [f"neighbor_{i}_category", f"neighbor_{i}_distance"]
    writer.writerow(header)
    for sample_id, p in zip(ids, predictions):
        row = [sample_id, p.label, repr(p.scores[p.label])]
        for nb in p.neighbors:
            row += [nb.category, repr(nb.distance)]
        writer.writerow(row)
    binio.atomic_write_text(path, buf.getvalue())
