"""Silhouette analysis of a trained model and recursive category merging.

For each training sample the silhouette uses centroid distances: ``a`` is
the fused distance to the nearest centroid pair of the sample's own
category, ``b`` the fused distance to the nearest centroid pair of any
other category, and ``s = (b - a) / max(a, b)`` (zero when both are zero).
A sample with ``s <= 0`` sits closer to, or exactly as close to, a foreign
concept as to its own.

Categories whose low-silhouette samples point at each other are merged:
when more than 25% of each side's samples have ``s <= 0`` and each side's
most common "better fit" category is the other, the pair is combined under
a joint label and its centroids refit from the pooled raw training
features. The analysis repeats on the new labeling until no pair
qualifies.
"""

import csv
import io
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import binio
from .classify import FlatCentroids
from .errors import UnknownLabelError, ValidationError
from .model import ConceptModel
from .trainer import TrainConfig, fit

__all__ = [
    "SilhouetteRecord",
    "CategoryConfusion",
    "ConfusionSummary",
    "MergeRound",
    "MergePlan",
    "silhouette_all",
    "confusion_summary",
    "plan_merges",
    "apply_merge",
    "merged_label",
    "format_merge_plan",
    "write_silhouette_csv",
]

CONFUSION_THRESHOLD = 0.25


@dataclass(frozen=True)
class SilhouetteRecord:
    sample_id: int
    category: str
    s: float
    a: float
    b: float
    nearest_other: str


@dataclass(frozen=True)
class CategoryConfusion:
    """Fraction of a category's samples with s <= 0 and where they point.

    ``y_conf`` is the most common nearest-other category among those
    samples (ties resolve to the lexicographically smallest label), or
    None when no sample has s <= 0.
    """

    z_conf: float
    y_conf: str | None


@dataclass(frozen=True)
class ConfusionSummary:
    by_category: dict[str, CategoryConfusion]


@dataclass(frozen=True)
class MergeRound:
    """One analysis iteration: its evidence and the pairs it merged."""

    merges: tuple[tuple[str, str, str], ...]  # (label_a, label_b, merged label)
    evidence: ConfusionSummary


@dataclass(frozen=True)
class MergePlan:
    """All analysis rounds plus the resulting label mapping.

    ``final_mapping`` maps every label that ever existed during the run
    (originals, intermediates, and finals) to its final label, so applying
    the plan is idempotent.
    """

    rounds: tuple[MergeRound, ...]
    final_mapping: dict[str, str]

    @property
    def is_empty(self) -> bool:
        return all(not r.merges for r in self.rounds)

    def remap(self, label: str) -> str:
        if label not in self.final_mapping:
            raise UnknownLabelError(label, "merge plan")
        return self.final_mapping[label]


def silhouette_all(m: ConceptModel, train) -> list[SilhouetteRecord]:
    """Compute a silhouette record for every labeled training pair.

    Requires at least two model categories (otherwise there is no "other
    side" and the silhouette is undefined) and that every training label
    exists in the model.
    """
    if len(m.categories) < 2:
        raise ValidationError("silhouette analysis requires a model with >= 2 categories")
    flat = FlatCentroids(m)
    label_to_ci = {label: i for i, label in enumerate(flat.labels)}
    records = []
    for pair, label in train:
        if label not in label_to_ci:
            raise UnknownLabelError(label, "model")
        ci = label_to_ci[label]
        dists = flat.distances(pair)
        own = flat.cat_idx == ci
        a = float(dists[own].min())
        foreign = np.where(own, np.inf, dists)
        # argmin returns the first minimum: ties resolve to the earliest
        # (category order, centroid index) position.
        b_idx = int(np.argmin(foreign))
        b = float(dists[b_idx])
        nearest_other = flat.labels[int(flat.cat_idx[b_idx])]
        denom = max(a, b)
        s = (b - a) / denom if denom > 0 else 0.0
        records.append(
            SilhouetteRecord(
                sample_id=pair.id, category=label, s=s, a=a, b=b, nearest_other=nearest_other
            )
        )
    return records


def confusion_summary(records, m: ConceptModel) -> ConfusionSummary:
    """Summarize silhouette records into per-category confusion evidence."""
    records = list(records)
    if not records:
        raise ValidationError("confusion summary requires at least one silhouette record")
    totals: Counter = Counter()
    confused: dict[str, Counter] = {}
    for rec in records:
        totals[rec.category] += 1
        if rec.s <= 0:
            confused.setdefault(rec.category, Counter())[rec.nearest_other] += 1
    by_category = {}
    for label in m.labels:
        n = totals.get(label, 0)
        counter = confused.get(label)
        if n == 0 or not counter:
            by_category[label] = CategoryConfusion(z_conf=0.0, y_conf=None)
            continue
        z = sum(counter.values()) / n
        top = max(counter.values())
        y = min(other for other, cnt in counter.items() if cnt == top)
        by_category[label] = CategoryConfusion(z_conf=z, y_conf=y)
    return ConfusionSummary(by_category=by_category)


def merged_label(a: str, b: str) -> str:
    """Joint label for a merged pair: the two labels joined in sorted order."""
    return "+".join(sorted((a, b)))


def _bidirectional_pairs(summary: ConfusionSummary) -> list[tuple[str, str]]:
    pairs = []
    for j in sorted(summary.by_category):
        cj = summary.by_category[j]
        if cj.z_conf <= CONFUSION_THRESHOLD or cj.y_conf is None:
            continue
        k = cj.y_conf
        if k <= j:
            continue  # handle each unordered pair once, from its smaller label
        ck = summary.by_category.get(k)
        if ck is not None and ck.z_conf > CONFUSION_THRESHOLD and ck.y_conf == j:
            pairs.append((j, k))
    return pairs


def plan_merges(m: ConceptModel, train) -> MergePlan:
    """Iteratively merge bidirectionally confused category pairs.

    Each round computes silhouettes under the current labeling, merges every
    qualifying pair (relabeling its samples and refitting the joint category
    from their pooled features with the model's threshold and fusion
    weights), and repeats until no pair qualifies or one category remains.
    Every analysis round is recorded with its evidence.
    """
    train = list(train)
    if len(m.categories) < 2:
        raise ValidationError("merge planning requires a model with >= 2 categories")
    pairs = [pair for pair, _ in train]
    labels = [label for _, label in train]
    current = m
    mapping = {label: label for label in m.labels}
    rounds: list[MergeRound] = []

    while len(current.categories) >= 2:
        records = silhouette_all(current, zip(pairs, labels))
        summary = confusion_summary(records, current)
        to_merge = _bidirectional_pairs(summary)
        merges = tuple((j, k, merged_label(j, k)) for j, k in to_merge)
        rounds.append(MergeRound(merges=merges, evidence=summary))
        if not to_merge:
            break

        renames = {}
        for j, k, g in merges:
            renames[j] = g
            renames[k] = g
        labels = [renames.get(label, label) for label in labels]
        for key, value in list(mapping.items()):
            if value in renames:
                mapping[key] = renames[value]
        for g in renames.values():
            mapping[g] = g

        cfg = TrainConfig(
            distance_threshold=current.distance_threshold,
            fusion=current.fusion,
            record_assignments=False,
        )
        kept = [cat for cat in current.categories if cat.label not in renames]
        refit = []
        for j, k, g in merges:
            pooled = [(p, g) for p, label in zip(pairs, labels) if label == g]
            submodel, _ = fit(pooled, cfg)
            refit.append(submodel.categories[0])
        categories = tuple(sorted(kept + refit, key=lambda c: c.label))
        current = ConceptModel(
            categories=categories,
            fusion=current.fusion,
            rgb_dim=current.rgb_dim,
            depth_dim=current.depth_dim,
            distance_threshold=current.distance_threshold,
        )

    return MergePlan(rounds=tuple(rounds), final_mapping=mapping)


def apply_merge(plan: MergePlan, data) -> list:
    """Relabel a ``(FeaturePair, label)`` dataset per the plan's mapping.

    Unknown labels raise; applying the plan to its own output is a no-op
    because final labels map to themselves.
    """
    return [(pair, plan.remap(label)) for pair, label in data]


def format_merge_plan(plan: MergePlan) -> str:
    """Render a merge plan as a deterministic text document."""
    lines = ["# category merge plan"]
    lines.append(f"rounds: {len(plan.rounds)}")
    for i, rnd in enumerate(plan.rounds, start=1):
        lines.append(f"round {i}:")
        lines.append("  evidence:")
        for label in sorted(rnd.evidence.by_category):
            c = rnd.evidence.by_category[label]
            y = c.y_conf if c.y_conf is not None else "-"
            lines.append(f"    {label}: z_conf={c.z_conf:.6f} y_conf={y}")
        if rnd.merges:
            for j, k, g in rnd.merges:
                lines.append(f"  merge: {j} + {k} -> {g}")
        else:
            lines.append("  merge: none (terminated)")
    lines.append("final_mapping:")
    for label in sorted(plan.final_mapping):
        lines.append(f"  {label} -> {plan.final_mapping[label]}")
    return "\n".join(lines) + "\n"


def write_silhouette_csv(records, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "category", "s", "a", "b", "nearest_other"])
    for rec in records:
        writer.writerow(
            [rec.sample_id, rec.category, repr(rec.s), repr(rec.a), repr(rec.b), rec.nearest_other]
        )
    binio.atomic_write_text(path, buf.getvalue())
