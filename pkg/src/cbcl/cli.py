"""Command-line surface for the full pipeline.

Subcommands: fit, predict, eval, tune, condense, silhouette, merge, synth,
inspect. All outputs are written atomically (temp file + rename). Failures
print a single machine-parsable line to stderr and exit with the error
class's documented code.
"""

import argparse
import itertools
import logging
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import binio
from .classify import PredictConfig, evaluate, format_eval_report, predict_batch, write_predictions_csv
from .datastore import (
    LabelManifest,
    SynthSpec,
    generate_synthetic,
    join_dataset,
    read_features,
    read_manifest,
    write_features,
    write_manifest,
)
from .errors import CbclError, JoinError, ValidationError
from .introspect import (
    format_merge_plan,
    plan_merges,
    silhouette_all,
    write_silhouette_csv,
)
from .model import FeaturePair, FusionWeights
from .model_io import load_model, save_model
from .trainer import TrainConfig, centroid_stats, condense, fit, write_trace_csv

log = logging.getLogger("cbcl")

EXIT_CODE_DOC = """\
exit codes:
  0  success
  1  unexpected error
  2  usage error
  3  dimension mismatch
  4  malformed file (bad magic, truncation, bad layout)
  5  unsupported format version
  6  checksum failure
  7  sample-id mismatch between inputs
  8  invariant or precondition violation
  9  unknown category label

environment:
  CBCL_THREADS  caps worker parallelism for grid tuning (default: cpu count)
"""


def _add_feature_args(p, out: bool = False):
    helper = "output path for" if out else "path to"
    p.add_argument("--rgb", required=True, help=f"{helper} rgb feature file")
    p.add_argument("--depth", required=True, help=f"{helper} depth feature file")
    p.add_argument(
        "--format",
        choices=["cbf", "csv"],
        default=None,
        help="feature file encoding (default: by extension, .csv means csv)",
    )


def _feature_encoding(path, fmt):
    if fmt is not None:
        return fmt
    return "csv" if str(path).endswith(".csv") else "cbf"


def _load_features(path, fmt, modality):
    return read_features(path, encoding=_feature_encoding(path, fmt), modality=modality)


def _load_joined(args):
    rgb = _load_features(args.rgb, args.format, "rgb")
    depth = _load_features(args.depth, args.format, "depth")
    manifest = read_manifest(args.labels)
    return join_dataset(rgb, depth, manifest)


def _split_of(joined, split):
    data = joined.train if split == "train" else joined.test
    if not data:
        raise ValidationError(f"the {split} split is empty")
    return data


def _pairs_without_labels(rgb, depth):
    rgb_ids = {int(i) for i in rgb.ids.tolist()}
    depth_ids = {int(i) for i in depth.ids.tolist()}
    if rgb_ids != depth_ids:
        missing = sorted(rgb_ids.symmetric_difference(depth_ids))
        shown = ", ".join(str(i) for i in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise JoinError(f"rgb and depth feature ids disagree; offending ids: {shown}{more}")
    depth_by_id = {int(depth.ids[i]): depth.vectors[i] for i in range(len(depth))}
    return [
        FeaturePair(id=int(rgb.ids[i]), rgb=rgb.vectors[i], depth=depth_by_id[int(rgb.ids[i])])
        for i in range(len(rgb))
    ]


def _thread_cap():
    raw = os.environ.get("CBCL_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError:
        raise ValidationError(f"CBCL_THREADS must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ValidationError(f"CBCL_THREADS must be >= 1, got {cap}")
    return cap


def cmd_synth(args) -> int:
    spec = SynthSpec(
        categories=args.categories,
        layouts=args.layouts,
        rgb_dim=args.rgb_dim,
        depth_dim=args.depth_dim,
        center_spread=args.spread,
        noise_sigma=args.sigma,
        samples_per_layout=args.samples_per_layout,
        seed=args.seed,
        train_fraction=args.train_fraction,
    )
    rgb, depth, manifest, truth = generate_synthetic(spec)
    enc_rgb = _feature_encoding(args.rgb, args.format)
    enc_depth = _feature_encoding(args.depth, args.format)
    write_features(args.rgb, rgb, encoding=enc_rgb)
    write_features(args.depth, depth, encoding=enc_depth)
    write_manifest(args.labels, manifest)
    if args.truth:
        lines = ["sample_id,category,layout"]
        lines += [f"{i},{c},{l}" for i, c, l in truth.assignments]
        binio.atomic_write_text(args.truth, "\n".join(lines) + "\n")
    log.info("wrote %d samples across %d categories", len(rgb), spec.categories)
    return 0


def cmd_fit(args) -> int:
    joined = _load_joined(args)
    train = _split_of(joined, "train")
    cfg = TrainConfig(
        distance_threshold=args.distance_threshold,
        fusion=FusionWeights(w_rgb=args.w_rgb, w_depth=args.w_depth),
        order_policy="seeded-shuffle" if args.shuffle else "dataset-order",
        seed=args.seed,
        record_assignments=args.trace is not None,
    )
    model, trace = fit(train, cfg)
    save_model(model, args.model)
    if args.trace is not None:
        write_trace_csv(trace, args.trace)
    log.info(
        "fit %d samples into %d centroids over %d categories",
        len(train),
        model.total_centroids,
        len(model.categories),
    )
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    rgb = _load_features(args.rgb, args.format, "rgb")
    depth = _load_features(args.depth, args.format, "depth")
    if args.labels:
        joined = join_dataset(rgb, depth, read_manifest(args.labels))
        pairs = [pair for pair, _ in _split_of(joined, args.split)]
    else:
        pairs = _pairs_without_labels(rgb, depth)
    cfg = PredictConfig(n_neighbors=args.n_neighbors)
    preds = predict_batch(model, pairs, cfg)
    write_predictions_csv(args.out, [p.id for p in pairs], preds)
    return 0


def _provenance(model, args, split, n_samples):
    return {
        "model": args.model,
        "distance_threshold": repr(model.distance_threshold),
        "n_neighbors": args.n_neighbors,
        "w_rgb": repr(model.fusion.w_rgb),
        "w_depth": repr(model.fusion.w_depth),
        "split": split,
        "samples": n_samples,
    }


def cmd_eval(args) -> int:
    model = load_model(args.model)
    joined = _load_joined(args)
    test = _split_of(joined, args.split)
    cfg = PredictConfig(n_neighbors=args.n_neighbors)
    report = evaluate(model, test, cfg)
    text = format_eval_report(report, _provenance(model, args, args.split, len(test)))
    binio.atomic_write_text(args.out, text)
    print(
        f"overall_accuracy={report.overall_accuracy:.6f} "
        f"mean_class_accuracy={report.mean_class_accuracy:.6f}"
    )
    return 0


def cmd_condense(args) -> int:
    model = load_model(args.model)
    condensed = condense(model, args.distance_threshold)
    save_model(condensed, args.out)
    log.info(
        "condensed %d centroids to %d", model.total_centroids, condensed.total_centroids
    )
    return 0


def cmd_silhouette(args) -> int:
    model = load_model(args.model)
    joined = _load_joined(args)
    data = _split_of(joined, args.split)
    records = silhouette_all(model, data)
    write_silhouette_csv(records, args.out)
    return 0


def cmd_merge(args) -> int:
    model = load_model(args.model)
    joined = _load_joined(args)
    data = _split_of(joined, args.split)
    plan = plan_merges(model, data)
    binio.atomic_write_text(args.out, format_merge_plan(plan))
    if args.relabeled:
        manifest = read_manifest(args.labels)
        rows = []
        for row in manifest.rows:
            label = plan.final_mapping.get(row.category, row.category)
            rows.append(type(row)(id=row.id, category=label, split=row.split))
        write_manifest(args.relabeled, LabelManifest(rows=tuple(rows)))
    merged = sum(len(r.merges) for r in plan.rounds)
    print(f"rounds={len(plan.rounds)} merges={merged}")
    return 0


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    stats = centroid_stats(model)
    text = stats.render()
    if args.out:
        binio.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _parse_grid(raw: str, cast, flag: str):
    if not raw.strip():
        raise ValidationError(f"{flag} grid is empty")
    try:
        values = [cast(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad {flag} grid {raw!r}: {exc}") from None
    if not values:
        raise ValidationError(f"{flag} grid is empty")
    return values


def _stratified_folds(train, folds: int, seed: int):
    """Assign every training index to exactly one validation fold, per category."""
    rng = np.random.default_rng(seed)
    by_category: dict[str, list[int]] = {}
    for i, (_, label) in enumerate(train):
        by_category.setdefault(label, []).append(i)
    assignment = np.empty(len(train), dtype=np.intp)
    for label in sorted(by_category):
        indices = by_category[label]
        if len(indices) < folds:
            raise ValidationError(
                f"category {label!r} has {len(indices)} training samples, "
                f"fewer than {folds} folds"
            )
        shuffled = [indices[i] for i in rng.permutation(len(indices))]
        for fold in range(folds):
            for i in shuffled[fold::folds]:
                assignment[i] = fold
    return assignment


def _tune_point(train, assignment, folds, d, n, w_rgb, w_depth):
    cfg = TrainConfig(
        distance_threshold=d,
        fusion=FusionWeights(w_rgb=w_rgb, w_depth=w_depth),
        record_assignments=False,
    )
    pcfg = PredictConfig(n_neighbors=n)
    scores = []
    for fold in range(folds):
        fit_part = [train[i] for i in range(len(train)) if assignment[i] != fold]
        val_part = [train[i] for i in range(len(train)) if assignment[i] == fold]
        model, _ = fit(fit_part, cfg)
        report = evaluate(model, val_part, pcfg)
        scores.append(report.mean_class_accuracy)
    return scores


def cmd_tune(args) -> int:
    joined = _load_joined(args)
    train = _split_of(joined, "train")
    grid_d = _parse_grid(args.grid_d, float, "--grid-d")
    grid_n = _parse_grid(args.grid_n, int, "--grid-n")
    grid_wd = _parse_grid(args.grid_wd, float, "--grid-wd")
    grid = list(itertools.product(grid_d, grid_n, grid_wd))
    deduped = list(dict.fromkeys(grid))
    if len(deduped) != len(grid):
        warnings.warn(f"{len(grid) - len(deduped)} duplicate grid points dropped")
        grid = deduped

    assignment = _stratified_folds(train, args.folds, args.seed)
    cap = min(_thread_cap(), len(grid))

    def score(point):
        d, n, wd = point
        return _tune_point(train, assignment, args.folds, d, n, args.w_rgb, wd)

    if cap > 1:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            fold_scores = list(pool.map(score, grid))
    else:
        fold_scores = [score(p) for p in grid]

    results = [
        (d, n, wd, float(np.mean(scores)), scores)
        for (d, n, wd), scores in zip(grid, fold_scores)
    ]
    best = max(results, key=lambda r: r[3])

    lines = ["# grid search over (distance_threshold, n_neighbors, w_depth)"]
    lines.append(f"folds: {args.folds}")
    lines.append(f"seed: {args.seed}")
    lines.append(f"w_rgb: {repr(args.w_rgb)}")
    for d, n, wd, mean, scores in results:
        per_fold = ",".join(f"{s:.6f}" for s in scores)
        lines.append(
            f"D={repr(d)} n={n} w_depth={repr(wd)} mean_class_accuracy={mean:.6f} "
            f"folds=[{per_fold}]"
        )
    d, n, wd, mean, _ = best
    lines.append(f"best: D={repr(d)} n={n} w_depth={repr(wd)} mean_class_accuracy={mean:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        binio.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbcl",
        description="Centroid-based concept learning over dual-modality feature vectors.",
        epilog=EXIT_CODE_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--verbose", action="store_true", help="enable progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic two-modality dataset")
    _add_feature_args(p, out=True)
    p.add_argument("--labels", required=True, help="output path for the label manifest")
    p.add_argument("--categories", type=int, default=5)
    p.add_argument("--layouts", type=int, default=3)
    p.add_argument("--rgb-dim", type=int, default=16)
    p.add_argument("--depth-dim", type=int, default=16)
    p.add_argument("--spread", type=float, default=10.0, help="layout-center spread")
    p.add_argument("--sigma", type=float, default=0.5, help="intra-layout noise sigma")
    p.add_argument("--samples-per-layout", type=int, default=100)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--truth", default=None, help="optional ground-truth CSV output")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="cluster labeled training features into a model")
    _add_feature_args(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True, help="output path for the model file")
    p.add_argument("--distance-threshold", type=float, default=85.0)
    p.add_argument("--w-rgb", type=float, default=1.0)
    p.add_argument("--w-depth", type=float, default=0.73)
    p.add_argument("--shuffle", action="store_true", help="seeded shuffle before clustering")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trace", default=None, help="optional assignment-trace CSV output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="classify feature pairs against a model")
    _add_feature_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output predictions CSV")
    p.add_argument("--labels", default=None, help="restrict to one split of this manifest")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--n-neighbors", type=int, default=17)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate a model on a labeled split")
    _add_feature_args(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output report path")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--n-neighbors", type=int, default=17)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tune", help="grid search hyperparameters by cross-validation")
    _add_feature_args(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--grid-d", required=True, help="comma-separated distance thresholds")
    p.add_argument("--grid-n", required=True, help="comma-separated neighbor counts")
    p.add_argument("--grid-wd", required=True, help="comma-separated depth fusion weights")
    p.add_argument("--w-rgb", type=float, default=1.0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None, help="optional score-table output path")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("condense", help="re-cluster a model's centroids at a larger threshold")
    p.add_argument("--model", required=True)
    p.add_argument("--distance-threshold", type=float, required=True)
    p.add_argument("--out", required=True, help="output model path")
    p.set_defaults(func=cmd_condense)

    p = sub.add_parser("silhouette", help="silhouette records for a labeled split")
    _add_feature_args(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--split", choices=["train", "test"], default="train")
    p.set_defaults(func=cmd_silhouette)

    p = sub.add_parser("merge", help="plan category merges from silhouette confusion")
    _add_feature_args(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output merge-plan path")
    p.add_argument("--split", choices=["train", "test"], default="train")
    p.add_argument("--relabeled", default=None, help="optional merged-label manifest output")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("inspect", help="per-category centroid statistics of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="optional output path (default: stdout)")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        if getattr(args, "folds", None) is not None and args.folds < 2:
            raise ValidationError(f"--folds must be >= 2, got {args.folds}")
        return args.func(args)
    except CbclError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: OSError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
