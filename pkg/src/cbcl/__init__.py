"""Centroid-based concept learning for dual-modality feature vectors.

The pipeline: incremental threshold clustering turns labeled RGB/depth
feature pairs into per-category centroid pairs; classification pools the
inverse distances of the globally nearest centroid pairs with class-size
weighting; silhouette analysis over the trained model drives recursive
merging of bidirectionally confused categories.
"""

from .classify import (
    EvalReport,
    Neighbor,
    PredictConfig,
    Prediction,
    evaluate,
    format_eval_report,
    predict,
    predict_batch,
    write_predictions_csv,
)
from .datastore import (
    FeatureFile,
    JoinedDataset,
    LabelManifest,
    ManifestRow,
    SynthSpec,
    SynthTruth,
    generate_synthetic,
    join_dataset,
    path_id,
    read_features,
    read_manifest,
    write_features,
    write_manifest,
)
from .errors import (
    CbclError,
    ChecksumError,
    DimensionMismatchError,
    FormatError,
    JoinError,
    UnknownLabelError,
    UnsupportedVersionError,
    ValidationError,
)
from .introspect import (
    CategoryConfusion,
    ConfusionSummary,
    MergePlan,
    MergeRound,
    SilhouetteRecord,
    apply_merge,
    confusion_summary,
    format_merge_plan,
    merged_label,
    plan_merges,
    silhouette_all,
    write_silhouette_csv,
)
from .model import (
    CategoryModel,
    CentroidPair,
    ConceptModel,
    FeaturePair,
    FusionWeights,
    as_feature_vector,
    fused_distance,
    merge_centroids,
    update_centroid,
)
from .model_io import load_model, save_model
from .trainer import (
    AssignmentTrace,
    CategoryStats,
    ModelStats,
    TraceRecord,
    TrainConfig,
    centroid_stats,
    condense,
    fit,
    write_trace_csv,
)

__version__ = "0.1.0"
