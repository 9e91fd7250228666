"""Feature extraction from paired RGB/depth image datasets."""

from .backbones import BACKBONES, build_feature_head
from .dataset import Sample, assign_splits, walk_pairs
from .extract import ExtractSpec, ExtractSummary, extract
from .formats import path_id, write_cbf, write_manifest

__version__ = "0.1.0"
