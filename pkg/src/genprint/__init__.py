"""Synthetic-image forensics over diffusion feature prototypes.

Compact per-image feature vectors (channel means of a denoising U-Net layer)
feed three capabilities: training-free real/fake detection with k-NN, 9-way
source attribution with small MLPs, and gradient-based feature attribution
analysis of what those models use.
"""

__version__ = "0.1.0"

from .feature_store import (
    ATTRIBUTION_CLASSES,
    GENERATOR_ORDER,
    Authenticity,
    FeatureSet,
    FeatureStoreError,
    Generator,
    PrototypeRecord,
    SplitPair,
    read_feature_file,
    sample_attribution_support,
    sample_support,
    split_train_val,
    write_feature_file,
)
from .knn import KnnConfig, SupportSet, knn_predict, knn_predict_batch, predict_multi_k, tie_break
from .metrics import ALL_METRICS, DistanceMetric, distance, pairwise_distances

__all__ = [
    "ATTRIBUTION_CLASSES",
    "GENERATOR_ORDER",
    "ALL_METRICS",
    "Authenticity",
    "DistanceMetric",
    "FeatureSet",
    "FeatureStoreError",
    "Generator",
    "KnnConfig",
    "PrototypeRecord",
    "SplitPair",
    "SupportSet",
    "distance",
    "knn_predict",
    "knn_predict_batch",
    "pairwise_distances",
    "predict_multi_k",
    "read_feature_file",
    "sample_attribution_support",
    "sample_support",
    "split_train_val",
    "tie_break",
    "write_feature_file",
    "__version__",
]
