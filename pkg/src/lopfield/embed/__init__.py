"""Embedding providers, prompt composition, and feature-cloud fusion."""

from .cloud import (
    FeaturePoint,
    FeaturePointCloud,
    load_cloud,
    merge_observations,
    save_cloud,
)
from .fusion import FusionConfig, build_feature_cloud
from .providers import (
    CropRef,
    EmbeddingProvider,
    FileProvider,
    ImageRef,
    SyntheticProvider,
    compose_prompt,
    synthetic_provider,
)

__all__ = [
    "CropRef",
    "EmbeddingProvider",
    "FeaturePoint",
    "FeaturePointCloud",
    "FileProvider",
    "FusionConfig",
    "ImageRef",
    "SyntheticProvider",
    "build_feature_cloud",
    "compose_prompt",
    "load_cloud",
    "merge_observations",
    "save_cloud",
    "synthetic_provider",
]
