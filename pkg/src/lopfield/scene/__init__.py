"""Camera geometry, floor-plan partitions, and synthetic apartment scenes."""

from .geometry import (
    Frame,
    Intrinsics,
    Pose,
    back_project,
    back_project_pixels,
    project,
)
from .io import load_frames, load_scene_dir, save_scene_dir
from .partition import RegionPartition, region_of, region_of_batch, single_region
from .synthetic import (
    OBJECT_VOCABULARY,
    REGION_VOCABULARY,
    SceneConfig,
    SceneObject,
    SyntheticScene,
    generate_scene,
    render_all,
    render_frame,
)

__all__ = [
    "Frame",
    "Intrinsics",
    "Pose",
    "RegionPartition",
    "SceneConfig",
    "SceneObject",
    "SyntheticScene",
    "OBJECT_VOCABULARY",
    "REGION_VOCABULARY",
    "back_project",
    "back_project_pixels",
    "generate_scene",
    "load_frames",
    "load_scene_dir",
    "project",
    "region_of",
    "region_of_batch",
    "render_all",
    "render_frame",
    "save_scene_dir",
    "single_region",
]
