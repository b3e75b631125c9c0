"""Shared fixtures.

``desk_pipeline`` is the expensive session fixture backing the acceptance
tests: the standard 4-room desk-scale run (generate, render, fuse, train,
bank). Unit tests use the small fixtures instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import pytest

from lopfield.config import RunConfig
from lopfield.embed import FusionConfig, SyntheticProvider, build_feature_cloud
from lopfield.evaluation import split_indices
from lopfield.field import LopField, TrainConfig, train
from lopfield.hashgrid import HashGridConfig
from lopfield.query import LabelBank
from lopfield.scene import SceneConfig, generate_scene, render_frame


@pytest.fixture(scope="session")
def provider():
    return SyntheticProvider(seed=5)


@pytest.fixture(scope="session")
def small_scene():
    return generate_scene(SceneConfig(rooms=2, frames=10, objects_per_room=2), seed=3)


@pytest.fixture(scope="session")
def small_frames(small_scene):
    return [render_frame(small_scene, i) for i in range(len(small_scene.trajectory))]


@pytest.fixture(scope="session")
def small_cloud(small_scene, small_frames, provider):
    return build_feature_cloud(
        small_frames,
        small_scene.partition,
        provider,
        FusionConfig(max_pixels_per_frame=768),
    )


@pytest.fixture(scope="session")
def tiny_grid_config():
    return HashGridConfig(
        levels=6,
        features_per_level=4,
        log2_table_size=12,
        base_resolution=4,
        finest_resolution=64,
    )


@dataclass
class Pipeline:
    scene: object
    frames: list
    train_frames: list
    heldout_frames: list
    cloud: object
    field: LopField
    bank: LabelBank
    provider: SyntheticProvider
    epoch_losses: list
    timings: dict = dc_field(default_factory=dict)


def run_desk_pipeline(
    scene_seed: int = 11,
    provider_seed: int = 5,
    train_seed: int = 1,
    fusion: FusionConfig = FusionConfig(),
) -> Pipeline:
    """The standard desk-scale pipeline with the shipped defaults."""
    cfg = RunConfig()
    t0 = time.monotonic()
    scene = generate_scene(cfg.scene_config(), scene_seed)
    frames = [render_frame(scene, i) for i in range(len(scene.trajectory))]
    train_idx, held_idx = split_indices(len(frames), cfg.get("fusion", "holdout_every"))
    train_frames = [frames[i] for i in train_idx]
    heldout_frames = [frames[i] for i in held_idx]
    provider = SyntheticProvider(seed=provider_seed)
    t1 = time.monotonic()
    cloud = build_feature_cloud(train_frames, scene.partition, provider, fusion)
    t2 = time.monotonic()
    grid_config = cfg.hashgrid_config().with_bounds(*cloud.bounds())
    result = train(cloud, grid_config=grid_config, train_config=TrainConfig(seed=train_seed))
    t3 = time.monotonic()
    bank = LabelBank.from_labels(scene.partition.regions, provider)
    return Pipeline(
        scene=scene,
        frames=frames,
        train_frames=train_frames,
        heldout_frames=heldout_frames,
        cloud=cloud,
        field=result.field,
        bank=bank,
        provider=provider,
        epoch_losses=result.epoch_losses,
        timings={"scene": t1 - t0, "cloud": t2 - t1, "train": t3 - t2, "total": t3 - t0},
    )


@pytest.fixture(scope="session")
def desk_pipeline():
    return run_desk_pipeline()


# acceptance criterion lines, echoed in the terminal summary so they survive
# output capture
CRITERION_LINES: list[str] = []


def record_criterion(line: str) -> None:
    CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
