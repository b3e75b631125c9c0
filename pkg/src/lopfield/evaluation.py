"""Held-out evaluation helpers shared by the CLI and the verification suite."""

from __future__ import annotations

import numpy as np

from .errors import NoData
from .field.core import LopField
from .query import LabelBank, evaluate_region_inference
from .scene.geometry import Frame, back_project_pixels
from .scene.partition import RegionPartition, region_of_batch


def split_indices(num_frames: int, holdout_every: int) -> tuple[list[int], list[int]]:
    """(train, heldout) frame indices; every Nth frame is held out."""
    if holdout_every <= 0:
        return list(range(num_frames)), []
    train = [i for i in range(num_frames) if i % holdout_every != 0]
    held = [i for i in range(num_frames) if i % holdout_every == 0]
    return train, held


def sample_surface_points(frames: list[Frame], n: int, seed: int = 0) -> np.ndarray:
    """Back-project a seeded sample of valid pixels, spread across frames."""
    if not frames:
        raise NoData("no frames to sample from")
    rng = np.random.default_rng(seed)
    per = n // len(frames) + 1
    chunks = []
    for frame in frames:
        flat_depth = frame.depth.reshape(-1)
        valid = np.flatnonzero(flat_depth > 0)
        if len(valid) == 0:
            continue
        sel = valid[np.sort(rng.choice(len(valid), size=min(per, len(valid)), replace=False))]
        w = frame.intrinsics.width
        pts = back_project_pixels(
            (sel % w).astype(np.float64),
            (sel // w).astype(np.float64),
            flat_depth[sel].astype(np.float64),
            frame.intrinsics,
            frame.pose,
        )
        chunks.append(pts)
    if not chunks:
        raise NoData("no valid pixels in the held-out frames")
    pts = np.concatenate(chunks)
    return pts[:n]


def region_report(
    field: LopField,
    frames: list[Frame],
    partition: RegionPartition,
    bank: LabelBank,
    n: int = 1000,
    seed: int = 0,
    w: float = 0.5,
) -> dict:
    """Held-out region-inference report on surface points from ``frames``."""
    pts = sample_surface_points(frames, n, seed)
    truth = region_of_batch(pts[:, :2], partition)
    return evaluate_region_inference(field, pts, truth, bank, w)


def format_region_report(report: dict) -> str:
    lines = [
        f"points evaluated : {report['count']}",
        f"overall accuracy : {report['accuracy']:.4f}",
        "",
        f"{'region':<16} {'acc':>7} {'prec':>7} {'f1':>7} {'support':>8}",
    ]
    for label, row in report["per_label"].items():
        lines.append(
            f"{label:<16} {row['accuracy']:>7.3f} {row['precision']:>7.3f} "
            f"{row['f1']:>7.3f} {row['support']:>8d}"
        )
    return "\n".join(lines)
