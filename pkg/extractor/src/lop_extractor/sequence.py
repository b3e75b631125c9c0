"""Input sequence layout and minimal camera geometry.

A sequence directory holds a posed RGB-D capture:

    meta.json            {width, height, fx, fy, cx, cy, frames}
    partition.json       {rules: [[a, b, c], ...], table: {pattern: label},
                          regions: [...]} - wall-line region annotation
    rgb/NNNNNN.png
    depth/NNNNNN.bin     little-endian float32, row-major, meters, 0 invalid
    pose/NNNNNN.txt      4x4 camera-to-world, row-major
    masks/NNNNNN.bin     little-endian int32 instance ids (-1 background),
                         required by the precomputed-mask detector
    labels.json          instance_id -> {class, confidence}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class ExtractError(Exception):
    pass


@dataclass(frozen=True)
class SequenceMeta:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    frames: int


@dataclass
class SequenceFrame:
    index: int
    rgb: Image.Image
    depth: np.ndarray
    pose: np.ndarray  # 4x4 camera-to-world


class Sequence:
    def __init__(self, root):
        self.root = Path(root)
        meta_path = self.root / "meta.json"
        if not meta_path.exists():
            raise ExtractError(f"{self.root}: missing meta.json")
        meta = json.loads(meta_path.read_text())
        self.meta = SequenceMeta(
            width=int(meta["width"]),
            height=int(meta["height"]),
            fx=float(meta["fx"]),
            fy=float(meta["fy"]),
            cx=float(meta["cx"]),
            cy=float(meta["cy"]),
            frames=int(meta["frames"]),
        )
        part_path = self.root / "partition.json"
        if not part_path.exists():
            raise ExtractError(f"{self.root}: missing partition.json")
        self.partition = json.loads(part_path.read_text())

    def frame(self, index: int) -> SequenceFrame:
        stem = f"{index:06d}"
        rgb = Image.open(self.root / "rgb" / f"{stem}.png").convert("RGB")
        depth = np.fromfile(
            self.root / "depth" / f"{stem}.bin", dtype="<f4"
        ).reshape(self.meta.height, self.meta.width)
        pose = np.loadtxt(self.root / "pose" / f"{stem}.txt").reshape(4, 4)
        return SequenceFrame(index=index, rgb=rgb, depth=depth, pose=pose)

    def mask(self, index: int) -> np.ndarray:
        path = self.root / "masks" / f"{index:06d}.bin"
        if not path.exists():
            raise ExtractError(f"{path}: missing instance mask")
        return np.fromfile(path, dtype="<i4").reshape(self.meta.height, self.meta.width)

    def labels(self) -> dict[int, dict]:
        path = self.root / "labels.json"
        if not path.exists():
            raise ExtractError(f"{path}: missing labels.json")
        raw = json.loads(path.read_text())
        return {int(k): v for k, v in raw.items()}


def back_project(us, vs, depths, meta: SequenceMeta, pose: np.ndarray) -> np.ndarray:
    cam = np.stack(
        [
            (np.asarray(us, dtype=np.float64) - meta.cx) * depths / meta.fx,
            (np.asarray(vs, dtype=np.float64) - meta.cy) * depths / meta.fy,
            np.asarray(depths, dtype=np.float64),
        ],
        axis=-1,
    )
    return cam @ pose[:3, :3].T + pose[:3, 3]


def regions_of(points_xy: np.ndarray, partition: dict) -> list[str]:
    rules = np.asarray(partition["rules"], dtype=np.float64).reshape(-1, 3)
    table = partition["table"]
    pts = np.asarray(points_xy, dtype=np.float64).reshape(-1, 2)
    if len(rules) == 0:
        label = table.get("")
        return [label] * len(pts)
    sat = pts @ rules[:, :2].T <= rules[:, 2] + 1e-6
    labels = []
    for row, pt in zip(sat, pts):
        pattern = "".join("T" if s else "F" for s in row)
        try:
            labels.append(table[pattern])
        except KeyError:
            raise ExtractError(
                f"point ({pt[0]:.3f}, {pt[1]:.3f}) outside partition coverage"
            ) from None
    return labels
