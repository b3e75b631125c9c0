"""Scene sequence directory format.

Layout written by the generator and consumed by fusion, mapping, and any
real-data adapter:

    scene.json                  rooms, doorways, objects, partition, intrinsics
    labels.json                 instance_id -> {class, confidence}
    frames/NNNNNN.depth.bin     little-endian float32, row-major, H*W
    frames/NNNNNN.inst.bin      little-endian int32, row-major, H*W
    frames/NNNNNN.pose.txt      4x4 camera-to-world, row-major, whitespace
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import SchemaError
from .geometry import Frame, Intrinsics, Pose
from .partition import RegionPartition
from .synthetic import (
    Room,
    SceneObject,
    SyntheticScene,
    WallSegment,
    render_frame,
)


def _intrinsics_to_dict(intr: Intrinsics) -> dict:
    return {
        "fx": intr.fx,
        "fy": intr.fy,
        "cx": intr.cx,
        "cy": intr.cy,
        "width": intr.width,
        "height": intr.height,
    }


def _intrinsics_from_dict(d: dict) -> Intrinsics:
    return Intrinsics(
        fx=float(d["fx"]),
        fy=float(d["fy"]),
        cx=float(d["cx"]),
        cy=float(d["cy"]),
        width=int(d["width"]),
        height=int(d["height"]),
    )


def _segment_to_dict(seg: WallSegment) -> dict:
    return {
        "room_a": seg.room_a,
        "room_b": seg.room_b,
        "axis": seg.axis,
        "coord": seg.coord,
        "lo": seg.lo,
        "hi": seg.hi,
        "door_lo": seg.door_lo,
        "door_hi": seg.door_hi,
        "door_height": seg.door_height,
    }


def scene_to_dict(scene: SyntheticScene) -> dict:
    return {
        "format": "lop-scene",
        "version": 1,
        "seed": scene.seed,
        "extent": list(scene.extent),
        "rooms": [
            {"label": r.label, "x0": r.x0, "y0": r.y0, "x1": r.x1, "y1": r.y1}
            for r in scene.rooms
        ],
        "doorways": [_segment_to_dict(s) for s in scene.doorways],
        "walls": [_segment_to_dict(s) for s in scene.walls],
        "objects": [
            {
                "instance_id": o.instance_id,
                "label": o.label,
                "room": o.room,
                "box_min": list(o.box_min),
                "box_max": list(o.box_max),
                "confidence": o.confidence,
            }
            for o in scene.objects
        ],
        "partition": scene.partition.to_dict(),
        "intrinsics": _intrinsics_to_dict(scene.intrinsics),
        "num_frames": len(scene.trajectory),
    }


def scene_from_dict(data: dict, trajectory: list[Pose]) -> SyntheticScene:
    segs = [WallSegment(**s) for s in data.get("walls", [])]
    doors = [WallSegment(**s) for s in data.get("doorways", [])]
    return SyntheticScene(
        rooms=[Room(**r) for r in data.get("rooms", [])],
        doorways=doors,
        walls=segs,
        objects=[
            SceneObject(
                instance_id=o["instance_id"],
                label=o["label"],
                room=o["room"],
                box_min=tuple(o["box_min"]),
                box_max=tuple(o["box_max"]),
                confidence=o["confidence"],
            )
            for o in data.get("objects", [])
        ],
        trajectory=trajectory,
        partition=RegionPartition.from_dict(data["partition"]),
        intrinsics=_intrinsics_from_dict(data["intrinsics"]),
        extent=tuple(data["extent"]),
        seed=int(data.get("seed", 0)),
    )


def save_scene_dir(scene: SyntheticScene, out_dir) -> Path:
    """Render every trajectory pose and write the full sequence directory."""
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    with open(out / "scene.json", "w") as f:
        json.dump(scene_to_dict(scene), f, indent=2, sort_keys=True)
    labels = {
        str(o.instance_id): {"class": o.label, "confidence": o.confidence}
        for o in scene.objects
    }
    with open(out / "labels.json", "w") as f:
        json.dump(labels, f, indent=2, sort_keys=True)
    for i in range(len(scene.trajectory)):
        frame = render_frame(scene, i)
        write_frame_files(frame, out / "frames", i)
    return out


def write_frame_files(frame: Frame, frames_dir, index: int) -> None:
    frames_dir = Path(frames_dir)
    frames_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{index:06d}"
    frame.depth.astype("<f4").tofile(frames_dir / f"{stem}.depth.bin")
    frame.instance_ids.astype("<i4").tofile(frames_dir / f"{stem}.inst.bin")
    np.savetxt(frames_dir / f"{stem}.pose.txt", frame.pose.to_matrix(), fmt="%.17g")


def load_scene_dir(path) -> SyntheticScene:
    """Load scene metadata plus trajectory; frames load separately."""
    root = Path(path)
    with open(root / "scene.json") as f:
        data = json.load(f)
    if data.get("format") != "lop-scene":
        raise SchemaError(f"{root}/scene.json is not a scene file")
    poses = []
    for i in range(int(data.get("num_frames", 0))):
        m = np.loadtxt(root / "frames" / f"{i:06d}.pose.txt")
        poses.append(Pose.from_matrix(m))
    return scene_from_dict(data, poses)


def load_frames(path, indices=None) -> list[Frame]:
    """Load rendered frames from a sequence directory.

    ``indices`` selects a subset (train/test splits); default is all frames
    in filename order.
    """
    root = Path(path)
    with open(root / "scene.json") as f:
        data = json.load(f)
    intr = _intrinsics_from_dict(data["intrinsics"])
    with open(root / "labels.json") as f:
        raw_labels = json.load(f)
    labels = {int(k): v["class"] for k, v in raw_labels.items()}
    confs = {int(k): float(v["confidence"]) for k, v in raw_labels.items()}
    n = int(data.get("num_frames", 0))
    if indices is None:
        indices = range(n)
    frames = []
    for i in indices:
        stem = root / "frames" / f"{i:06d}"
        depth = np.fromfile(f"{stem}.depth.bin", dtype="<f4").reshape(
            intr.height, intr.width
        )
        inst = np.fromfile(f"{stem}.inst.bin", dtype="<i4").reshape(
            intr.height, intr.width
        )
        pose = Pose.from_matrix(np.loadtxt(f"{stem}.pose.txt"))
        frames.append(
            Frame(
                depth=depth,
                instance_ids=inst,
                instance_labels=labels,
                instance_confidences=confs,
                pose=pose,
                intrinsics=intr,
            )
        )
    return frames
