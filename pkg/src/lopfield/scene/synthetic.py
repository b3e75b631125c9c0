"""Procedural synthetic apartments with ground-truth labels.

Generates axis-aligned multi-room layouts (rooms tile a rectangle, walls are
zero-thickness planes with doorway openings), places labeled box objects,
samples a camera trajectory, and renders depth + instance-id rasters by ray
casting. Everything derives from one seed, so a scene is reproducible
byte-for-byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import GenerationFailed, InvalidInput
from .geometry import Frame, Intrinsics, Pose
from .partition import RegionPartition

REGION_VOCABULARY = (
    "living room",
    "bedroom",
    "kitchen",
    "bathroom",
    "dining room",
    "office",
    "lobby",
    "family room",
    "toilet",
    "hallway",
    "study",
    "laundry",
)

OBJECT_VOCABULARY = ("cup", "sofa", "bed", "table", "plant", "lamp")

WALL_HEIGHT = 2.6
DOOR_HEIGHT = 2.0
DOOR_WIDTH = 1.0
MIN_ROOM_SIDE = 2.5
CAMERA_HEIGHT = 1.4


@dataclass(frozen=True)
class Room:
    label: str
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        return (
            self.x0 + margin <= x <= self.x1 - margin
            and self.y0 + margin <= y <= self.y1 - margin
        )


@dataclass(frozen=True)
class WallSegment:
    """Shared boundary between two rooms, with an optional doorway opening.

    ``axis`` is the axis the wall plane is perpendicular to: an "x" wall
    lives at x == coord and spans (lo, hi) in y.
    """

    room_a: str
    room_b: str
    axis: str
    coord: float
    lo: float
    hi: float
    door_lo: float = 0.0
    door_hi: float = 0.0
    door_height: float = 0.0

    @property
    def has_door(self) -> bool:
        return self.door_hi > self.door_lo


@dataclass(frozen=True)
class SceneObject:
    instance_id: int
    label: str
    room: str
    box_min: tuple[float, float, float]
    box_max: tuple[float, float, float]
    confidence: float

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.box_min) + np.asarray(self.box_max)) / 2.0


@dataclass(frozen=True)
class SceneConfig:
    rooms: int = 4
    objects_per_room: int = 3
    vocabulary: tuple[str, ...] = OBJECT_VOCABULARY
    frames: int = 48
    image_width: int = 96
    image_height: int = 72
    room_size: float = 4.0
    boundary_jitter: float = 0.6

    def __post_init__(self):
        if self.rooms < 1:
            raise InvalidInput("room count must be >= 1")
        if self.objects_per_room < 0:
            raise InvalidInput("objects_per_room must be >= 0")
        if self.objects_per_room > 0 and not self.vocabulary:
            raise InvalidInput("vocabulary required when placing objects")


@dataclass
class SyntheticScene:
    rooms: list[Room]
    doorways: list[WallSegment]
    walls: list[WallSegment]
    objects: list[SceneObject]
    trajectory: list[Pose]
    partition: RegionPartition
    intrinsics: Intrinsics
    extent: tuple[float, float]
    seed: int

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Outer axis-aligned box of the apartment, floor to ceiling."""
        return (
            np.array([0.0, 0.0, 0.0]),
            np.array([self.extent[0], self.extent[1], WALL_HEIGHT]),
        )

    def room_by_label(self, label: str) -> Room:
        for room in self.rooms:
            if room.label == label:
                return room
        raise KeyError(label)


def _split_positions(total: float, parts: int, rng, jitter: float) -> list[float]:
    cuts = [total * i / parts for i in range(1, parts)]
    out = []
    for i, c in enumerate(cuts):
        lo = (out[-1] if out else 0.0) + MIN_ROOM_SIDE
        hi = total - MIN_ROOM_SIDE * (parts - 1 - i)
        if lo > hi:
            raise GenerationFailed("rooms do not fit the requested footprint")
        out.append(float(np.clip(c + rng.uniform(-jitter, jitter), lo, hi)))
    return out


def _build_partition(rooms: list[Room], extent: tuple[float, float]) -> RegionPartition:
    w, d = extent
    xs = sorted({r.x0 for r in rooms} | {r.x1 for r in rooms})
    ys = sorted({r.y0 for r in rooms} | {r.y1 for r in rooms})
    rules = [(-1.0, 0.0, -0.0), (1.0, 0.0, w), (0.0, -1.0, -0.0), (0.0, 1.0, d)]
    rules += [(1.0, 0.0, x) for x in xs[1:-1]]
    rules += [(0.0, 1.0, y) for y in ys[1:-1]]
    rules_arr = np.asarray(rules, dtype=np.float64)

    table: dict[str, str] = {}
    for ix in range(len(xs) - 1):
        for iy in range(len(ys) - 1):
            cx = (xs[ix] + xs[ix + 1]) / 2.0
            cy = (ys[iy] + ys[iy + 1]) / 2.0
            owner = next((r for r in rooms if r.contains(cx, cy)), None)
            if owner is None:
                raise GenerationFailed("rooms do not tile the footprint")
            lhs = rules_arr[:, 0] * cx + rules_arr[:, 1] * cy
            pattern = "".join("T" if v <= c + 1e-12 else "F" for v, c in zip(lhs, rules_arr[:, 2]))
            table[pattern] = owner.label
    labels = tuple(r.label for r in rooms)
    return RegionPartition(rules=rules_arr, table=table, regions=labels)


def _adjacent_segments(rooms: list[Room]) -> list[WallSegment]:
    segs = []
    for i, a in enumerate(rooms):
        for b in rooms[i + 1:]:
            # vertical wall: a right edge against b left edge (either order)
            for left, right in ((a, b), (b, a)):
                if abs(left.x1 - right.x0) < 1e-9:
                    lo, hi = max(left.y0, right.y0), min(left.y1, right.y1)
                    if hi - lo > 1e-9:
                        segs.append(WallSegment(a.label, b.label, "x", left.x1, lo, hi))
            for below, above in ((a, b), (b, a)):
                if abs(below.y1 - above.y0) < 1e-9:
                    lo, hi = max(below.x0, above.x0), min(below.x1, above.x1)
                    if hi - lo > 1e-9:
                        segs.append(WallSegment(a.label, b.label, "y", below.y1, lo, hi))
    return segs


def _spanning_doorways(rooms, segments, rng) -> set[int]:
    """Pick segment indices that get doorways: a spanning tree plus extras."""
    by_pair: dict[tuple[str, str], list[int]] = {}
    for idx, seg in enumerate(segments):
        if seg.hi - seg.lo >= DOOR_WIDTH + 0.4:
            key = tuple(sorted((seg.room_a, seg.room_b)))
            by_pair.setdefault(key, []).append(idx)

    chosen: set[int] = set()
    connected = {rooms[0].label}
    remaining = {r.label for r in rooms[1:]}
    while remaining:
        options = [
            (pair, idxs)
            for pair, idxs in by_pair.items()
            if (pair[0] in connected) != (pair[1] in connected)
        ]
        if not options:
            raise GenerationFailed("layout is not doorway-connectable")
        pair, idxs = options[rng.integers(len(options))]
        chosen.add(idxs[0])
        connected.update(pair)
        remaining -= set(pair)
    for pair, idxs in sorted(by_pair.items()):
        if idxs[0] not in chosen and rng.uniform() < 0.25:
            chosen.add(idxs[0])
    return chosen


def _place_objects(rooms, cfg: SceneConfig, rng) -> list[SceneObject]:
    objects: list[SceneObject] = []
    vocab = tuple(cfg.vocabulary)
    next_id = 0
    for room_idx, room in enumerate(rooms):
        placed: list[tuple[float, float, float, float]] = []
        for j in range(cfg.objects_per_room):
            label = vocab[(room_idx * cfg.objects_per_room + j) % len(vocab)]
            for _ in range(60):
                w = rng.uniform(0.35, 0.9)
                d = rng.uniform(0.35, 0.9)
                h = rng.uniform(0.4, 1.3)
                margin = 0.45
                if room.x1 - room.x0 < 2 * margin + w or room.y1 - room.y0 < 2 * margin + d:
                    continue
                x0 = rng.uniform(room.x0 + margin, room.x1 - margin - w)
                y0 = rng.uniform(room.y0 + margin, room.y1 - margin - d)
                rect = (x0 - 0.15, y0 - 0.15, x0 + w + 0.15, y0 + d + 0.15)
                if any(
                    rect[0] < p[2] and rect[2] > p[0] and rect[1] < p[3] and rect[3] > p[1]
                    for p in placed
                ):
                    continue
                placed.append(rect)
                objects.append(
                    SceneObject(
                        instance_id=next_id,
                        label=label,
                        room=room.label,
                        box_min=(x0, y0, 0.0),
                        box_max=(x0 + w, y0 + d, h),
                        confidence=float(rng.uniform(0.5, 1.0)),
                    )
                )
                next_id += 1
                break
            else:
                raise GenerationFailed(
                    f"could not place object {j} in room {room.label!r}"
                )
    return objects


def _camera_pose(x: float, y: float, z: float, yaw: float, pitch: float) -> Pose:
    """Camera at (x, y, z) looking along yaw (world xy) with downward pitch."""
    cy_, sy = math.cos(yaw), math.sin(yaw)
    level = np.array(
        [[sy, 0.0, cy_], [-cy_, 0.0, sy], [0.0, -1.0, 0.0]]
    )
    cp, sp = math.cos(pitch), math.sin(pitch)
    tilt = np.array([[1.0, 0.0, 0.0], [0.0, cp, sp], [0.0, -sp, cp]])
    return Pose(rotation=level @ tilt, translation=np.array([x, y, z]))


def _sample_trajectory(scene_objects, rooms, cfg: SceneConfig, rng) -> list[Pose]:
    poses = []
    pitches = (0.0, math.radians(18.0), math.radians(32.0))
    for f in range(cfg.frames):
        room = rooms[f % len(rooms)]
        for _ in range(80):
            x = rng.uniform(room.x0 + 0.5, room.x1 - 0.5)
            y = rng.uniform(room.y0 + 0.5, room.y1 - 0.5)
            inside_obj = any(
                o.box_min[0] - 0.1 <= x <= o.box_max[0] + 0.1
                and o.box_min[1] - 0.1 <= y <= o.box_max[1] + 0.1
                for o in scene_objects
                if o.room == room.label
            )
            if not inside_obj:
                break
        else:
            raise GenerationFailed(f"no free camera position in room {room.label!r}")
        yaw = rng.uniform(0.0, 2.0 * math.pi)
        pitch = pitches[f % len(pitches)]
        poses.append(_camera_pose(x, y, CAMERA_HEIGHT, yaw, pitch))
    return poses


def generate_scene(config: SceneConfig, seed: int) -> SyntheticScene:
    """Build a reproducible labeled apartment scene from one seed."""
    rng = np.random.default_rng(seed)
    n = config.rooms
    cols = math.ceil(math.sqrt(n))
    per_col = [n // cols + (1 if i < n % cols else 0) for i in range(cols)]
    per_col = [m for m in per_col if m > 0]
    cols = len(per_col)

    width = cols * config.room_size
    depth = max(per_col) * config.room_size
    xcuts = [0.0] + _split_positions(width, cols, rng, config.boundary_jitter) + [width]

    region_labels = list(REGION_VOCABULARY)
    if n > len(region_labels):
        region_labels += [f"room {i}" for i in range(len(region_labels), n)]
    labels = [region_labels[i] for i in rng.permutation(len(region_labels))[:n]]

    rooms: list[Room] = []
    li = 0
    for c, m in enumerate(per_col):
        ycuts = [0.0] + _split_positions(depth, m, rng, config.boundary_jitter) + [depth]
        for r in range(m):
            rooms.append(Room(labels[li], xcuts[c], ycuts[r], xcuts[c + 1], ycuts[r + 1]))
            li += 1

    segments = _adjacent_segments(rooms)
    door_idx = _spanning_doorways(rooms, segments, rng)
    walls: list[WallSegment] = []
    doorways: list[WallSegment] = []
    for idx, seg in enumerate(segments):
        if idx in door_idx:
            span = seg.hi - seg.lo
            dw = min(DOOR_WIDTH, span - 0.4)
            dlo = seg.lo + rng.uniform(0.2, span - dw - 0.2)
            seg = replace(seg, door_lo=dlo, door_hi=dlo + dw, door_height=DOOR_HEIGHT)
            doorways.append(seg)
        walls.append(seg)

    objects = _place_objects(rooms, config, rng)
    trajectory = _sample_trajectory(objects, rooms, config, rng)
    partition = _build_partition(rooms, (width, depth))
    intr = Intrinsics(
        fx=0.6 * config.image_width,
        fy=0.6 * config.image_width,
        cx=config.image_width / 2.0,
        cy=config.image_height / 2.0,
        width=config.image_width,
        height=config.image_height,
    )
    return SyntheticScene(
        rooms=rooms,
        doorways=doorways,
        walls=walls,
        objects=objects,
        trajectory=trajectory,
        partition=partition,
        intrinsics=intr,
        extent=(width, depth),
        seed=seed,
    )


def render_frame(scene: SyntheticScene, pose_index: int) -> Frame:
    """Ray-cast depth and instance ids for one trajectory pose."""
    if not (0 <= pose_index < len(scene.trajectory)):
        raise InvalidInput(f"pose_index {pose_index} outside trajectory")
    pose = scene.trajectory[pose_index]
    intr = scene.intrinsics
    h, w = intr.height, intr.width
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dirs_c = np.stack(
        [(us - intr.cx) / intr.fx, (vs - intr.cy) / intr.fy, np.ones_like(us)], axis=-1
    ).reshape(-1, 3)
    dirs = dirs_c @ pose.rotation.T
    origin = pose.translation

    t_best = np.full(dirs.shape[0], np.inf)
    id_best = np.full(dirs.shape[0], -1, dtype=np.int32)
    wx, wy = scene.extent

    def hit_plane(axis: int, coord: float, lo0, hi0, lo1, hi1, hole=None):
        """Intersect an axis-aligned rectangle; updates t_best in place."""
        nonlocal t_best, id_best
        d = dirs[:, axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (coord - origin[axis]) / d
        valid = (np.abs(d) > 1e-12) & (t > 1e-6) & (t < t_best)
        if not np.any(valid):
            return
        t = np.where(valid, t, 0.0)  # keep inf out of the hit-point products
        other = [i for i in range(3) if i != axis]
        p0 = origin[other[0]] + t * dirs[:, other[0]]
        p1 = origin[other[1]] + t * dirs[:, other[1]]
        valid &= (p0 >= lo0 - 1e-9) & (p0 <= hi0 + 1e-9)
        valid &= (p1 >= lo1 - 1e-9) & (p1 <= hi1 + 1e-9)
        if hole is not None:
            hlo, hhi, hheight = hole
            in_hole = (p0 >= hlo) & (p0 <= hhi) & (p1 <= hheight)
            valid &= ~in_hole
        t_best = np.where(valid, t, t_best)
        id_best = np.where(valid, -1, id_best)

    hit_plane(2, 0.0, 0.0, wx, 0.0, wy)          # floor (x, y extents)
    hit_plane(2, WALL_HEIGHT, 0.0, wx, 0.0, wy)  # ceiling
    hit_plane(0, 0.0, 0.0, wy, 0.0, WALL_HEIGHT)
    hit_plane(0, wx, 0.0, wy, 0.0, WALL_HEIGHT)
    hit_plane(1, 0.0, 0.0, wx, 0.0, WALL_HEIGHT)
    hit_plane(1, wy, 0.0, wx, 0.0, WALL_HEIGHT)
    for seg in scene.walls:
        axis = 0 if seg.axis == "x" else 1
        hole = (seg.door_lo, seg.door_hi, seg.door_height) if seg.has_door else None
        hit_plane(axis, seg.coord, seg.lo, seg.hi, 0.0, WALL_HEIGHT, hole=hole)

    for obj in scene.objects:
        bmin = np.asarray(obj.box_min)
        bmax = np.asarray(obj.box_max)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
        t0 = (bmin - origin) * inv
        t1 = (bmax - origin) * inv
        tn = np.nanmax(np.minimum(t0, t1), axis=1)
        tf = np.nanmin(np.maximum(t0, t1), axis=1)
        valid = (tn <= tf) & (tn > 1e-6) & (tn < t_best)
        t_best = np.where(valid, tn, t_best)
        id_best = np.where(valid, obj.instance_id, id_best)

    depth = np.where(np.isfinite(t_best), t_best, 0.0).astype(np.float32).reshape(h, w)
    inst = id_best.reshape(h, w)
    labels = {o.instance_id: o.label for o in scene.objects}
    confs = {o.instance_id: o.confidence for o in scene.objects}
    return Frame(
        depth=depth,
        instance_ids=inst,
        instance_labels=labels,
        instance_confidences=confs,
        pose=pose,
        intrinsics=intr,
    )


def render_all(scene: SyntheticScene) -> list[Frame]:
    return [render_frame(scene, i) for i in range(len(scene.trajectory))]
