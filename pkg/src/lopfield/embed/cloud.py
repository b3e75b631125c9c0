"""Distilled feature point cloud and its binary file format.

The on-disk format ("LOPF") is the boundary between feature extraction and
field training; synthetic fusion and any real-model extractor both emit it.

    magic "LOPF" | u32 version=1 | u32 count | u32 dv | u32 ds | f32 voxel_size
    per point, little-endian float32:
        3 x position, weight, dist, conf, dv x e_v, ds x e_s
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CorruptCloud, InvalidInput
from ..validation import normalized_rows

MAGIC = b"LOPF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIf")


@dataclass(frozen=True)
class FeaturePoint:
    """One distilled 3D point carrying its target embeddings and weights."""

    position: np.ndarray
    e_v: np.ndarray
    e_s: np.ndarray
    weight: float
    dist: float
    conf: float


class FeaturePointCloud:
    """Voxel-merged training targets, stored column-wise.

    positions (N, 3), e_v (N, dv), e_s (N, ds), weights, dists, confs are
    float32 arrays; ``voxel_size`` records the merge resolution.
    """

    def __init__(self, positions, e_v, e_s, weights, dists, confs, voxel_size: float):
        self.positions = np.asarray(positions, dtype=np.float32).reshape(-1, 3)
        n = len(self.positions)
        self.e_v = np.asarray(e_v, dtype=np.float32).reshape(n, -1)
        self.e_s = np.asarray(e_s, dtype=np.float32).reshape(n, -1)
        self.weights = np.asarray(weights, dtype=np.float32).reshape(n)
        self.dists = np.asarray(dists, dtype=np.float32).reshape(n)
        self.confs = np.asarray(confs, dtype=np.float32).reshape(n)
        # canonicalized to its float32 value: the file header stores f32 and
        # voxel keys must come out identical before and after a round trip
        self.voxel_size = float(np.float32(voxel_size))
        if self.voxel_size <= 0:
            raise InvalidInput("voxel_size must be positive")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def dims(self) -> tuple[int, int]:
        return self.e_v.shape[1], self.e_s.shape[1]

    def __getitem__(self, i: int) -> FeaturePoint:
        return FeaturePoint(
            position=self.positions[i],
            e_v=self.e_v[i],
            e_s=self.e_s[i],
            weight=float(self.weights[i]),
            dist=float(self.dists[i]),
            conf=float(self.confs[i]),
        )

    @property
    def points(self) -> list[FeaturePoint]:
        return [self[i] for i in range(len(self))]

    def bounds(self, pad: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
        """Padded axis-aligned bounds of the stored positions."""
        if len(self) == 0:
            raise InvalidInput("empty cloud has no bounds")
        lo = self.positions.min(axis=0).astype(np.float64) - pad
        hi = self.positions.max(axis=0).astype(np.float64) + pad
        return lo, hi

    def validate(self) -> None:
        """Check every stored invariant; raises CorruptCloud on violation."""
        problems = []
        for name, arr in (("positions", self.positions), ("e_v", self.e_v),
                          ("e_s", self.e_s), ("weights", self.weights),
                          ("dists", self.dists), ("confs", self.confs)):
            if not np.all(np.isfinite(arr)):
                problems.append(f"{name} has non-finite entries")
        if np.any(self.weights < 1.0):
            problems.append("weights must be >= 1")
        if np.any((self.confs < 0.0) | (self.confs > 1.0)):
            problems.append("confs must lie in [0, 1]")
        if np.any(self.dists <= 0.0):
            problems.append("dists must be positive")
        for name, rows in (("e_v", self.e_v), ("e_s", self.e_s)):
            norms = np.linalg.norm(rows.astype(np.float64), axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-5):
                problems.append(f"{name} rows are not unit norm")
        if len(self) > 0:
            keys = np.floor(self.positions.astype(np.float64) / self.voxel_size)
            if len(np.unique(keys.astype(np.int64), axis=0)) != len(self):
                problems.append("two points share a voxel cell")
        if problems:
            raise CorruptCloud("; ".join(problems))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeaturePointCloud):
            return NotImplemented
        return (
            self.voxel_size == other.voxel_size
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.e_v, other.e_v)
            and np.array_equal(self.e_s, other.e_s)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.dists, other.dists)
            and np.array_equal(self.confs, other.confs)
        )

    def allclose(self, other: "FeaturePointCloud", atol: float = 1e-6) -> bool:
        return (
            len(self) == len(other)
            and np.allclose(self.positions, other.positions, atol=atol)
            and np.allclose(self.e_v, other.e_v, atol=atol)
            and np.allclose(self.e_s, other.e_s, atol=atol)
            and np.allclose(self.weights, other.weights, atol=atol)
            and np.allclose(self.dists, other.dists, atol=atol)
            and np.allclose(self.confs, other.confs, atol=atol)
        )


def save_cloud(cloud: FeaturePointCloud, path) -> None:
    dv, ds = cloud.dims
    n = len(cloud)
    body = np.concatenate(
        [
            cloud.positions,
            cloud.weights[:, None],
            cloud.dists[:, None],
            cloud.confs[:, None],
            cloud.e_v,
            cloud.e_s,
        ],
        axis=1,
    ).astype("<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, n, dv, ds, cloud.voxel_size))
        f.write(body.tobytes())


def load_cloud(path, validate: bool = False) -> FeaturePointCloud:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CorruptCloud(f"{path}: truncated header")
    magic, version, n, dv, ds, voxel_size = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptCloud(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CorruptCloud(f"{path}: unsupported version {version}")
    stride = 6 + dv + ds
    expected = _HEADER.size + 4 * n * stride
    if len(raw) != expected:
        raise CorruptCloud(f"{path}: expected {expected} bytes, found {len(raw)}")
    body = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, stride)
    cloud = FeaturePointCloud(
        positions=body[:, 0:3],
        weights=body[:, 3],
        dists=body[:, 4],
        confs=body[:, 5],
        e_v=body[:, 6 : 6 + dv],
        e_s=body[:, 6 + dv :],
        voxel_size=voxel_size,
    )
    if validate:
        cloud.validate()
    return cloud


def merge_observations(positions, e_v, e_s, dists, confs, voxel_size: float,
                       dv: int, ds: int) -> FeaturePointCloud:
    """Voxel-merge raw per-pixel observations into a distilled cloud.

    Observations landing in the same voxel are averaged (arithmetic mean
    with unit observation weights, accumulated in float64) and the merged
    embeddings are re-normalized to the unit sphere. Output rows are sorted
    by voxel key so the result does not depend on input order.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(positions)
    e_v = np.asarray(e_v, dtype=np.float64).reshape(n, dv)
    e_s = np.asarray(e_s, dtype=np.float64).reshape(n, ds)
    dists = np.asarray(dists, dtype=np.float64).reshape(n)
    confs = np.asarray(confs, dtype=np.float64).reshape(n)

    voxel_size = float(np.float32(voxel_size))  # match the stored header value
    keys = np.floor(positions / voxel_size).astype(np.int64)
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    keys = keys[order]
    uniq, inverse, counts = np.unique(
        keys, axis=0, return_inverse=True, return_counts=True
    )
    m = len(uniq)

    def pool(values: np.ndarray) -> np.ndarray:
        values = values[order]
        if values.ndim == 1:
            out = np.zeros(m)
            np.add.at(out, inverse, values)
        else:
            out = np.zeros((m, values.shape[1]))
            np.add.at(out, inverse, values)
        return out

    cnt = counts.astype(np.float64)
    merged_pos = _pin_to_voxels(pool(positions) / cnt[:, None], uniq, voxel_size)
    return FeaturePointCloud(
        positions=merged_pos,
        e_v=normalized_rows(pool(e_v) / cnt[:, None]),
        e_s=normalized_rows(pool(e_s) / cnt[:, None]),
        weights=cnt,
        dists=pool(dists) / cnt,
        confs=pool(confs) / cnt,
        voxel_size=voxel_size,
    )


def _pin_to_voxels(positions: np.ndarray, keys: np.ndarray, voxel_size: float,
                   max_rounds: int = 4) -> np.ndarray:
    """Keep float32-cast mean positions inside their source voxel.

    A voxel mean can sit within half a float32 ulp of the cell boundary
    (walls often lie exactly on voxel multiples); casting would then round
    it into the neighboring cell and break voxel uniqueness. Nudge such
    coordinates one ulp toward the cell interior until the float32 value
    floors back into its own cell.
    """
    pos32 = positions.astype(np.float32)
    down = np.full_like(pos32, -np.inf)
    up = np.full_like(pos32, np.inf)
    for _ in range(max_rounds):
        recomputed = np.floor(pos32.astype(np.float64) / voxel_size).astype(np.int64)
        off = recomputed - keys
        if not np.any(off):
            break
        pos32 = np.where(off > 0, np.nextafter(pos32, down), pos32)
        pos32 = np.where(off < 0, np.nextafter(pos32, up), pos32)
    return pos32
