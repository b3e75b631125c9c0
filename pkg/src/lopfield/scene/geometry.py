"""Pinhole camera geometry: intrinsics, poses, projection and back-projection.

Conventions: world frame is z-up with units in meters; camera frame is
x-right, y-down, z-forward, and depth rasters store z-depth (distance along
the camera's forward axis, not ray length). A depth value of 0 marks an
invalid pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidDepth, InvalidInput, OutOfBounds


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixel units."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInput("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInput("principal point must lie inside the image")

    def to_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-6):
            raise InvalidInput("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise InvalidInput("rotation determinant must be +1")

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=np.float64).reshape(4, 4)
        return cls(rotation=m[:3, :3], translation=m[:3, 3])

    @classmethod
    def identity(cls) -> "Pose":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )


@dataclass
class Frame:
    """One posed RGB-D observation reduced to geometry plus detections.

    ``depth`` is H x W float32 z-depth in meters (0 = invalid) and
    ``instance_ids`` is H x W int32 (-1 = background). Every id present in
    ``instance_ids`` except -1 must have a label and a confidence.
    """

    depth: np.ndarray
    instance_ids: np.ndarray
    instance_labels: dict[int, str]
    instance_confidences: dict[int, float]
    pose: Pose
    intrinsics: Intrinsics

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float32)
        self.instance_ids = np.asarray(self.instance_ids, dtype=np.int32)
        if self.depth.shape != self.instance_ids.shape:
            raise InvalidInput("depth and instance rasters must share (H, W)")
        if self.depth.shape != (self.intrinsics.height, self.intrinsics.width):
            raise InvalidInput("raster shape does not match intrinsics")
        present = set(np.unique(self.instance_ids).tolist()) - {-1}
        missing = present - set(self.instance_labels)
        if missing or present - set(self.instance_confidences):
            raise InvalidInput(f"instances without label/confidence: {sorted(missing)}")
        for conf in self.instance_confidences.values():
            if not (0.0 <= conf <= 1.0):
                raise InvalidInput("confidence must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    def content_key(self) -> int:
        """Stable 64-bit key derived from the pose and intrinsics.

        Used to seed per-frame randomness so that downstream fusion does not
        depend on the ordering of a frame list.
        """
        import hashlib

        h = hashlib.sha256()
        h.update(self.pose.rotation.astype(np.float64).tobytes())
        h.update(self.pose.translation.astype(np.float64).tobytes())
        h.update(np.float64([self.intrinsics.fx, self.intrinsics.fy]).tobytes())
        return int.from_bytes(h.digest()[:8], "little")


def back_project(pixel, depth: float, intr: Intrinsics, pose: Pose) -> np.ndarray:
    """Lift one pixel with z-depth ``depth`` to a world-frame 3D point."""
    u, v = float(pixel[0]), float(pixel[1])
    if not np.isfinite(depth) or depth <= 0:
        raise InvalidDepth(f"depth must be positive, got {depth}")
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        raise OutOfBounds(f"pixel ({u}, {v}) outside {intr.width}x{intr.height} raster")
    cam = np.array(
        [(u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth]
    )
    return pose.rotation @ cam + pose.translation


def back_project_pixels(us: np.ndarray, vs: np.ndarray, depths: np.ndarray,
                        intr: Intrinsics, pose: Pose) -> np.ndarray:
    """Vectorized :func:`back_project` for arrays of pixels; no validation."""
    us = np.asarray(us, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    d = np.asarray(depths, dtype=np.float64)
    cam = np.stack(
        [(us - intr.cx) * d / intr.fx, (vs - intr.cy) * d / intr.fy, d], axis=-1
    )
    return cam @ pose.rotation.T + pose.translation


def project(point: np.ndarray, intr: Intrinsics, pose: Pose) -> tuple[float, float, float]:
    """Inverse of :func:`back_project`: world point to (u, v, z-depth).

    Raises InvalidDepth when the point sits at or behind the camera plane and
    OutOfBounds when it projects outside the raster.
    """
    p = np.asarray(point, dtype=np.float64).reshape(3)
    cam = pose.rotation.T @ (p - pose.translation)
    if cam[2] <= 0:
        raise InvalidDepth("point is behind the camera")
    u = intr.fx * cam[0] / cam[2] + intr.cx
    v = intr.fy * cam[1] / cam[2] + intr.cy
    eps = 1e-6  # numeric slack so edge pixels survive the round trip
    if not (-eps <= u < intr.width + eps and -eps <= v < intr.height + eps):
        raise OutOfBounds(f"projected pixel ({u:.2f}, {v:.2f}) outside raster")
    return float(u), float(v), float(cam[2])
