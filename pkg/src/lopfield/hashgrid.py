"""Multi-resolution hash encoding of 3D positions with analytic gradients.

Positions are normalized by the scene's longest axis so grid cells stay
cubic, scaled to each level's resolution, and the eight surrounding integer
corners are hashed into that level's table with the classic large-prime
spatial hash. Trilinear interpolation of the gathered rows yields one
feature block per level; blocks concatenate to the output vector. Hash
collisions are left unresolved (gradients accumulate into colliding rows);
the downstream MLP is responsible for disambiguation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

PRIMES = np.array([1, 2654435761, 805459861], dtype=np.uint64)

_CORNERS = np.array(
    [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=np.int64
)


@dataclass(frozen=True)
class HashGridConfig:
    """Geometry of the encoder; defaults follow the shipped training recipe
    of 18 levels x 8 features with 2^20-row tables."""

    levels: int = 18
    features_per_level: int = 8
    log2_table_size: int = 20
    base_resolution: int = 16
    finest_resolution: int = 512
    bounds_min: tuple[float, float, float] = (0.0, 0.0, 0.0)
    bounds_max: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.levels < 1 or self.features_per_level < 1:
            raise InvalidInput("levels and features_per_level must be >= 1")
        if self.log2_table_size > 24:
            raise InvalidInput("log2_table_size must be <= 24")
        if self.base_resolution < 2:
            raise InvalidInput("base_resolution must be >= 2")
        if self.finest_resolution < self.base_resolution:
            raise InvalidInput("finest_resolution must be >= base_resolution")
        lo = np.asarray(self.bounds_min, dtype=np.float64)
        hi = np.asarray(self.bounds_max, dtype=np.float64)
        if np.any(hi <= lo):
            raise InvalidInput("bounds must be non-degenerate")

    @property
    def table_size(self) -> int:
        return 1 << self.log2_table_size

    @property
    def output_dim(self) -> int:
        return self.levels * self.features_per_level

    @property
    def param_count(self) -> int:
        return self.levels * self.table_size * self.features_per_level

    @property
    def growth_factor(self) -> float:
        if self.levels == 1:
            return 1.0
        return float(
            np.exp(
                (np.log(self.finest_resolution) - np.log(self.base_resolution))
                / (self.levels - 1)
            )
        )

    def level_resolutions(self) -> np.ndarray:
        b = self.growth_factor
        res = np.floor(self.base_resolution * b ** np.arange(self.levels)).astype(np.int64)
        return np.maximum(res, 2)

    def with_bounds(self, lo, hi) -> "HashGridConfig":
        return HashGridConfig(
            levels=self.levels,
            features_per_level=self.features_per_level,
            log2_table_size=self.log2_table_size,
            base_resolution=self.base_resolution,
            finest_resolution=self.finest_resolution,
            bounds_min=tuple(float(x) for x in lo),
            bounds_max=tuple(float(x) for x in hi),
        )


class SparseTableGrads:
    """Per-level sparse gradients: parallel (indices, values) arrays."""

    def __init__(self, indices: list[np.ndarray], values: list[np.ndarray]):
        self.indices = indices
        self.values = values

    def rows(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Unique touched rows of one level with summed gradients."""
        idx = self.indices[level].reshape(-1)
        vals = self.values[level].reshape(len(idx), -1)
        uniq, inverse = np.unique(idx, return_inverse=True)
        summed = np.zeros((len(uniq), vals.shape[1]), dtype=vals.dtype)
        np.add.at(summed, inverse, vals)
        return uniq, summed

    def dense(self, level: int, table_size: int) -> np.ndarray:
        uniq, summed = self.rows(level)
        out = np.zeros((table_size, summed.shape[1]), dtype=summed.dtype)
        out[uniq] = summed
        return out


class HashGrid:
    """Learnable hash tables plus the encode/encode_backward pair."""

    def __init__(self, config: HashGridConfig, tables: list[np.ndarray]):
        if len(tables) != config.levels:
            raise InvalidInput("table count must equal level count")
        for t in tables:
            if t.shape != (config.table_size, config.features_per_level):
                raise InvalidInput("table shape mismatch")
        self.config = config
        self.tables = tables

    @classmethod
    def init(cls, config: HashGridConfig, seed: int = 0, dtype=np.float32) -> "HashGrid":
        rng = np.random.default_rng(seed)
        tables = [
            rng.uniform(-1e-4, 1e-4, size=(config.table_size, config.features_per_level)).astype(dtype)
            for _ in range(config.levels)
        ]
        return cls(config, tables)

    @property
    def dtype(self):
        return self.tables[0].dtype

    @property
    def param_count(self) -> int:
        return sum(t.size for t in self.tables)

    def astype(self, dtype) -> "HashGrid":
        return HashGrid(self.config, [t.astype(dtype) for t in self.tables])

    def _normalize(self, points: np.ndarray) -> np.ndarray:
        """Clamp to bounds, then scale by the longest axis into [0, 1]."""
        lo = np.asarray(self.config.bounds_min)
        hi = np.asarray(self.config.bounds_max)
        p = np.clip(points, lo, hi)
        return (p - lo) / np.max(hi - lo)

    def _corner_data(self, points: np.ndarray):
        """Shared forward/backward geometry per level.

        Yields (level, indices (B, 8), weights (B, 8)) with trilinear weights.
        """
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InvalidInput("points contain non-finite values")
        unit = self._normalize(pts)
        mask = np.uint64(self.config.table_size - 1)
        for level, res in enumerate(self.config.level_resolutions()):
            scaled = unit * res
            cell = np.floor(scaled).astype(np.int64)
            frac = scaled - cell
            corners = cell[:, None, :] + _CORNERS[None, :, :]  # (B, 8, 3)
            h = (
                (corners[:, :, 0].astype(np.uint64) * PRIMES[0])
                ^ (corners[:, :, 1].astype(np.uint64) * PRIMES[1])
                ^ (corners[:, :, 2].astype(np.uint64) * PRIMES[2])
            ) & mask
            w = np.where(_CORNERS[None, :, :] == 1, frac[:, None, :], 1.0 - frac[:, None, :])
            weights = w[:, :, 0] * w[:, :, 1] * w[:, :, 2]  # (B, 8)
            yield level, h.astype(np.int64), weights

    def encode(self, points: np.ndarray) -> np.ndarray:
        """Encode points (B, 3) into (B, levels * features_per_level)."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        out = np.empty((len(pts), self.config.output_dim), dtype=self.dtype)
        fpl = self.config.features_per_level
        for level, idx, weights in self._corner_data(pts):
            gathered = self.tables[level][idx]  # (B, 8, F)
            block = np.einsum("bc,bcf->bf", weights.astype(self.dtype), gathered)
            out[:, level * fpl : (level + 1) * fpl] = block
        return out

    def encode_backward(self, points: np.ndarray, upstream: np.ndarray) -> SparseTableGrads:
        """Distribute upstream (B, d) gradients onto the touched table rows."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        up = np.asarray(upstream)
        if up.shape != (len(pts), self.config.output_dim):
            raise InvalidInput(f"upstream must be (B, {self.config.output_dim})")
        fpl = self.config.features_per_level
        indices, values = [], []
        for level, idx, weights in self._corner_data(pts):
            slice_ = up[:, level * fpl : (level + 1) * fpl]  # (B, F)
            grad = weights[:, :, None] * slice_[:, None, :]  # (B, 8, F)
            indices.append(idx)
            values.append(grad.astype(up.dtype))
        return SparseTableGrads(indices, values)
