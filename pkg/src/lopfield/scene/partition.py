"""Floor-plan region partitions built from wall-aligned line rules.

A partition is an ordered list of half-plane predicates ``a*x + b*y <= c``
plus a decision table mapping each realizable sign pattern to a region
label. Lines are the primitive because indoor layouts are separated by
straight walls; four boundary rules make points outside the floor plan land
on patterns absent from the table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput, OutOfBounds


@dataclass(frozen=True)
class RegionPartition:
    """Line-rule partition of the (x, y) floor plan.

    rules: (R, 3) array of half-plane coefficients (a, b, c).
    table: mapping from sign-pattern strings ('T'/'F' per rule, in rule
        order) to region labels. Patterns not present are outside coverage.
    regions: distinct region labels, fixed order.
    """

    rules: np.ndarray
    table: dict[str, str]
    regions: tuple[str, ...]

    def __post_init__(self):
        rules = np.asarray(self.rules, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "regions", tuple(self.regions))
        if len(self.regions) < 1:
            raise InvalidInput("partition needs at least one region")
        if len(set(self.regions)) != len(self.regions):
            raise InvalidInput("region labels must be unique")
        for pattern, label in self.table.items():
            if len(pattern) != len(rules) or set(pattern) - {"T", "F"}:
                raise InvalidInput(f"malformed sign pattern {pattern!r}")
            if label not in self.regions:
                raise InvalidInput(f"table label {label!r} not in regions")

    @property
    def num_regions(self) -> int:
        return len(self.regions)

    def patterns_of(self, points_xy: np.ndarray) -> list[str]:
        pts = np.asarray(points_xy, dtype=np.float64).reshape(-1, 2)
        if len(self.rules) == 0:
            return ["" for _ in range(len(pts))]
        lhs = pts @ self.rules[:, :2].T  # (N, R)
        # f32 depth quantization puts back-projected wall points ~1e-7 m
        # past the boundary; the slack keeps them covered
        sat = lhs <= self.rules[:, 2] + 1e-6
        return ["".join("T" if s else "F" for s in row) for row in sat]

    def to_dict(self) -> dict:
        return {
            "rules": self.rules.tolist(),
            "table": dict(self.table),
            "regions": list(self.regions),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegionPartition":
        return cls(
            rules=np.asarray(data["rules"], dtype=np.float64).reshape(-1, 3),
            table=dict(data["table"]),
            regions=tuple(data["regions"]),
        )


def region_of(point_xy, part: RegionPartition) -> str:
    """Region label of a floor-plan point; total over the covered bounds."""
    pattern = part.patterns_of([point_xy])[0]
    try:
        return part.table[pattern]
    except KeyError:
        x, y = float(point_xy[0]), float(point_xy[1])
        raise OutOfBounds(f"point ({x:.3f}, {y:.3f}) outside partition coverage") from None


def region_of_batch(points_xy: np.ndarray, part: RegionPartition) -> list[str]:
    """Vectorized :func:`region_of`; raises on the first uncovered point."""
    labels = []
    for pattern, pt in zip(part.patterns_of(points_xy), np.reshape(points_xy, (-1, 2))):
        try:
            labels.append(part.table[pattern])
        except KeyError:
            raise OutOfBounds(
                f"point ({pt[0]:.3f}, {pt[1]:.3f}) outside partition coverage"
            ) from None
    return labels


def single_region(label: str) -> RegionPartition:
    """Degenerate partition mapping every point to one label."""
    return RegionPartition(rules=np.zeros((0, 3)), table={"": label}, regions=(label,))
