import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lopfield.errors import OutOfBounds
from lopfield.scene import (
    SceneConfig,
    generate_scene,
    region_of,
    region_of_batch,
    single_region,
)
from lopfield.scene.partition import RegionPartition


def test_single_region_is_total():
    part = single_region("studio")
    assert region_of((0.0, 0.0), part) == "studio"
    assert region_of((1e6, -1e6), part) == "studio"


def test_two_region_split_by_hand():
    # x <= 0 is the kitchen, the rest is the bedroom
    part = RegionPartition(
        rules=np.array([[1.0, 0.0, 0.0]]),
        table={"T": "kitchen", "F": "bedroom"},
        regions=("kitchen", "bedroom"),
    )
    assert region_of((-1.0, 0.0), part) == "kitchen"
    assert region_of((1.0, 0.0), part) == "bedroom"


def test_eight_room_scene_matches_room_rectangles():
    scene = generate_scene(SceneConfig(rooms=8, objects_per_room=0, frames=1), seed=21)
    assert scene.partition.num_regions == 8
    lo, hi = scene.bounds
    xs = np.linspace(lo[0] + 1e-3, hi[0] - 1e-3, 45)
    ys = np.linspace(lo[1] + 1e-3, hi[1] - 1e-3, 45)
    for x in xs:
        for y in ys:
            label = region_of((x, y), scene.partition)
            inside = [
                r.label
                for r in scene.rooms
                if r.x0 - 1e-9 <= x <= r.x1 + 1e-9 and r.y0 - 1e-9 <= y <= r.y1 + 1e-9
            ]
            assert label in inside


def test_out_of_coverage_raises():
    scene = generate_scene(SceneConfig(rooms=2, objects_per_room=0, frames=1), seed=2)
    lo, hi = scene.bounds
    with pytest.raises(OutOfBounds):
        region_of((lo[0] - 1.0, lo[1] - 1.0), scene.partition)
    with pytest.raises(OutOfBounds):
        region_of((hi[0] + 0.5, 0.5), scene.partition)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_every_interior_point_gets_exactly_one_label(fx, fy):
    scene = generate_scene(SceneConfig(rooms=4, objects_per_room=0, frames=1), seed=13)
    lo, hi = scene.bounds
    x = lo[0] + fx * (hi[0] - lo[0])
    y = lo[1] + fy * (hi[1] - lo[1])
    label = region_of((x, y), scene.partition)
    assert label in scene.partition.regions


def test_batch_matches_scalar():
    scene = generate_scene(SceneConfig(rooms=4, objects_per_room=0, frames=1), seed=13)
    rng = np.random.default_rng(1)
    lo, hi = scene.bounds
    pts = rng.uniform(lo[:2] + 0.01, hi[:2] - 0.01, size=(100, 2))
    batch = region_of_batch(pts, scene.partition)
    assert batch == [region_of(p, scene.partition) for p in pts]


def test_partition_dict_round_trip():
    scene = generate_scene(SceneConfig(rooms=3, objects_per_room=0, frames=1), seed=4)
    part = scene.partition
    clone = RegionPartition.from_dict(part.to_dict())
    assert clone.regions == part.regions
    assert np.array_equal(clone.rules, part.rules)
    assert clone.table == part.table
