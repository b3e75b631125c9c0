import numpy as np
import pytest

from lopfield.embed import SyntheticProvider
from lopfield.errors import DimMismatch, InvalidBounds
from lopfield.query import LabelBank
from lopfield.scene import Frame, Intrinsics, Pose, RegionPartition, region_of_batch
from lopfield.topomap import (
    MapperConfig,
    RuleBasedDescriber,
    Vertex,
    build_edges,
    build_topomap,
    map_objects,
    map_regions,
    update,
)
from lopfield.topomap.describe import ExternalDescriber


class OracleField:
    """Duck-typed stand-in for a trained field: answers with the bank row of
    the partition's ground-truth region at each point."""

    def __init__(self, partition: RegionPartition, bank: LabelBank):
        self.partition = partition
        self.bank = bank
        self.dims = (0, bank.e_v.shape[1], bank.e_s.shape[1])

    def forward(self, points):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        labels = region_of_batch(np.clip(pts[:, :2], 0.0, None), self.partition)
        idx = [self.bank.index_of(l) for l in labels]
        return self.bank.e_v[idx].copy(), self.bank.e_s[idx].copy()


def two_room_setup():
    # left half "kitchen", right half "bedroom", split at x = 0
    part = RegionPartition(
        rules=np.array([
            [-1.0, 0.0, 4.0],   # x >= -4
            [1.0, 0.0, 4.0],    # x <= 4
            [0.0, -1.0, 0.0],   # y >= 0
            [0.0, 1.0, 4.0],    # y <= 4
            [1.0, 0.0, 0.0],    # x <= 0 -> kitchen
        ]),
        table={"TTTTT": "kitchen", "TTTTF": "bedroom"},
        regions=("kitchen", "bedroom"),
    )
    provider = SyntheticProvider(seed=2, dv=16, ds=16)
    bank = LabelBank.from_labels(part.regions, provider)
    field = OracleField(part, bank)
    bounds = (np.array([-4.0, 0.0, 0.0]), np.array([4.0, 4.0, 2.6]))
    return part, provider, bank, field, bounds


def test_single_region_maps_to_one_vertex():
    part = RegionPartition(
        rules=np.array([[1.0, 0.0, 100.0]]), table={"T": "studio"}, regions=("studio",),
    )
    provider = SyntheticProvider(seed=2, dv=16, ds=16)
    bank = LabelBank.from_labels(part.regions, provider)
    field = OracleField(part, bank)
    bounds = (np.zeros(3), np.array([4.0, 4.0, 2.6]))
    vertices = map_regions(field, bounds, bank, MapperConfig())
    assert len(vertices) == 1
    v = vertices[0]
    assert v.class_name == "studio" and v.node_type == "region"
    # every sample cell center must fall inside the box
    assert v.bbox_min[0] <= 0.25 and v.bbox_max[0] >= 3.75


def test_two_room_split_produces_two_vertices_with_opposite_sides():
    part, provider, bank, field, bounds = two_room_setup()
    cfg = MapperConfig(grid_step=0.5)
    vertices = map_regions(field, bounds, bank, cfg)
    assert sorted(v.class_name for v in vertices) == ["bedroom", "kitchen"]
    kitchen = next(v for v in vertices if v.class_name == "kitchen")
    bedroom = next(v for v in vertices if v.class_name == "bedroom")
    assert kitchen.bbox_center[0] < 0 < bedroom.bbox_center[0]
    # boundary error at most one grid step
    assert abs(kitchen.bbox_max[0] - 0.0) <= cfg.grid_step
    assert abs(bedroom.bbox_min[0] - 0.0) <= cfg.grid_step


def test_degenerate_bounds_rejected():
    part, provider, bank, field, _ = two_room_setup()
    with pytest.raises(InvalidBounds):
        map_regions(field, (np.zeros(3), np.zeros(3)), bank, MapperConfig())


def make_detection_frame(conf: float, pose_x: float = 0.0) -> Frame:
    intr = Intrinsics(fx=40.0, fy=40.0, cx=16.0, cy=12.0, width=32, height=24)
    depth = np.full((24, 32), 2.0, dtype=np.float32)
    inst = np.full((24, 32), -1, dtype=np.int32)
    inst[8:16, 10:22] = 7
    pose = Pose(np.eye(3), np.array([pose_x, 0.0, 1.0]))
    return Frame(depth, inst, {7: "chair"}, {7: conf}, pose, intr)


def test_confidence_threshold_gates_candidates():
    cfg = MapperConfig(min_observations=1)
    excluded = map_objects([make_detection_frame(0.59)], cfg)
    included = map_objects([make_detection_frame(0.61)], cfg)
    assert excluded == []
    assert len(included) == 1
    assert included[0].class_name == "chair"


def test_observation_count_gates_vertex_creation():
    cfg = MapperConfig(min_observations=3)
    frames2 = [make_detection_frame(0.9, pose_x=i * 0.01) for i in range(2)]
    frames3 = [make_detection_frame(0.9, pose_x=i * 0.01) for i in range(3)]
    assert map_objects(frames2, cfg) == []
    vertices = map_objects(frames3, cfg)
    assert len(vertices) == 1
    assert vertices[0].node_type == "object"


def test_object_bbox_covers_backprojected_pixels():
    frame = make_detection_frame(0.9)
    cfg = MapperConfig(min_observations=1)
    v = map_objects([frame], cfg)[0]
    # mask spans 2 m-deep pixels around the principal point
    assert v.bbox_min[2] >= 0.0
    assert v.bbox_max[2] <= 3.0
    assert v.contains((0.0, 0.0, 3.0)) or v.bbox_max[2] >= 2.0 - 1e-6


def region_vertex(vid, cx, cy, ex, ey, label):
    return Vertex(vid, "region", (ex, ey, 2.6), (cx, cy, 1.3), label, f"the {label}")


def object_vertex(vid, cx, cy, label, ext=(0.6, 0.6, 0.8)):
    return Vertex(vid, "object", ext, (cx, cy, ext[2] / 2), label, f"a {label}")


def test_build_edges_rules():
    regions = [
        region_vertex(0, -2.0, 2.0, 4.0, 4.0, "bedroom"),
        region_vertex(1, 2.25, 2.0, 4.0, 4.0, "living room"),
    ]
    objects = [
        object_vertex(2, -2.0, 2.0, "bed"),
        object_vertex(3, -1.8, 2.1, "bike"),
        object_vertex(4, 2.2, 2.0, "sofa"),
    ]
    edges, entrances = build_edges(regions + objects, RuleBasedDescriber(), MapperConfig())
    by_type = {}
    for e in edges:
        by_type.setdefault(e.edge_type, []).append(e)

    # bed and bike overlap in 3D
    assert len(by_type["object_object"]) == 1
    # bed belongs to bedroom; bike is vetoed to "false"
    o_r = {(e.start_node.id, e.end_node.id): e.relationship
           for e in by_type["object_region"]}
    assert o_r[(2, 0)] == "belong"
    assert o_r[(3, 0)] == "false"
    assert o_r[(4, 1)] == "belong"
    # adjacent regions connect and synthesize an entrance at the boundary
    assert len(by_type["region_region"]) == 1
    assert len(entrances) == 1
    ent = entrances[0]
    assert ent.node_type == "Entrance" and ent.class_name == "Entrance"
    assert abs(ent.bbox_center[0] - 0.125) < 0.26  # shared boundary midpoint
    assert len(by_type["region_entrance"]) == 2


def test_disjoint_regions_get_no_edge():
    regions = [
        region_vertex(0, -5.0, 2.0, 3.0, 3.0, "bedroom"),
        region_vertex(1, 5.0, 2.0, 3.0, 3.0, "kitchen"),
    ]
    edges, entrances = build_edges(regions, RuleBasedDescriber(), MapperConfig())
    assert edges == [] and entrances == []


def test_external_describer_parses_json_reply():
    def fake_llm(prompt):
        assert "Node a" in prompt
        return '{"relationship": "belong", "position_relation": "a in the center of b", "caption": "ok"}'

    d = ExternalDescriber(fake_llm)
    out = d.describe(object_vertex(0, 0, 0, "bed").to_dict(),
                     region_vertex(1, 0, 0, 4, 4, "bedroom").to_dict())
    assert out["relationship"] == "belong"


def synthetic_two_room_graph_and_frames():
    part, provider, bank, field, bounds = two_room_setup()
    cfg = MapperConfig(grid_step=0.5, min_observations=1)
    frames = [make_detection_frame(0.9, pose_x=-2.0 + 0.01 * i) for i in range(3)]
    graph = build_topomap(field, frames, bank, bounds, cfg)
    return part, provider, bank, field, bounds, cfg, frames, graph


def test_build_topomap_produces_valid_graph():
    *_, graph = synthetic_two_room_graph_and_frames()
    graph.validate()
    kinds = {v.node_type for v in graph.vertices}
    assert kinds >= {"region", "object", "Entrance"}
    assert graph.provenance["mapper_config"]["grid_step"] == 0.5


def test_update_with_no_frames_is_byte_identical():
    part, provider, bank, field, bounds, cfg, frames, graph = (
        synthetic_two_room_graph_and_frames()
    )
    updated = update(graph, [], field, bank, cfg)
    assert updated.to_json_bytes() == graph.to_json_bytes()


def test_update_replay_is_idempotent_within_tolerance():
    part, provider, bank, field, bounds, cfg, frames, graph = (
        synthetic_two_room_graph_and_frames()
    )
    updated = update(graph, frames, field, bank, cfg)
    assert len(updated.of_type("object")) == len(graph.of_type("object"))
    assert {v.class_name for v in updated.of_type("region")} == {
        v.class_name for v in graph.of_type("region")
    }
    for before in graph.of_type("region"):
        after = next(v for v in updated.of_type("region")
                     if v.class_name == before.class_name)
        assert np.all(np.asarray(after.bbox_extent) >= np.asarray(before.bbox_extent) - 1e-9)
        drift = np.abs(np.asarray(after.bbox_center) - np.asarray(before.bbox_center))
        assert np.all(drift <= 2 * cfg.grid_step)


def test_update_grows_region_to_include_new_observations():
    part, provider, bank, field, bounds, cfg, frames, graph = (
        synthetic_two_room_graph_and_frames()
    )
    # a new frame staring at the far east wall of the bedroom half
    intr = Intrinsics(fx=40.0, fy=40.0, cx=16.0, cy=12.0, width=32, height=24)
    depth = np.full((24, 32), 1.5, dtype=np.float32)
    inst = np.full((24, 32), -1, dtype=np.int32)
    from lopfield.scene.synthetic import _camera_pose

    pose = _camera_pose(2.4, 2.0, 1.0, yaw=0.0, pitch=0.0)  # looking toward +x
    new_frame = Frame(depth, inst, {}, {}, pose, intr)
    before = next(v for v in graph.of_type("region") if v.class_name == "bedroom")
    updated = update(graph, [new_frame], field, bank, cfg)
    after = next(v for v in updated.of_type("region") if v.class_name == "bedroom")
    vol_before = float(np.prod(before.bbox_extent))
    vol_after = float(np.prod(after.bbox_extent))
    assert vol_after >= vol_before - 1e-9
    assert after.bbox_max[0] >= 3.85  # grew to the observed wall at x = 3.9


def test_update_rejects_mismatched_bank_dims():
    part, provider, bank, field, bounds, cfg, frames, graph = (
        synthetic_two_room_graph_and_frames()
    )
    other = LabelBank.from_labels(part.regions, SyntheticProvider(seed=2, dv=32, ds=32))
    with pytest.raises(DimMismatch):
        update(graph, frames, field, other, cfg)
