"""Acceptance suite: one test and one printed pass/fail line per criterion.

The shared 4-room desk-scale pipeline comes from the session fixture in
conftest (seeded scene, fused cloud, 20-epoch training). Run with ``-s`` to
see the criterion lines interleaved; they are also emitted through raw
stdout so they always appear once per run.
"""

import math
import sys
import time

import numpy as np

from conftest import record_criterion
from lopfield.cli import main as cli_main
from lopfield.embed import CropRef, FusionConfig, build_feature_cloud, compose_prompt
from lopfield.errors import NoPathFound
from lopfield.evaluation import region_report, sample_surface_points
from lopfield.field import TrainConfig, contrastive_loss, total_loss, train
from lopfield.hashgrid import HashGridConfig
from lopfield.query import localize_image, localize_text, weighted_average_distance
from lopfield.scene import region_of
from lopfield.topomap import (
    MapperConfig,
    TopoGraph,
    Vertex,
    compass_relation,
    deserialize,
    map_objects,
    serialize,
)
from test_field import random_batch, tiny_field
from test_planner import dijkstra, random_geometric_graph
from test_topomap_mapper import make_detection_frame

from lopfield.planner import astar


def report(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line, file=sys.stderr, flush=True)
    record_criterion(line)
    assert ok, line


def test_region_inference_accuracy(desk_pipeline):
    p = desk_pipeline
    rep = region_report(p.field, p.heldout_frames, p.scene.partition, p.bank,
                        n=1000, seed=2, w=0.5)
    runtime = p.timings["total"]
    ok = rep["accuracy"] >= 0.95 and runtime <= 300.0
    report(
        "region-inference",
        ok,
        f"held-out accuracy {rep['accuracy']:.4f} (>= 0.95), "
        f"pipeline runtime {runtime:.0f}s (<= 300s)",
    )


def test_text_query_disambiguation(desk_pipeline):
    p = desk_pipeline
    samples = p.cloud.positions.astype(np.float64)
    by_class = {}
    for o in p.scene.objects:
        by_class.setdefault(o.label, []).append(o)
    queries = []
    for label, objs in sorted(by_class.items()):
        if len({o.room for o in objs}) >= 2:
            queries.extend((label, o) for o in objs)
    queries = queries[:10]
    assert len(queries) == 10, "scene must offer 10 duplicated-class query pairs"
    hits = 0
    for label, obj in queries:
        heatmap = localize_text(
            p.field, compose_prompt(label, obj.room), p.provider, samples, w=0.5
        )
        centroid = heatmap.predicted_position(50)
        clamped = np.clip(centroid, np.asarray(obj.box_min), np.asarray(obj.box_max))
        dist = float(np.linalg.norm(centroid - clamped))
        region = region_of(centroid[:2], p.scene.partition)
        if dist <= 0.5 and region == obj.room:
            hits += 1
    report(
        "text-query-disambiguation",
        hits >= 9,
        f"{hits}/10 query pairs localized within 0.5 m in the correct region (>= 9)",
    )


def test_image_query_localization(desk_pipeline):
    p = desk_pipeline
    samples = p.cloud.positions.astype(np.float64)
    dists = []
    for i, frame in enumerate(p.frames):
        if len(dists) >= 20:
            break
        inst = frame.instance_ids
        ids, counts = np.unique(inst[inst >= 0], return_counts=True)
        if len(ids) == 0:
            continue
        dominant = int(ids[np.argmax(counts)])
        emb = p.provider.embed_image_crop(
            CropRef(label=frame.instance_labels[dominant], instance_key=dominant)
        )
        heatmap = localize_image(p.field, emb, samples)
        target = sample_surface_points([frame], 2000, seed=i)
        dists.append(weighted_average_distance(heatmap, target))
    assert len(dists) == 20
    mean = float(np.mean(dists))
    report(
        "image-query-localization",
        mean <= 1.0,
        f"similarity-weighted average distance {mean:.3f} m over 20 views (<= 1.0 m)",
    )


def test_gradient_correctness():
    field = tiny_field()
    pts, ev, es, dist, conf = random_batch(field, 12, seed=7)
    t0 = time.monotonic()

    def loss_value():
        return total_loss(field, pts, ev, es, dist, conf)[0]

    _, grads = total_loss(field, pts, ev, es, dist, conf)
    rng = np.random.default_rng(8)
    h = 1e-5
    worst = 0.0

    def fd_check(get, put, analytic):
        nonlocal worst
        orig = get()
        put(orig + h)
        up = loss_value()
        put(orig - h)
        down = loss_value()
        put(orig)
        fd = (up - down) / (2 * h)
        rel = abs(fd - analytic) / max(1e-10, abs(fd) + abs(analytic))
        worst = max(worst, rel)

    checked = 0
    while checked < 10:  # table entries
        level = rng.integers(field.grid.config.levels)
        rows, vals = grads.tables.rows(level)
        if len(rows) == 0:
            continue
        j = rng.integers(len(rows))
        col = rng.integers(field.grid.config.features_per_level)
        r = rows[j]
        t = field.grid.tables[level]
        fd_check(lambda: t[r, col],
                 lambda v: t.__setitem__((r, col), v),
                 vals[j, col])
        checked += 1

    for _ in range(10):  # trunk weights
        name = "w_trunk" if rng.uniform() < 0.9 else "b_trunk"
        flat = field.heads.params()[name].reshape(-1)
        i = rng.integers(flat.size)
        fd_check(lambda: flat[i],
                 lambda v: flat.__setitem__(i, v),
                 grads.heads[name].reshape(-1)[i])
    for _ in range(5):  # head weights
        name = ("w_v", "w_s", "b_v", "b_s")[rng.integers(4)]
        flat = field.heads.params()[name].reshape(-1)
        i = rng.integers(flat.size)
        fd_check(lambda: flat[i],
                 lambda v: flat.__setitem__(i, v),
                 grads.heads[name].reshape(-1)[i])

    fd_check(lambda: field.log_tau,
             lambda v: setattr(field, "log_tau", v),
             grads.log_tau)
    elapsed = time.monotonic() - t0
    report(
        "gradient-correctness",
        worst < 1e-3 and elapsed < 60.0,
        f"worst relative error {worst:.2e} (< 1e-3) over 10 table entries, "
        f"10 trunk weights, 5 head weights, log-tau in {elapsed:.1f}s",
    )


def test_loss_properties():
    rng = np.random.default_rng(0)
    nonneg_ok = True
    for _ in range(50):
        b, d = int(rng.integers(2, 9)), int(rng.integers(2, 8))
        f = rng.standard_normal((b, d))
        f /= np.linalg.norm(f, axis=1, keepdims=True)
        e = rng.standard_normal((b, d))
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        w = rng.uniform(0, 1, b)
        if contrastive_loss(f, e, w, float(rng.uniform(1, 100))) < 0:
            nonneg_ok = False

    f = rng.standard_normal((8, 5))
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    e = rng.standard_normal((8, 5))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    w = rng.uniform(0.1, 1, 8)
    perm = rng.permutation(8)
    perm_gap = abs(
        contrastive_loss(f, e, w, 3.0) - contrastive_loss(f[perm], e[perm], w[perm], 3.0)
    )

    oracle = 4.0 * (-math.log(math.e / (math.e + 1.0))) / 2.0
    oracle_gap = abs(contrastive_loss(np.eye(2), np.eye(2), np.ones(2), 1.0) - oracle)

    ok = nonneg_ok and perm_gap <= 1e-6 and oracle_gap <= 1e-9
    report(
        "loss-properties",
        ok,
        f"non-negative over 50 draws, permutation gap {perm_gap:.1e} (<= 1e-6), "
        f"B=2 oracle gap {oracle_gap:.1e} (<= 1e-9)",
    )


def test_astar_optimality():
    exact = 0
    for seed in range(100):
        graph = random_geometric_graph(seed)
        rng = np.random.default_rng(1000 + seed)
        n = len(graph.vertices)
        s, g = int(rng.integers(n)), int(rng.integers(n))
        expected = dijkstra(graph, s, g)
        path = astar(graph, s, g)
        if path.cost == expected:
            exact += 1
    a = Vertex(0, "region", (1, 1, 1), (0, 0, 0), "a", "")
    b = Vertex(1, "region", (1, 1, 1), (9, 0, 0), "b", "")
    try:
        astar(TopoGraph(vertices=[a, b]), 0, 1)
        disconnected_ok = False
    except NoPathFound:
        disconnected_ok = True
    report(
        "astar-optimality",
        exact == 100 and disconnected_ok,
        f"{exact}/100 random connected graphs match Dijkstra exactly; "
        f"disconnected goal raises NoPathFound",
    )


def test_topomap_schema():
    vertex = Vertex(
        id=0,
        node_type="region",
        bbox_extent=(4.163309999999999, 4.207343, 2.53566175),
        bbox_center=(-8.821845, 2.6915385, 1.259409125),
        class_name="bedroom",
        caption="A bedroom at the northwest of the house.",
    )
    graph = TopoGraph(vertices=[vertex], provenance={"checkpoint_hash": "00ff"})
    text = serialize(graph)
    back = deserialize(text)
    round_trip_ok = serialize(back).encode() == text.encode()
    values_ok = (
        back.vertices[0].class_name == "bedroom"
        and np.allclose(back.vertices[0].bbox_extent, vertex.bbox_extent, rtol=1e-5)
    )
    rel = compass_relation((-8.821845, 2.6915385), (-3.244, -0.276))
    compass_ok = rel == "b to the southeast of a"
    report(
        "topomap-schema",
        round_trip_ok and values_ok and compass_ok,
        f"byte-identical round trip, appendix vertex preserved, "
        f"compass relation {rel!r}",
    )


def test_mapping_thresholds():
    cfg1 = MapperConfig(min_observations=1)
    excluded = map_objects([make_detection_frame(0.59)], cfg1)
    included = map_objects([make_detection_frame(0.61)], cfg1)
    cfg3 = MapperConfig(min_observations=3)
    two = map_objects([make_detection_frame(0.9, pose_x=0.01 * i) for i in range(2)], cfg3)
    three = map_objects([make_detection_frame(0.9, pose_x=0.01 * i) for i in range(3)], cfg3)
    ok = excluded == [] and len(included) == 1 and two == [] and len(three) == 1
    report(
        "mapping-thresholds",
        ok,
        "confidence 0.59 excluded / 0.61 included; 2 observations gate, 3 create",
    )


def test_ablation_toggles(desk_pipeline):
    p = desk_pipeline
    ablated_cloud = build_feature_cloud(
        p.train_frames,
        p.scene.partition,
        p.provider,
        FusionConfig(encode_background=False, context_prompt=False),
    )
    grid_config = HashGridConfig(log2_table_size=16).with_bounds(*ablated_cloud.bounds())
    ablated = train(ablated_cloud, grid_config=grid_config,
                    train_config=TrainConfig(seed=1)).field
    full_rep = region_report(p.field, p.heldout_frames, p.scene.partition, p.bank,
                             n=1000, seed=2, w=0.5)
    abl_rep = region_report(ablated, p.heldout_frames, p.scene.partition, p.bank,
                            n=1000, seed=2, w=0.5)
    ok = abl_rep["accuracy"] < full_rep["accuracy"]
    report(
        "ablation-toggles",
        ok,
        f"background+context off accuracy {abl_rep['accuracy']:.3f} "
        f"< full configuration {full_rep['accuracy']:.3f}",
    )


TINY_PIPELINE_INI = """
[scene]
rooms = 2
objects_per_room = 2
frames = 8
image_width = 48
image_height = 36
seed = 3

[provider]
dv = 16
ds = 16

[fusion]
max_pixels_per_frame = 384
holdout_every = 4

[hashgrid]
levels = 6
features_per_level = 4
log2_table_size = 12

[train]
epochs = 2
batch_size = 64
samples_per_epoch = 1500
learning_rate = 1e-3
seed = 9
"""


def test_pipeline_determinism(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text(TINY_PIPELINE_INI)

    def run(tag: str):
        root = tmp_path / tag
        scene = root / "scene"
        cloud = root / "cloud.lopf"
        ckpt = root / "field.lopc"
        topo = root / "map.json"
        assert cli_main(["--config", str(ini), "gen-scene", "--out", str(scene)]) == 0
        assert cli_main(["--config", str(ini), "build-cloud", "--scene", str(scene),
                         "--out", str(cloud)]) == 0
        assert cli_main(["--config", str(ini), "train", "--cloud", str(cloud),
                         "--out", str(ckpt)]) == 0
        assert cli_main(["--config", str(ini), "build-map", "--checkpoint", str(ckpt),
                         "--scene", str(scene), "--out", str(topo)]) == 0
        return ckpt.read_bytes(), topo.read_bytes()

    ckpt_a, topo_a = run("a")
    ckpt_b, topo_b = run("b")
    ok = ckpt_a == ckpt_b and topo_a == topo_b
    report(
        "pipeline-determinism",
        ok,
        f"checkpoints identical ({len(ckpt_a)} bytes), "
        f"topomap JSON identical ({len(topo_a)} bytes)",
    )
