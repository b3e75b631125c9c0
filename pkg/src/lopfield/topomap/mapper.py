"""Topometric map construction and updating on top of a trained field.

Mapping: regions come from classifying one grid sample per floor cell
against the region bank; objects come from persistent, confident detections
whose masked pixels are back-projected into world boxes. Edges follow the
rule-based describer; adjacent regions additionally synthesize an Entrance
vertex at their shared boundary.

Updating: new frames can add object vertices (same persistence rules,
deduplicated against existing vertices) and grow region boxes whenever a
pixel's field embedding matches a region but falls outside its current box.
Edges are rebuilt every ``edge_refresh_interval`` frames and once at the
end; an update with zero frames leaves the graph untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DimMismatch, InvalidBounds
from ..field.core import LopField
from ..query import LabelBank, infer_attribute_batch
from ..scene.geometry import Frame, back_project_pixels
from .describe import Describer, RuleBasedDescriber
from .graph import Edge, TopoGraph, Vertex

_UPDATE_PIXELS_PER_FRAME = 512


@dataclass(frozen=True)
class MapperConfig:
    grid_step: float = 0.5
    conf_threshold: float = 0.60
    min_observations: int = 3
    edge_refresh_interval: int = 50
    vs_weight: float = 0.5
    describer: str = "rule"
    # height above the floor for region grid samples; the field is
    # supervised by surface points, so mid-air queries are unreliable
    sample_height: float = 0.1

    def __post_init__(self):
        if self.grid_step <= 0:
            raise InvalidBounds("grid_step must be positive")
        if not (0.0 < self.conf_threshold < 1.0):
            raise ValueError("conf_threshold must lie in (0, 1)")
        if self.min_observations < 1 or self.edge_refresh_interval < 1:
            raise ValueError("counters must be >= 1")
        if self.sample_height < 0:
            raise ValueError("sample_height must be >= 0")

    def to_dict(self) -> dict:
        return {
            "grid_step": self.grid_step,
            "conf_threshold": self.conf_threshold,
            "min_observations": self.min_observations,
            "edge_refresh_interval": self.edge_refresh_interval,
            "vs_weight": self.vs_weight,
            "describer": self.describer,
            "sample_height": self.sample_height,
        }


def _bbox_vertex(vid: int, node_type: str, points_min, points_max, class_name, caption) -> Vertex:
    lo = np.asarray(points_min, dtype=np.float64)
    hi = np.asarray(points_max, dtype=np.float64)
    return Vertex(
        id=vid,
        node_type=node_type,
        bbox_extent=tuple(hi - lo),
        bbox_center=tuple((hi + lo) / 2.0),
        class_name=class_name,
        caption=caption,
    )


def map_regions(
    field: LopField,
    bounds: tuple,
    bank: LabelBank,
    cfg: MapperConfig = MapperConfig(),
    start_id: int = 0,
) -> list[Vertex]:
    """One region vertex per label observed on the floor-plan sample grid.

    Samples sit at the center of each grid_step x grid_step cell, just above
    the floor (``cfg.sample_height``); a region's box bounds its member
    samples in (x, y) and spans the queried volume vertically.
    """
    lo = np.asarray(bounds[0], dtype=np.float64)
    hi = np.asarray(bounds[1], dtype=np.float64)
    if np.any(hi <= lo):
        raise InvalidBounds("bounds must be non-degenerate")
    xs = np.arange(lo[0] + cfg.grid_step / 2.0, hi[0], cfg.grid_step)
    ys = np.arange(lo[1] + cfg.grid_step / 2.0, hi[1], cfg.grid_step)
    if len(xs) == 0 or len(ys) == 0:
        raise InvalidBounds("bounds are smaller than one grid cell")
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    z = min(lo[2] + cfg.sample_height, (lo[2] + hi[2]) / 2.0)
    pts = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)], axis=1)
    labels, _ = infer_attribute_batch(field, pts, bank, cfg.vs_weight)

    vertices = []
    vid = start_id
    for label in bank.labels:
        member = pts[[i for i, l in enumerate(labels) if l == label]]
        if len(member) == 0:
            continue
        pmin = np.array([member[:, 0].min(), member[:, 1].min(), lo[2]])
        pmax = np.array([member[:, 0].max(), member[:, 1].max(), hi[2]])
        vertices.append(
            _bbox_vertex(vid, "region", pmin, pmax, label, f"the {label} region")
        )
        vid += 1
    return vertices


def map_objects(
    frames: list[Frame],
    cfg: MapperConfig = MapperConfig(),
    start_id: int = 0,
    max_pixels_per_instance: int = 400,
) -> list[Vertex]:
    """Object vertices from confident, persistent instance detections.

    An instance qualifies when its detection confidence exceeds
    ``conf_threshold`` and it appears in at least ``min_observations``
    frames; its box bounds the back-projected masked pixels of every
    observation.
    """
    seen_frames: dict[int, int] = {}
    labels: dict[int, str] = {}
    boxes_min: dict[int, np.ndarray] = {}
    boxes_max: dict[int, np.ndarray] = {}

    for frame in frames:
        h, w = frame.shape
        flat_inst = frame.instance_ids.reshape(-1)
        flat_depth = frame.depth.reshape(-1)
        present = np.unique(flat_inst)
        rng = np.random.default_rng(frame.content_key())
        for inst_id in present:
            if inst_id < 0:
                continue
            conf = frame.instance_confidences[int(inst_id)]
            if not conf > cfg.conf_threshold:
                continue
            sel = np.flatnonzero((flat_inst == inst_id) & (flat_depth > 0))
            if len(sel) == 0:
                continue
            if len(sel) > max_pixels_per_instance:
                sel = sel[
                    np.sort(rng.choice(len(sel), size=max_pixels_per_instance, replace=False))
                ]
            us = (sel % w).astype(np.float64)
            vs = (sel // w).astype(np.float64)
            pts = back_project_pixels(
                us, vs, flat_depth[sel].astype(np.float64), frame.intrinsics, frame.pose
            )
            iid = int(inst_id)
            seen_frames[iid] = seen_frames.get(iid, 0) + 1
            labels[iid] = frame.instance_labels[iid]
            pmin, pmax = pts.min(axis=0), pts.max(axis=0)
            boxes_min[iid] = np.minimum(boxes_min.get(iid, pmin), pmin)
            boxes_max[iid] = np.maximum(boxes_max.get(iid, pmax), pmax)

    vertices = []
    vid = start_id
    for iid in sorted(seen_frames):
        if seen_frames[iid] < cfg.min_observations:
            continue
        vertices.append(
            _bbox_vertex(
                vid, "object", boxes_min[iid], boxes_max[iid],
                labels[iid], f"a {labels[iid]}",
            )
        )
        vid += 1
    return vertices


def _boxes_overlap(a: Vertex, b: Vertex) -> bool:
    return bool(np.all(a.bbox_min < b.bbox_max) and np.all(b.bbox_min < a.bbox_max))


def _adjacency(a: Vertex, b: Vertex, tol: float):
    """Shared-boundary description if two region boxes are adjacent in (x, y).

    Returns (axis, boundary_coord, overlap_lo, overlap_hi) or None. The gap
    between the boxes along ``axis`` must be at most ``tol`` and the boxes
    must overlap on the other floor axis.
    """
    amin, amax = a.bbox_min, a.bbox_max
    bmin, bmax = b.bbox_min, b.bbox_max
    for axis in (0, 1):
        other = 1 - axis
        gap_lo = max(amin[axis], bmin[axis])
        gap_hi = min(amax[axis], bmax[axis])
        gap = gap_lo - gap_hi  # positive = separated
        if gap > tol:
            continue
        lo = max(amin[other], bmin[other])
        hi = min(amax[other], bmax[other])
        if hi - lo <= 0:
            continue
        # adjacency means near-touching along exactly one axis, not a 2D overlap
        if gap < -tol:
            continue
        boundary = (max(amin[axis], bmin[axis]) + min(amax[axis], bmax[axis])) / 2.0
        return axis, boundary, lo, hi
    return None


def build_edges(
    vertices: list[Vertex],
    describer: Describer | None = None,
    cfg: MapperConfig = MapperConfig(),
) -> tuple[list[Edge], list[Vertex]]:
    """Construct typed edges; returns (edges, synthesized entrance vertices)."""
    describer = describer or RuleBasedDescriber()
    regions = [v for v in vertices if v.node_type == "region"]
    objects = [v for v in vertices if v.node_type == "object"]
    next_vid = max((v.id for v in vertices), default=-1) + 1

    edges: list[Edge] = []
    entrances: list[Vertex] = []
    eid = 0

    def add_edge(edge_type: str, start: Vertex, end: Vertex):
        nonlocal eid
        desc = describer.describe(start.to_dict(), end.to_dict())
        edges.append(
            Edge(
                id=eid,
                edge_type=edge_type,
                start_node=start,
                end_node=end,
                relationship=desc["relationship"],
                position_relation=desc["position_relation"],
                caption=desc["caption"],
            )
        )
        eid += 1

    for i, a in enumerate(objects):
        for b in objects[i + 1:]:
            if _boxes_overlap(a, b):
                add_edge("object_object", a, b)

    for obj in objects:
        for region in regions:
            if region.contains(np.asarray(obj.bbox_center)):
                add_edge("object_region", obj, region)

    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            adj = _adjacency(a, b, cfg.grid_step)
            if adj is None:
                continue
            add_edge("region_region", a, b)
            axis, boundary, lo, hi = adj
            center = [0.0, 0.0, (a.bbox_center[2] + b.bbox_center[2]) / 2.0]
            extent = [0.0, 0.0, min(a.bbox_extent[2], b.bbox_extent[2])]
            center[axis] = boundary
            center[1 - axis] = (lo + hi) / 2.0
            extent[axis] = cfg.grid_step
            extent[1 - axis] = hi - lo
            entrance = Vertex(
                id=next_vid,
                node_type="Entrance",
                bbox_extent=tuple(extent),
                bbox_center=tuple(center),
                class_name="Entrance",
                caption=f"Entrance connecting {a.class_name} and {b.class_name}.",
            )
            next_vid += 1
            entrances.append(entrance)
            add_edge("region_entrance", a, entrance)
            add_edge("region_entrance", b, entrance)

    return edges, entrances


def build_topomap(
    field: LopField,
    frames: list[Frame],
    bank: LabelBank,
    bounds: tuple,
    cfg: MapperConfig = MapperConfig(),
    describer: Describer | None = None,
    provenance: dict | None = None,
) -> TopoGraph:
    """Full mapping pass: regions, objects, edges, entrances."""
    regions = map_regions(field, bounds, bank, cfg)
    objects = map_objects(frames, cfg, start_id=len(regions))
    vertices = regions + objects
    edges, entrances = build_edges(vertices, describer, cfg)
    prov = dict(provenance or {})
    prov.setdefault("mapper_config", cfg.to_dict())
    graph = TopoGraph(vertices=vertices + entrances, edges=edges, provenance=prov)
    graph.validate()
    return graph


def update(
    graph: TopoGraph,
    new_frames: list[Frame],
    field: LopField,
    bank: LabelBank,
    cfg: MapperConfig = MapperConfig(),
    describer: Describer | None = None,
) -> TopoGraph:
    """Fine-tune a built graph with newly captured frames."""
    if bank.e_v.shape[1] != field.dims[1] or bank.e_s.shape[1] != field.dims[2]:
        raise DimMismatch("label bank dims do not match the field")
    if not new_frames:
        return graph

    regions = {v.id: v for v in graph.of_type("region")}
    objects = list(graph.of_type("object"))
    label_to_region = {v.class_name: v.id for v in regions.values()}

    def grow_regions(frame: Frame):
        h, w = frame.shape
        flat_depth = frame.depth.reshape(-1)
        valid = np.flatnonzero(flat_depth > 0)
        if len(valid) == 0:
            return
        rng = np.random.default_rng(frame.content_key() ^ 0xC0FFEE)
        if len(valid) > _UPDATE_PIXELS_PER_FRAME:
            valid = valid[
                np.sort(rng.choice(len(valid), size=_UPDATE_PIXELS_PER_FRAME, replace=False))
            ]
        us = (valid % w).astype(np.float64)
        vs = (valid // w).astype(np.float64)
        pts = back_project_pixels(
            us, vs, flat_depth[valid].astype(np.float64), frame.intrinsics, frame.pose
        )
        labels, _ = infer_attribute_batch(field, pts, bank, cfg.vs_weight)
        for label in set(labels):
            rid = label_to_region.get(label)
            if rid is None:
                continue
            member = pts[[i for i, l in enumerate(labels) if l == label]]
            v = regions[rid]
            pmin = np.minimum(v.bbox_min, member.min(axis=0))
            pmax = np.maximum(v.bbox_max, member.max(axis=0))
            regions[rid] = _bbox_vertex(
                v.id, "region", pmin, pmax, v.class_name, v.caption
            )

    def match_existing(candidate: Vertex) -> bool:
        for v in objects:
            if v.class_name != candidate.class_name:
                continue
            d = np.linalg.norm(
                np.asarray(v.bbox_center) - np.asarray(candidate.bbox_center)
            )
            if d <= 2.0 * cfg.grid_step or _boxes_overlap(v, candidate):
                return True
        return False

    chunks = [
        new_frames[start : start + cfg.edge_refresh_interval]
        for start in range(0, len(new_frames), cfg.edge_refresh_interval)
    ]
    next_id = max(v.id for v in graph.vertices) + 1
    for chunk in chunks:
        for frame in chunk:
            grow_regions(frame)
        candidates = map_objects(chunk, cfg, start_id=next_id)
        for cand in candidates:
            if not match_existing(cand):
                cand = replace(cand, id=next_id)
                objects.append(cand)
                next_id += 1

    vertices = list(regions.values()) + objects
    edges, entrances = build_edges(vertices, describer, cfg)
    out = TopoGraph(
        vertices=vertices + entrances,
        edges=edges,
        provenance=dict(graph.provenance),
    )
    out.validate()
    return out
