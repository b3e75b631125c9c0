"""A* planning over the topometric graph plus waypoint emission.

Traversable edges are region_region, region_entrance, and object_region
(objects are leaves, never intermediate hops). Edge weight is the Euclidean
distance between bbox centers and the heuristic is the straight-line
distance to the goal center, which never overestimates that metric. Open-set
ties break on (f, g, vertex id) so searches are deterministic.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .embed.providers import EmbeddingProvider, compose_prompt
from .errors import NoCandidates, NoPathFound, UnknownVertex
from .field.core import LopField
from .query import DEFAULT_VS_WEIGHT, LabelBank, infer_attribute, infer_attribute_batch
from .topomap.graph import TopoGraph, Vertex

TRAVERSABLE = ("region_region", "region_entrance", "object_region")
DEFAULT_WAYPOINT_STEP = 0.25


@dataclass
class Path:
    vertex_ids: list[int]
    cost: float
    waypoints: list[tuple[np.ndarray, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertex_ids),
            "cost": self.cost,
            "waypoints": [
                {"x": float(p[0]), "y": float(p[1]), "z": float(p[2]), "region": r}
                for p, r in self.waypoints
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _center(v: Vertex) -> np.ndarray:
    return np.asarray(v.bbox_center, dtype=np.float64)


def _distance(a: Vertex, b: Vertex) -> float:
    return float(np.linalg.norm(_center(a) - _center(b)))


def adjacency(graph: TopoGraph) -> dict[int, list[int]]:
    """Neighbor map over traversable edges."""
    nbrs: dict[int, list[int]] = {v.id: [] for v in graph.vertices}
    for e in graph.edges:
        if e.edge_type not in TRAVERSABLE:
            continue
        a, b = e.start_node.id, e.end_node.id
        nbrs[a].append(b)
        nbrs[b].append(a)
    return {k: sorted(set(vs)) for k, vs in nbrs.items()}


def astar(graph: TopoGraph, start_id: int, goal_id: int) -> Path:
    """Cost-optimal path between two vertices; NoPathFound if unreachable."""
    by_id = {v.id: v for v in graph.vertices}
    if start_id not in by_id:
        raise UnknownVertex(f"no vertex with id {start_id}")
    if goal_id not in by_id:
        raise UnknownVertex(f"no vertex with id {goal_id}")
    nbrs = adjacency(graph)
    goal = by_id[goal_id]

    def h(vid: int) -> float:
        return _distance(by_id[vid], goal)

    g_score = {start_id: 0.0}
    came_from: dict[int, int] = {}
    open_heap: list[tuple[float, float, int]] = [(h(start_id), 0.0, start_id)]
    in_open = {start_id}

    while open_heap:
        _, _, current = heapq.heappop(open_heap)
        if current not in in_open:
            continue  # stale heap entry superseded by a better one
        in_open.discard(current)
        if current == goal_id:
            return _reconstruct(came_from, current, by_id)
        for n in nbrs.get(current, []):
            tentative = g_score[current] + _distance(by_id[current], by_id[n])
            if tentative < g_score.get(n, math.inf):
                came_from[n] = current
                g_score[n] = tentative
                heapq.heappush(open_heap, (tentative + h(n), tentative, n))
                in_open.add(n)
    raise NoPathFound(f"no path from {start_id} to {goal_id}")


def _reconstruct(came_from: dict[int, int], current: int, by_id) -> Path:
    ids = [current]
    while current in came_from:
        current = came_from[current]
        ids.insert(0, current)
    cost = sum(_distance(by_id[a], by_id[b]) for a, b in zip(ids, ids[1:]))
    return Path(vertex_ids=ids, cost=cost)


def resolve_goal(
    graph: TopoGraph,
    query: str,
    provider: EmbeddingProvider,
    w: float = DEFAULT_VS_WEIGHT,
    region_hint: str | None = None,
) -> int:
    """Best-matching object vertex for a text query.

    Candidates are embedded as their class composed with the region they
    belong to (via the graph's belong edges); a region hint restricts
    candidates to that region and joins the candidate prompt instead.
    """
    objects = graph.of_type("object")
    if not objects:
        raise NoCandidates("graph has no object vertices")

    region_of_obj: dict[int, str] = {}
    for e in graph.edges:
        if e.edge_type == "object_region" and e.relationship == "belong":
            region_of_obj[e.start_node.id] = e.end_node.class_name

    if region_hint is not None:
        restricted = [v for v in objects if region_of_obj.get(v.id) == region_hint]
        if restricted:
            objects = restricted

    q_v, q_s = provider.embed_text(query)
    best_id, best_score = None, -math.inf
    for v in objects:
        region = region_hint or region_of_obj.get(v.id)
        text = compose_prompt(v.class_name, region) if region else v.class_name
        c_v, c_s = provider.embed_text(text)
        score = w * float(np.dot(q_v, c_v)) + (1.0 - w) * float(np.dot(q_s, c_s))
        if score > best_score:
            best_id, best_score = v.id, score
    return best_id


def floor_height(graph: TopoGraph, clearance: float = 0.1) -> float:
    """Height just above the mapped floor; where region labels are reliable."""
    regions = graph.of_type("region")
    if not regions:
        raise NoCandidates("graph has no region vertices")
    return float(min(v.bbox_min[2] for v in regions)) + clearance


def resolve_start(
    graph: TopoGraph,
    point,
    field: LopField,
    bank: LabelBank,
    w: float = DEFAULT_VS_WEIGHT,
    sample_z: float | None = None,
) -> int:
    """Region vertex for a raw 3D start position.

    The point's region label is inferred from the field (at ``sample_z``
    when given; mid-air positions are out of the field's training
    distribution); if no region vertex carries that label the nearest
    region center wins.
    """
    regions = graph.of_type("region")
    if not regions:
        raise NoCandidates("graph has no region vertices")
    p = np.asarray(point, dtype=np.float64).reshape(3).copy()
    if sample_z is not None:
        p[2] = sample_z
    label, _ = infer_attribute(field, p, bank, w)
    for v in regions:
        if v.class_name == label:
            return v.id
    return min(regions, key=lambda v: float(np.linalg.norm(_center(v) - p))).id


def emit_waypoints(
    graph: TopoGraph,
    path: Path,
    field: LopField,
    bank: LabelBank,
    step: float = DEFAULT_WAYPOINT_STEP,
    w: float = DEFAULT_VS_WEIGHT,
    waypoint_z: float | None = None,
) -> Path:
    """Interpolate straight-line waypoints along the path and label each one.

    Consecutive vertex centers are sampled every ``step`` meters including
    both endpoints; shared endpoints between segments appear once. With
    ``waypoint_z`` set, waypoints ride at that height (a ground robot moves
    on the floor, not through bbox centers in mid-air).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    by_id = {v.id: v for v in graph.vertices}
    centers = [_center(by_id[vid]) for vid in path.vertex_ids]
    if waypoint_z is not None:
        centers = [np.array([c[0], c[1], waypoint_z]) for c in centers]
    points: list[np.ndarray] = [centers[0]]
    for a, b in zip(centers, centers[1:]):
        length = float(np.linalg.norm(b - a))
        n = max(1, math.ceil(length / step - 1e-9))
        for k in range(1, n + 1):
            points.append(a + (b - a) * (k / n))
    labels, _ = infer_attribute_batch(field, np.stack(points), bank, w)
    path.waypoints = list(zip(points, labels))
    return path
