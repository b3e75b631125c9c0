"""Topometric graph schema and canonical JSON serialization.

Vertices carry metric bounding boxes (regions, objects, synthesized
entrances); edges embed full copies of their endpoint vertices. The JSON
form is canonical: fixed key order, floats rendered with %.6g, two-space
indentation. Serializing a deserialized graph reproduces the bytes exactly,
which is what the determinism and round-trip guarantees build on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import SchemaError

NODE_TYPES = ("region", "object", "Entrance")
EDGE_TYPES = ("object_object", "object_region", "region_region", "region_entrance")
EDGE_ENDPOINTS = {
    "object_object": ("object", "object"),
    "object_region": ("object", "region"),
    "region_region": ("region", "region"),
    "region_entrance": ("region", "Entrance"),
}
RELATIONSHIPS = ("connected", "belong", "false")

_VERTEX_KEYS = ("id", "node_type", "bbox_extent", "bbox_center", "class", "caption")
_EDGE_KEYS = (
    "id",
    "edge_type",
    "start_node",
    "end_node",
    "relationship",
    "position_relation",
    "caption",
)

_COMPASS = (
    "east",
    "northeast",
    "north",
    "northwest",
    "west",
    "southwest",
    "south",
    "southeast",
)


def compass_direction(dx: float, dy: float) -> str | None:
    """8-sector compass name of the offset, +x = east and +y = north.

    Returns None for a zero offset. Sector boundaries round half to even,
    which keeps the relation antisymmetric under 180-degree flips.
    """
    if dx == 0.0 and dy == 0.0:
        return None
    angle = math.degrees(math.atan2(dy, dx))
    return _COMPASS[int(round(angle / 45.0)) % 8]


def compass_relation(center_a, center_b) -> str:
    """Position phrase for b relative to a, from bbox centers."""
    dx = float(center_b[0]) - float(center_a[0])
    dy = float(center_b[1]) - float(center_a[1])
    direction = compass_direction(dx, dy)
    if direction is None:
        return "b at the same position as a"
    return f"b to the {direction} of a"


@dataclass(frozen=True)
class Vertex:
    id: int
    node_type: str
    bbox_extent: tuple[float, float, float]
    bbox_center: tuple[float, float, float]
    class_name: str
    caption: str

    def __post_init__(self):
        if self.node_type not in NODE_TYPES:
            raise SchemaError(f"unknown node_type {self.node_type!r}")
        ext = tuple(float(x) for x in self.bbox_extent)
        if len(ext) != 3 or any(e < 0 for e in ext):
            raise SchemaError("bbox_extent must be 3 non-negative floats")
        object.__setattr__(self, "bbox_extent", ext)
        object.__setattr__(
            self, "bbox_center", tuple(float(x) for x in self.bbox_center)
        )

    @property
    def bbox_min(self) -> np.ndarray:
        return np.asarray(self.bbox_center) - np.asarray(self.bbox_extent) / 2.0

    @property
    def bbox_max(self) -> np.ndarray:
        return np.asarray(self.bbox_center) + np.asarray(self.bbox_extent) / 2.0

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= self.bbox_min) and np.all(p <= self.bbox_max))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "node_type": self.node_type,
            "bbox_extent": list(self.bbox_extent),
            "bbox_center": list(self.bbox_center),
            "class": self.class_name,
            "caption": self.caption,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vertex":
        missing = set(_VERTEX_KEYS) - set(data)
        if missing:
            raise SchemaError(f"vertex missing keys {sorted(missing)}")
        return cls(
            id=int(data["id"]),
            node_type=data["node_type"],
            bbox_extent=tuple(data["bbox_extent"]),
            bbox_center=tuple(data["bbox_center"]),
            class_name=data["class"],
            caption=data["caption"],
        )


@dataclass(frozen=True)
class Edge:
    id: int
    edge_type: str
    start_node: Vertex
    end_node: Vertex
    relationship: str
    position_relation: str
    caption: str

    def __post_init__(self):
        if self.edge_type not in EDGE_TYPES:
            raise SchemaError(f"unknown edge_type {self.edge_type!r}")
        expected = EDGE_ENDPOINTS[self.edge_type]
        actual = (self.start_node.node_type, self.end_node.node_type)
        if actual != expected:
            raise SchemaError(
                f"edge_type {self.edge_type} expects endpoints {expected}, got {actual}"
            )
        if self.relationship not in RELATIONSHIPS:
            raise SchemaError(f"unknown relationship {self.relationship!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "edge_type": self.edge_type,
            "start_node": self.start_node.to_dict(),
            "end_node": self.end_node.to_dict(),
            "relationship": self.relationship,
            "position_relation": self.position_relation,
            "caption": self.caption,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Edge":
        missing = set(_EDGE_KEYS) - set(data)
        if missing:
            raise SchemaError(f"edge missing keys {sorted(missing)}")
        return cls(
            id=int(data["id"]),
            edge_type=data["edge_type"],
            start_node=Vertex.from_dict(data["start_node"]),
            end_node=Vertex.from_dict(data["end_node"]),
            relationship=data["relationship"],
            position_relation=data["position_relation"],
            caption=data["caption"],
        )


@dataclass
class TopoGraph:
    vertices: list[Vertex] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def vertex_by_id(self, vid: int) -> Vertex:
        for v in self.vertices:
            if v.id == vid:
                return v
        raise SchemaError(f"no vertex with id {vid}")

    def of_type(self, node_type: str) -> list[Vertex]:
        return [v for v in self.vertices if v.node_type == node_type]

    def validate(self) -> None:
        ids = [v.id for v in self.vertices]
        if len(set(ids)) != len(ids):
            raise SchemaError("vertex ids are not unique")
        by_id = {v.id: v for v in self.vertices}
        seen_pairs = set()
        for e in self.edges:
            for endpoint in (e.start_node, e.end_node):
                if endpoint.id not in by_id:
                    raise SchemaError(
                        f"edge {e.id} references unknown vertex {endpoint.id}"
                    )
                if by_id[endpoint.id].node_type != endpoint.node_type:
                    raise SchemaError(
                        f"edge {e.id} embeds a stale copy of vertex {endpoint.id}"
                    )
            key = (e.edge_type, frozenset((e.start_node.id, e.end_node.id)))
            if key in seen_pairs:
                raise SchemaError(f"duplicate {e.edge_type} edge for pair {key[1]}")
            seen_pairs.add(key)

    def to_dict(self) -> dict:
        return {
            "vertices": [v.to_dict() for v in self.vertices],
            "edges": [e.to_dict() for e in self.edges],
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict()) + "\n"

    def to_json_bytes(self) -> bytes:
        return self.to_json().encode("utf-8")

    def __eq__(self, other) -> bool:
        if not isinstance(other, TopoGraph):
            return NotImplemented
        return self.to_json_bytes() == other.to_json_bytes()


def serialize(graph: TopoGraph) -> str:
    graph.validate()
    return graph.to_json()


def deserialize(text: str | bytes) -> TopoGraph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict) or "vertices" not in data or "edges" not in data:
        raise SchemaError("graph JSON must contain 'vertices' and 'edges'")
    graph = TopoGraph(
        vertices=[Vertex.from_dict(v) for v in data["vertices"]],
        edges=[Edge.from_dict(e) for e in data["edges"]],
        provenance=data.get("provenance", {}),
    )
    graph.validate()
    return graph


def save_graph(graph: TopoGraph, path) -> None:
    with open(path, "w") as f:
        f.write(serialize(graph))


def load_graph(path) -> TopoGraph:
    with open(path) as f:
        return deserialize(f.read())


def _fmt(value, indent: int) -> str:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {_fmt(v, indent + 1)}'
            for k, v in value.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}  {_fmt(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    raise SchemaError(f"cannot serialize value of type {type(value).__name__}")


def format_float(x: float) -> str:
    """Canonical %.6g float rendering, kept JSON-parseable."""
    if math.isnan(x) or math.isinf(x):
        raise SchemaError("non-finite float in graph")
    s = f"{x:.6g}"
    return s


def canonical_json(obj) -> str:
    return _fmt(obj, 0)
