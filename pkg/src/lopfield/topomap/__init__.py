"""Topometric graph: schema, mapping, updating, relationship describers."""

from .describe import (
    Describer,
    ExternalDescriber,
    IMPLAUSIBLE_PAIRS,
    RuleBasedDescriber,
    make_describer,
)
from .graph import (
    Edge,
    TopoGraph,
    Vertex,
    compass_direction,
    compass_relation,
    deserialize,
    load_graph,
    save_graph,
    serialize,
)
from .mapper import (
    MapperConfig,
    build_edges,
    build_topomap,
    map_objects,
    map_regions,
    update,
)

__all__ = [
    "Describer",
    "Edge",
    "ExternalDescriber",
    "IMPLAUSIBLE_PAIRS",
    "MapperConfig",
    "RuleBasedDescriber",
    "TopoGraph",
    "Vertex",
    "build_edges",
    "build_topomap",
    "compass_direction",
    "compass_relation",
    "deserialize",
    "load_graph",
    "make_describer",
    "map_objects",
    "map_regions",
    "save_graph",
    "serialize",
    "update",
]
