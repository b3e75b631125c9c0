"""Relationship describers: deterministic rules, or an external LLM hook.

A describer receives the JSON dicts of two vertices and returns
``{"relationship", "position_relation", "caption"}``. The rule-based
implementation is the default everywhere (and the only one exercised by the
verification suite); the external one wraps any chat-completion callable and
parses its JSON reply.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from typing import Callable


from ..errors import SchemaError
from .graph import compass_direction, compass_relation

# Object classes that do not plausibly belong to a region; standing in for
# an LLM's commonsense veto. Keys and region labels are lowercase.
IMPLAUSIBLE_PAIRS: dict[str, tuple[str, ...]] = {
    "bike": ("bedroom", "bathroom", "toilet", "kitchen"),
    "bicycle": ("bedroom", "bathroom", "toilet", "kitchen"),
    "bed": ("bathroom", "toilet", "kitchen", "hallway"),
    "sofa": ("bathroom", "toilet"),
    "oven": ("bedroom", "bathroom", "toilet"),
    "refrigerator": ("bathroom", "toilet"),
    "toilet": ("kitchen", "living room", "dining room", "bedroom"),
    "bathtub": ("kitchen", "living room", "dining room", "bedroom"),
}


class Describer(ABC):
    @abstractmethod
    def describe(self, start: dict, end: dict) -> dict:
        """Return relationship fields for an edge from ``start`` to ``end``."""


class RuleBasedDescriber(Describer):
    def __init__(self, implausible: dict[str, tuple[str, ...]] | None = None,
                 center_fraction: float = 0.25):
        self.implausible = IMPLAUSIBLE_PAIRS if implausible is None else implausible
        self.center_fraction = center_fraction

    def _is_implausible(self, object_class: str, region_class: str) -> bool:
        banned = self.implausible.get(object_class.lower(), ())
        return region_class.lower() in banned

    def describe(self, start: dict, end: dict) -> dict:
        kinds = (start["node_type"], end["node_type"])
        if kinds == ("object", "region"):
            return self._object_region(start, end)
        if kinds == ("object", "object"):
            return {
                "relationship": "connected",
                "position_relation": compass_relation(start["bbox_center"], end["bbox_center"]),
                "caption": f"the {start['class']} and the {end['class']} overlap",
            }
        if kinds == ("region", "region"):
            return {
                "relationship": "connected",
                "position_relation": compass_relation(start["bbox_center"], end["bbox_center"]),
                "caption": f"the {start['class']} is adjacent to the {end['class']}",
            }
        if kinds == ("region", "Entrance"):
            return {
                "relationship": "connected",
                "position_relation": compass_relation(start["bbox_center"], end["bbox_center"]),
                "caption": f"The pathway from the {start['class']} through an entrance.",
            }
        raise SchemaError(f"no rule for node types {kinds}")

    def _object_region(self, obj: dict, region: dict) -> dict:
        if self._is_implausible(obj["class"], region["class"]):
            return {
                "relationship": "false",
                "position_relation": compass_relation(obj["bbox_center"], region["bbox_center"]),
                "caption": f"a {obj['class']} in the {region['class']} is not plausible",
            }
        dx = obj["bbox_center"][0] - region["bbox_center"][0]
        dy = obj["bbox_center"][1] - region["bbox_center"][1]
        ext = region["bbox_extent"]
        if (
            abs(dx) <= self.center_fraction * ext[0]
            and abs(dy) <= self.center_fraction * ext[1]
        ):
            position = "a in the center of b"
        else:
            direction = compass_direction(dx, dy)
            position = f"a in the {direction} of b" if direction else "a in the center of b"
        return {
            "relationship": "belong",
            "position_relation": position,
            "caption": f"the {obj['class']} belongs to the {region['class']}",
        }


_EXTERNAL_PROMPT = """You manage a scene graph. Given two graph nodes as JSON
(each with id, node_type, bbox_extent, bbox_center, class, caption), reply
with one JSON object and nothing else, containing exactly the keys
"relationship", "position_relation", and "caption". Use "belong" when the
first node is an object inside the second node's region, "connected" for
adjacent or overlapping nodes, and "false" when the pairing is implausible.
Describe position_relation from bounding-box centers with compass directions
(+x is east, +y is north).

Node a:
{start}

Node b:
{end}
"""


class ExternalDescriber(Describer):
    """Adapter for an external chat-completion function.

    ``complete`` maps a prompt string to the model's reply; the reply must be
    a JSON object carrying the three edge fields. Not used by any automated
    verification; network and model choice are the caller's business.
    """

    def __init__(self, complete: Callable[[str], str]):
        self.complete = complete

    def describe(self, start: dict, end: dict) -> dict:
        prompt = _EXTERNAL_PROMPT.format(
            start=json.dumps(start, indent=2), end=json.dumps(end, indent=2)
        )
        reply = self.complete(prompt)
        try:
            data = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"describer reply is not JSON: {exc}") from None
        missing = {"relationship", "position_relation", "caption"} - set(data)
        if missing:
            raise SchemaError(f"describer reply missing {sorted(missing)}")
        return {
            "relationship": data["relationship"],
            "position_relation": data["position_relation"],
            "caption": data["caption"],
        }


def make_describer(kind: str = "rule", complete: Callable[[str], str] | None = None) -> Describer:
    if kind == "rule":
        return RuleBasedDescriber()
    if kind == "external":
        if complete is None:
            raise SchemaError("external describer needs a completion callable")
        return ExternalDescriber(complete)
    raise SchemaError(f"unknown describer kind {kind!r}")
