"""Layout-object-position scene fields: train an implicit neural field from
posed RGB-D sequences, answer position/text/image queries against it, and
build a topometric graph with an A* planner on top."""

__version__ = "0.1.0"

from . import embed, errors, field, hashgrid, planner, query, scene, topomap, validation
from .estimator import LopFieldEstimator

__all__ = [
    "LopFieldEstimator",
    "embed",
    "errors",
    "field",
    "hashgrid",
    "planner",
    "query",
    "scene",
    "topomap",
    "validation",
    "__version__",
]
