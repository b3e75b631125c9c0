"""Real-model adapter emitting LOPF feature clouds and scene directories."""

__version__ = "0.1.0"

from .pipeline import ExtractorConfig, extract
from .sequence import ExtractError, Sequence

__all__ = ["ExtractError", "ExtractorConfig", "Sequence", "extract", "__version__"]
