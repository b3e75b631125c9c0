"""Exception hierarchy shared by all subsystems.

Every error carries a stable ``name`` used by the CLI for structured exit
messages, so scripts can match on it without parsing prose.
"""


class LopFieldError(Exception):
    """Base class for all package errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


class InvalidDepth(LopFieldError):
    pass


class OutOfBounds(LopFieldError):
    pass


class GenerationFailed(LopFieldError):
    pass


class InvalidLabel(LopFieldError):
    pass


class NoData(LopFieldError):
    pass


class DimMismatch(LopFieldError):
    pass


class InvalidInput(LopFieldError):
    pass


class BatchTooSmall(LopFieldError):
    pass


class CorruptCheckpoint(LopFieldError):
    pass


class CorruptCloud(LopFieldError):
    pass


class UndefinedEmbedding(LopFieldError):
    pass


class NoSamples(LopFieldError):
    pass


class InvalidBounds(LopFieldError):
    pass


class SchemaError(LopFieldError):
    pass


class NoCandidates(LopFieldError):
    pass


class NoPathFound(LopFieldError):
    pass


class UnknownVertex(LopFieldError):
    pass


class ConfigError(LopFieldError):
    pass
