"""Shared exception types."""


class TutorkitError(Exception):
    """Base class for all package errors."""


class ConfigError(TutorkitError):
    """Invalid or unknown configuration (bad provider name, malformed file)."""


class NotFoundError(TutorkitError):
    """A referenced entity (resource, course, conversation) does not exist."""


class UnsupportedKindError(TutorkitError):
    """A resource kind the ingestion path does not know how to handle."""


class DimensionMismatchError(TutorkitError):
    """Vectors of different dimensions were combined."""


class ProviderError(TutorkitError):
    """An external provider (embedding, LLM, ASR, executor) failed."""


class MediaError(TutorkitError):
    """Media could not be fetched or has an unsupported scheme."""
