"""Exception hierarchy for the retrieval engine.

Every error raised by the engine derives from :class:`EngineError`, so
callers (notably the CLI) can catch one type and report cleanly.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class ZeroVectorError(EngineError):
    """An all-zero vector cannot be normalized or embedded."""


class DimensionMismatchError(EngineError):
    """Two vectors or matrices disagree on dimension."""


class EmptyInputError(EngineError):
    """An operation received an empty vector, list, or matrix."""


class InvalidTemperatureError(EngineError):
    """Softmax temperature must be strictly positive."""


class EmptyQueueError(EngineError):
    """The contrastive queue holds no entries."""


class EmptyTitleError(EngineError):
    """A caption yielded no keywords, so no title can be built."""


class InsufficientGalleryError(EngineError):
    """Requested more candidates than the gallery contains."""


class ScorerError(EngineError):
    """A match scorer failed on one candidate.

    Carries the candidate id so pipelines can report which item broke.
    """

    def __init__(self, candidate_id, message="scorer failed"):
        super().__init__(f"{message} (candidate {candidate_id!r})")
        self.candidate_id = candidate_id


class RankOutOfRangeError(EngineError):
    """Recall rank N exceeds the length of a ranked list."""


class StoreError(EngineError):
    """An embedding store file is malformed or unreadable."""


class StoreIncompleteError(EngineError):
    """A required embedding is missing from the store."""


class ManifestError(EngineError):
    """A dataset manifest failed to parse or validate.

    ``line`` is the 1-based line number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateIdError(ManifestError):
    """Two manifest records share a video id."""


class ValidationError(ManifestError):
    """A manifest record or configuration value violates its contract."""


class ProviderUnavailableError(EngineError):
    """The remote provider endpoint could not be reached."""


class ProtocolError(EngineError):
    """A provider response violates the wire contract."""


class NumericalFailureError(EngineError):
    """A numerical check hit a non-finite value."""


class TrainingDivergedError(EngineError):
    """The trainer produced a non-finite loss or degenerate features."""
