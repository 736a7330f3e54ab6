"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class ClinEventsError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(ClinEventsError):
    """Invalid or incomplete pipeline configuration.

    ``field`` names the offending config entry (dotted path).
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# --- corpus ---------------------------------------------------------------

class CorpusError(ClinEventsError):
    pass


class MissingColumn(CorpusError):
    def __init__(self, column: str, path: str = ""):
        super().__init__(f"missing column {column!r}" + (f" in {path}" if path else ""))
        self.column = column


class MalformedRow(CorpusError):
    def __init__(self, row: int, reason: str):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class EmptyText(MalformedRow):
    def __init__(self, row: int, field: str = "text"):
        super().__init__(row, f"empty {field!r} field")


# --- retrieval ------------------------------------------------------------

class RetrievalError(ClinEventsError):
    pass


class EmptyCorpus(RetrievalError):
    pass


class UnknownChunk(RetrievalError):
    def __init__(self, chunk_id: int):
        super().__init__(f"chunk {chunk_id} is not in the index")
        self.chunk_id = chunk_id


class ZeroVector(RetrievalError):
    pass


class ChannelMismatch(RetrievalError):
    pass


# --- providers ------------------------------------------------------------

class ProviderError(ClinEventsError):
    """External LLM/embedding service failure.

    ``transient`` marks errors worth retrying (timeouts, 5xx).
    """

    def __init__(self, message: str, transient: bool = False):
        super().__init__(message)
        self.transient = transient


class ProviderTimeout(ProviderError):
    def __init__(self, message: str = "request timed out"):
        super().__init__(message, transient=True)


class RetriesExhausted(ProviderError):
    def __init__(self, attempts: int, last: Exception):
        super().__init__(f"gave up after {attempts} attempts: {last}", transient=False)
        self.attempts = attempts
        self.last = last


class DimensionMismatch(ProviderError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"provider declared dimension {expected}, returned {got}")
        self.expected = expected
        self.got = got


# --- annotation -----------------------------------------------------------

class AnnotationError(ClinEventsError):
    pass


class NoChunks(AnnotationError):
    pass


# --- timeline -------------------------------------------------------------

class TimelineError(ClinEventsError):
    pass


class NonFiniteTime(TimelineError):
    def __init__(self, value: float):
        super().__init__(f"timestamp is not finite: {value!r}")
        self.value = value


class BadFractions(TimelineError):
    pass


# --- stats ----------------------------------------------------------------

class StatsError(ClinEventsError):
    pass


class StageMismatch(StatsError):
    def __init__(self, stage: str):
        super().__init__(f"unknown funnel stage {stage!r}")
        self.stage = stage


class EmptySide(StatsError):
    pass
