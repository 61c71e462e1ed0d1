"""Exception types shared across the package."""


class EsgMapError(Exception):
    """Base class for all esgmap errors."""


class TaxonomyError(EsgMapError):
    """Malformed taxonomy file, invalid NACE code, or duplicate activity id."""


class DocumentError(EsgMapError):
    """Unreadable, empty, or badly encoded document input."""


class DatasetError(EsgMapError):
    """Labeled-pair file or invariant violation (bad schema, orphan parent, ...)."""


class BackendError(EsgMapError):
    """Transport-level failure talking to an embedding or inference backend."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


class UnparseableVerdictError(EsgMapError):
    """Backend output could not be parsed as 0/1 after all retries."""

    def __init__(self, message: str, raw_output: str):
        super().__init__(message)
        self.raw_output = raw_output


class EmbedderMismatchError(EsgMapError):
    """Query embedder does not match the embedder the index was built with."""


class AdjudicationError(EsgMapError):
    """Base for vote-recording violations."""


class UnknownCandidateError(AdjudicationError):
    pass


class DuplicateVoteError(AdjudicationError):
    pass


class FinalizedCandidateError(AdjudicationError):
    pass


class PendingCandidatesError(EsgMapError):
    """An operation required finalized candidates but some are still pending."""

    def __init__(self, pending_ids):
        self.pending_ids = list(pending_ids)
        shown = ", ".join(self.pending_ids[:5])
        more = "" if len(self.pending_ids) <= 5 else f" (+{len(self.pending_ids) - 5} more)"
        super().__init__(f"{len(self.pending_ids)} candidate(s) still pending: {shown}{more}")


class PipelineError(EsgMapError):
    """Pipeline preconditions violated (no documents, empty activity selection, ...)."""


class StoreError(EsgMapError):
    """Corrupted or unreadable project store."""


class SchemaVersionError(StoreError):
    """Project store was written by an incompatible schema version."""
