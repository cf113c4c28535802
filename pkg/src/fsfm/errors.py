"""Exception hierarchy for the fsfm package."""


class FsfmError(Exception):
    """Base class for all fsfm errors."""


class DataError(FsfmError):
    """Bad input data: malformed files, missing stores, schema violations.

    CLI commands map this family to exit code 2.
    """


class InvalidConfigError(FsfmError):
    """A PolicyConfig failed validation; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class EmptyContentError(FsfmError):
    """Content is empty or whitespace-only where text is required."""


class NegativeElapsedTimeError(FsfmError):
    """now precedes last_accessed_at in a decay computation."""


class NegativeTimeError(FsfmError):
    """Negative elapsed time passed to a retention function."""


class NonMonotonicEventsError(FsfmError):
    """Reinforcement events are not strictly increasing in time."""


class KTooLargeError(FsfmError):
    """Requested selection size exceeds the available population."""


class BatchTooLargeError(FsfmError):
    """Ingestion batch exceeds the configured batch size."""


class MalformedRecordError(DataError):
    """A single record draft failed validation at ingestion."""


class IllegalTransitionError(FsfmError):
    """Disallowed layer transition (only Sensory->Working and Working->LongTerm)."""


class CorruptSnapshotError(DataError):
    """Snapshot file failed its digest or structure check."""


class BackpressureError(FsfmError):
    """Store memory estimate exceeds the configured watermark."""


class DegenerateSamplesError(FsfmError):
    """t-test samples too small or with no variance in either sample."""


class IncompleteReportError(FsfmError):
    """Benchmark report has no per-run data and cannot be exported."""


class InvalidMixError(DataError):
    """Corpus category mix is not a valid distribution."""


class ManifestError(DataError):
    """Benchmark manifest violates the expected schema."""
