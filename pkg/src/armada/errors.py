"""Exception hierarchy shared across the package.

Every error raised by armada code derives from :class:`ArmadaError` so
callers can catch one base type at the CLI boundary. Backend failures get
their own subtree because clients classify them for retry decisions.
"""


class ArmadaError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------------------
# knowledge base
# ---------------------------------------------------------------------------


class DuplicateId(ArmadaError):
    """Two entity records claim the same id."""


class DanglingParent(ArmadaError):
    """A record names a parent id that is not present in the record set."""


class CycleDetected(ArmadaError):
    """Following parent links revisits a node."""


class UnknownEntity(ArmadaError):
    """An entity id is not present in the knowledge base."""


class UnknownAttribute(ArmadaError):
    """The named attribute is not carried by the entity node."""


class NoAlternativeValue(ArmadaError):
    """Every candidate value was filtered out; nothing left to substitute."""


# ---------------------------------------------------------------------------
# record files and manifests
# ---------------------------------------------------------------------------


class MalformedRecord(ArmadaError):
    """A line of a record file cannot be parsed into a valid record."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptyField(ArmadaError):
    """A required field is missing or empty on a record line."""

    def __init__(self, line: int, field: str):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: field {field!r} is missing or empty")


class ConflictingCanonicalName(ArmadaError):
    """Merging two records with the same id but different canonical names."""

    def __init__(self, record_id: str, first: str, second: str):
        self.record_id = record_id
        super().__init__(
            f"record {record_id!r}: canonical names {first!r} and {second!r} conflict"
        )


class ManifestError(ArmadaError):
    """A dataset manifest line is structurally invalid."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ConfigError(ArmadaError):
    """The pipeline configuration file is invalid."""


# ---------------------------------------------------------------------------
# model responses
# ---------------------------------------------------------------------------


class UnparseableResponse(ArmadaError):
    """A model response does not match the required strict schema."""


# ---------------------------------------------------------------------------
# substitution planning
# ---------------------------------------------------------------------------


class LinkFailed(ArmadaError):
    """The entity mention could not be linked to any knowledge-base node."""


class NoSibling(ArmadaError):
    """The linked node has no sibling to swap in."""


class OverlappingSpans(ArmadaError):
    """Two replacement spans overlap."""


class SpanOutOfRange(ArmadaError):
    """A replacement span does not lie within the text."""


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------


class BackendError(ArmadaError):
    """Base class for external model-backend failures."""


class BackendTimeout(BackendError):
    """The backend did not answer within the configured timeout."""


class BackendRateLimited(BackendError):
    """The backend rejected the request for exceeding its rate limit."""


class BackendProtocolError(BackendError):
    """The backend answered with something the client cannot interpret."""


class BackendRemoteError(BackendError):
    """The backend reported a remote-side failure."""


class MissingFixture(BackendError):
    """A mock backend received a prompt with no recorded fixture."""


class DigestMismatch(ArmadaError):
    """File bytes no longer match the digest recorded for them."""


# ---------------------------------------------------------------------------
# statistics and selection
# ---------------------------------------------------------------------------


class TooFewSamples(ArmadaError):
    """Not enough feature vectors to estimate a covariance."""


class NonFiniteInput(ArmadaError):
    """An input matrix contains NaN or infinite entries."""


class DimensionMismatch(ArmadaError):
    """Two Gaussian summaries have different dimensionality."""


class NumericalFailure(ArmadaError):
    """A numerical routine (eigensolver) failed to converge."""


class EmptyBatch(ArmadaError):
    """Selection was asked to operate on an empty batch."""


class InvalidBand(ArmadaError):
    """A selection band's lower edge exceeds its upper edge."""
