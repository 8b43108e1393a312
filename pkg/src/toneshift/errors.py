"""Exception types shared across the pipeline."""


class ToneshiftError(Exception):
    """Base class for all pipeline errors."""


class MalformedRecord(ToneshiftError):
    """A dump line could not be parsed at all."""


class MissingField(ToneshiftError):
    """A dump record is parseable but lacks a required key."""


class DimensionMismatch(ToneshiftError):
    """A vector does not have the expected dimensionality."""


class NonFiniteActivation(ToneshiftError):
    """A forward pass produced NaN or infinity."""


class DivergedLoss(ToneshiftError):
    """Training loss became non-finite."""


class EmptyTrainingSet(ToneshiftError):
    """An operation that needs training targets received none."""


class LengthMismatch(ToneshiftError):
    """Paired arrays differ in length."""


class MissingEmbedding(ToneshiftError):
    """A segment message has no embedding attached."""


class ProviderUnavailable(ToneshiftError):
    """The requested embedding provider cannot be loaded."""


class EncodeFailure(ToneshiftError):
    """The embedding provider failed on a specific text."""


class CacheCorrupt(ToneshiftError):
    """An embedding cache record failed its checksum."""


class DegenerateData(ToneshiftError):
    """Input data has no variance where some is required."""


class ModelNotLoaded(ToneshiftError):
    """The prediction service has no checkpoint loaded."""


class EmptyRequest(ToneshiftError):
    """A prediction request carries no messages."""
