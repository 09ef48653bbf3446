"""Exception types shared across the package."""


class FedpredError(Exception):
    """Base class for all fedpred errors."""


class ConfigError(FedpredError):
    """Malformed or inconsistent experiment configuration."""


class DivergenceError(FedpredError):
    """Training or sampling produced non-finite values."""


class DataFormatError(FedpredError):
    """A dataset file could not be parsed (CSV schema, IDX layout, ...)."""


class SampleCodecError(FedpredError):
    """Base class for posterior-sample wire format errors."""


class BadMagicError(SampleCodecError):
    """Message does not start with the expected magic bytes."""


class VersionMismatchError(SampleCodecError):
    """Message carries an unsupported format version."""


class TruncatedMessageError(SampleCodecError):
    """Message is shorter than its declared contents."""


class ChecksumMismatchError(SampleCodecError):
    """Payload CRC-32 does not match the trailing checksum."""


class NonFinitePayloadError(SampleCodecError):
    """Decoded samples contain NaN or infinite entries."""
