"""Shared exception types.

Exit-code mapping in the CLI: UsageError-like problems -> 1,
DataError subclasses -> 2, ScorerError subclasses -> 3.
"""


class SciretError(Exception):
    """Base class for all package errors."""


class DataError(SciretError):
    """Malformed or missing input data."""


class FormatError(DataError):
    """A file does not conform to its documented format."""


class EmptyQueryError(DataError):
    """Query analyzed to zero terms."""


class IndexFormatError(FormatError):
    """Index file is truncated, corrupt, or has the wrong version."""


class ScorerError(SciretError):
    """Neural scorer unreachable or misbehaving."""


class ProtocolError(ScorerError):
    """Scorer wire-protocol violation (bad ids, NaN scores, bad records)."""
