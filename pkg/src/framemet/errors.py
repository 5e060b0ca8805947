"""Exception types shared across the package.

The CLI maps these onto exit codes: anything derived from FramemetError is a
validation/usage failure (exit 1); OS-level errors stay OSError (exit 2).
"""


class FramemetError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FramemetError):
    """Tensor extents do not line up for the requested operation."""


class VocabError(FramemetError):
    """A token id falls outside the embedding table."""


class ParseError(FramemetError):
    """A data file is malformed; the message names the offending line."""


class DomainError(FramemetError):
    """A value lies outside the documented domain of an operation."""


class UsageError(FramemetError):
    """An API was called in a way its contract forbids."""


class CheckpointError(FramemetError):
    """A checkpoint is missing, malformed, or incompatible with the data."""
