"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, validation and
input errors exit 2, numeric/runtime failures exit 3.
"""


class MgcnError(Exception):
    """Base class for all package errors."""


class InputError(MgcnError, ValueError):
    """A caller passed data violating an operation's precondition."""


class ValidationError(MgcnError, ValueError):
    """A config, checkpoint, or dataset failed structural validation."""


class SkeletonReferenceError(ValidationError):
    """A partition group names a joint that does not exist."""


class ParseError(MgcnError, ValueError):
    """A file could not be parsed; the message carries the line number."""


class SchemaError(MgcnError, ValueError):
    """Files within one corpus disagree on schema (e.g. pose width)."""


class CheckpointError(ValidationError):
    """A checkpoint file is corrupt, truncated, or mismatched."""


class NumericError(MgcnError, RuntimeError):
    """A numeric invariant was violated at runtime."""


class TrainingDiverged(NumericError):
    """Training produced a non-finite loss."""


class UsageError(MgcnError):
    """Bad command-line usage."""
