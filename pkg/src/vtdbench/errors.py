"""Exception types shared across the toolkit.

Two top-level families map onto the CLI exit codes: ValidationError
(semantic problems, exit 1) and FormatError (broken bytes on disk,
exit 2).
"""


class VtdError(Exception):
    """Base class for all toolkit errors."""


class FormatError(VtdError):
    """Malformed input bytes: bad syntax, wrong magic, truncation."""


class ValidationError(VtdError):
    """Structurally parseable input that violates a schema or contract."""


class EmptySplitError(ValidationError):
    """A split with no ground-truth frames where at least one is required."""


class EmptyMetricError(ValidationError):
    """No entity is present that the metric could be computed over."""


class ShapeError(ValidationError):
    """Mismatched raster or matrix dimensions."""
