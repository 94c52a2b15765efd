"""Exception hierarchy shared by all dataforge modules.

Every error raised on a public code path derives from DataforgeError so
embedders can catch one base class at the boundary.
"""

from __future__ import annotations


class DataforgeError(Exception):
    """Base class for all dataforge errors."""


# ---------------------------------------------------------------------------
# schema / validation

class ValueTypeError(DataforgeError):
    """A value does not conform to its declared feature type.

    Carries a path expression (e.g. ``answers.text[3]``) locating the
    offending leaf inside a nested value.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UnknownLabel(DataforgeError):
    """Label string is not part of a ClassLabel's name list."""


class ParseError(DataforgeError):
    """Malformed input text; carries a 1-based line (and column when known)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)


class UnknownTypeTag(DataforgeError):
    """Schema JSON uses a type tag this library does not define."""


# ---------------------------------------------------------------------------
# store

class BadMagic(DataforgeError):
    """File does not start with the DSET1 magic bytes."""


class UnsupportedVersion(DataforgeError):
    """File format version is newer than this library understands."""


class TruncatedFile(DataforgeError):
    """File tail is missing or inconsistent; the footer check failed."""


class ChecksumMismatch(DataforgeError):
    """Stored fingerprint does not match the recomputed content hash."""


class SchemaMismatch(DataforgeError):
    """Schemas that must be equal are not, or a row fails its target schema."""


class OutOfBounds(DataforgeError):
    """Row index or range outside the table."""


class UnknownColumn(DataforgeError):
    """Column name not present in the schema."""


# ---------------------------------------------------------------------------
# builder

class UnknownDataset(DataforgeError):
    """No builder with the requested id is registered."""


class DownloadError(DataforgeError):
    """Source fetch failed after retries, or mid-stream."""


# ---------------------------------------------------------------------------
# transform

class TransformError(DataforgeError):
    """A user transform function raised; carries the failing batch range."""

    def __init__(self, message: str, batch_range: tuple[int, int] | None = None):
        self.batch_range = batch_range
        if batch_range is not None:
            message = f"{message} (rows [{batch_range[0]}, {batch_range[1]}))"
        super().__init__(message)


class UnknownTransform(DataforgeError):
    """Transform id is not registered."""


class UnorderableType(DataforgeError):
    """Sort requested on a column type with no defined order."""


class TooFewRows(DataforgeError):
    """Operation needs more rows than the table has."""


# ---------------------------------------------------------------------------
# index

class WrongType(DataforgeError):
    """Column has the wrong feature type for this index kind."""


class ZeroVector(DataforgeError):
    """Zero vector cannot be normalized for the cosine metric."""


class DimensionMismatch(DataforgeError):
    """Query vector length differs from the index dimension."""


# ---------------------------------------------------------------------------
# metrics

class LengthMismatch(DataforgeError):
    """Predictions and references have different lengths."""


class MetricMismatch(DataforgeError):
    """States from different metrics (or versions) cannot be merged."""


class EmptyState(DataforgeError):
    """Score requested from a state that saw no data."""


# ---------------------------------------------------------------------------
# registry

class MissingFrontMatter(DataforgeError):
    """Data card text has no leading ``---`` tag block."""


class MalformedTag(DataforgeError):
    """Front-matter line is not a recognized ``key: values`` tag."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class UnknownVocabularyValue(DataforgeError):
    """Tag or filter value outside the controlled vocabulary."""


class CardInvalid(DataforgeError):
    """Card rejected because validation produced error findings."""

    def __init__(self, findings):
        self.findings = list(findings)
        lines = "; ".join(f.message for f in self.findings)
        super().__init__(f"card has {len(self.findings)} error finding(s): {lines}")


# ---------------------------------------------------------------------------
# interface

class PortInUse(DataforgeError):
    """Requested TCP port is already bound."""
