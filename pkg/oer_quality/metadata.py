"""
The record model shared by every part of the toolkit.

This module defines what an OER metadata record looks like, which seven fields
are scored, and what it means for a field to be "present" or to have a
"length". Every downstream module (benchmark, scoring, classifier, analysis)
goes through `field_present` and `field_length` instead of reading record
attributes directly, so the semantics live in exactly one place.

It also hosts the exception hierarchy used across the package.
"""

from __future__ import annotations

import datetime as dt
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum


class RatingKind(Enum):
    """How a scored field is rated."""

    NUMERIC = "numeric"
    """Rated by the distance of its length from the benchmark mean."""

    BOOLEAN = "boolean"
    """Rated 1 when available, 0 otherwise."""


class ScoredField(Enum):
    """The seven metadata fields that take part in scoring.

    Declaration order is the benchmark table's row order; iterating the enum
    gives a deterministic order for every serialized map.
    """

    TITLE = "title"
    """The resource title."""

    DESCRIPTION = "description"
    """The free-text description."""

    SUBJECTS = "subjects"
    """The subject list."""

    LEVEL = "level"
    """Target audience level."""

    LANGUAGE = "language"
    """The language list."""

    TIME_REQUIRED = "time_required"
    """Time required to finish, kept as free text."""

    ACCESSIBILITIES = "accessibilities"
    """The accessibility feature list."""

    @property
    def rating_kind(self) -> RatingKind:
        if self in NUMERIC_FIELDS:
            return RatingKind.NUMERIC
        return RatingKind.BOOLEAN


NUMERIC_FIELDS = (ScoredField.TITLE, ScoredField.DESCRIPTION, ScoredField.SUBJECTS)
"""Fields rated by length; the rest are rated by presence only."""


class QualityFlag(Enum):
    """Whether a resource went through manual quality control."""

    WITH_CONTROL = "with control"
    """Passed manual quality control."""

    WITHOUT_CONTROL = "without control"
    """Published without manual quality control."""

    UNKNOWN = "unknown"
    """The quality-control value was missing or unrecognized."""

    @classmethod
    def parse(cls, raw) -> "QualityFlag":
        """Maps a raw quality-control cell to a flag, case-insensitively.

        Anything other than "with control" / "without control" is `UNKNOWN`.
        """
        if not isinstance(raw, str):
            return cls.UNKNOWN
        normalized = " ".join(raw.split()).casefold()
        for flag in (cls.WITH_CONTROL, cls.WITHOUT_CONTROL):
            if normalized == flag.value:
                return flag
        return cls.UNKNOWN

    @property
    def is_known(self) -> bool:
        return self is not QualityFlag.UNKNOWN


# --- Exceptions ---


class OerQualityError(RuntimeError):
    """Base class for every error raised by this package."""

    def __init__(self, message="OER quality toolkit error."):
        super().__init__(message)


class UnratedFieldError(OerQualityError, ValueError):
    """Raised when a length is requested for a field that is only rated by presence."""

    def __init__(self, field_: ScoredField | None = None):
        name = field_.value if field_ is not None else "this field"
        super().__init__(f"{name} is rated by presence and has no length.")


class DatasetFormatError(OerQualityError):
    """Raised when a dataset format tag is not recognized."""

    def __init__(self, message="Unknown dataset format."):
        super().__init__(message)


class DatasetDecodeError(OerQualityError):
    """Raised when an input stream cannot be decoded as UTF-8."""

    def __init__(self, message="The input stream is not valid UTF-8."):
        super().__init__(message)


class BenchmarkError(OerQualityError):
    """Raised when a benchmark cannot be derived, normalized or loaded."""

    def __init__(self, message="The benchmark cannot be built from the given data."):
        super().__init__(message)


class TrainingError(OerQualityError):
    """Raised when a forest cannot be trained on the given data."""

    def __init__(self, message="degenerate training set"):
        super().__init__(message)


class EvaluationError(OerQualityError):
    """Raised when a split or an evaluation cannot be carried out."""

    def __init__(self, message="The evaluation cannot be carried out."):
        super().__init__(message)


class ModelFormatError(OerQualityError):
    """Raised when a model document is malformed or has an unsupported version."""

    def __init__(self, message="Unsupported or malformed model document."):
        super().__init__(message)


class HarvestError(OerQualityError):
    """Raised when a harvest is misconfigured."""

    def __init__(self, message="Invalid harvest configuration."):
        super().__init__(message)


class ConfigError(OerQualityError):
    """Raised when a run configuration file or flag value is invalid."""

    def __init__(self, message="Invalid run configuration."):
        super().__init__(message)


# --- Record model ---


def _clean_text(value) -> str:
    if value is None:
        return ""
    return str(value).strip()


def _clean_optional(value) -> str | None:
    if value is None:
        return None
    return str(value).strip()


def _clean_list(values: Iterable | None) -> tuple[str, ...]:
    if values is None:
        return ()
    return tuple(_clean_text(v) for v in values)


_LIST_ATTRIBUTES = frozenset({"subjects", "languages", "accessibilities"})


@dataclass(frozen=True)
class OerRecord:
    """One OER's metadata plus its quality-control label.

    Instances are immutable. Text is stored trimmed, lists are tuples and
    never None; build records through `OerRecord.create` so that both the
    file parsers and the harvester share the same normalization.
    """

    url: str = ""
    title: str = ""
    description: str = ""
    material_type: str = ""
    date_available: dt.date | None = None
    date_issued: dt.date | None = None
    subjects: tuple[str, ...] = ()
    level: str | None = None
    languages: tuple[str, ...] = ()
    time_required: str | None = None
    accessibilities: tuple[str, ...] = ()
    quality_flag: QualityFlag = QualityFlag.UNKNOWN

    def __post_init__(self):
        # Lists given to the constructor or to dataclasses.replace become tuples.
        for name in _LIST_ATTRIBUTES:
            value = getattr(self, name)
            if value is None:
                value = ()
            elif isinstance(value, str):
                value = (value,)
            object.__setattr__(self, name, tuple(value))

    @classmethod
    def create(
        cls,
        *,
        url=None,
        title=None,
        description=None,
        material_type=None,
        date_available: dt.date | None = None,
        date_issued: dt.date | None = None,
        subjects: Iterable | None = None,
        level=None,
        languages: Iterable | None = None,
        time_required=None,
        accessibilities: Iterable | None = None,
        quality_flag: QualityFlag = QualityFlag.UNKNOWN,
    ) -> "OerRecord":
        return cls(
            url=_clean_text(url),
            title=_clean_text(title),
            description=_clean_text(description),
            material_type=_clean_text(material_type),
            date_available=date_available,
            date_issued=date_issued,
            subjects=_clean_list(subjects),
            level=_clean_optional(level),
            languages=_clean_list(languages),
            time_required=_clean_optional(time_required),
            accessibilities=_clean_list(accessibilities),
            quality_flag=quality_flag,
        )

    def to_dict(self) -> dict:
        """Returns the canonical JSON-lines representation of this record."""
        return {
            "url": self.url,
            "title": self.title,
            "description": self.description,
            "material_type": self.material_type,
            "date_available": _format_date(self.date_available),
            "date_issued": _format_date(self.date_issued),
            "subjects": list(self.subjects),
            "level": self.level,
            "languages": list(self.languages),
            "time_required": self.time_required,
            "accessibilities": list(self.accessibilities),
            "quality_control": self.quality_flag.value,
        }


def _format_date(value: dt.date | None) -> str | None:
    return value.isoformat() if value is not None else None


# Which record attribute each scored field reads.
_FIELD_ATTRIBUTES: Mapping[ScoredField, str] = {
    ScoredField.TITLE: "title",
    ScoredField.DESCRIPTION: "description",
    ScoredField.SUBJECTS: "subjects",
    ScoredField.LEVEL: "level",
    ScoredField.LANGUAGE: "languages",
    ScoredField.TIME_REQUIRED: "time_required",
    ScoredField.ACCESSIBILITIES: "accessibilities",
}


def field_present(record: OerRecord, scored_field: ScoredField) -> bool:
    """Returns True when the record has a usable value for the field.

    Text must be non-empty after trimming; lists need at least one non-empty
    element; optional fields must be set and non-blank.
    """
    attribute = _FIELD_ATTRIBUTES[scored_field]
    value = getattr(record, attribute)
    if value is None:
        return False
    if attribute in _LIST_ATTRIBUTES:
        return any(item.strip() for item in value)
    return bool(value.strip())


def field_length(record: OerRecord, scored_field: ScoredField) -> int:
    """Returns the length of one of the three length-rated fields.

    Title and description count whitespace-separated words; subjects count
    non-empty entries. An absent field has length 0.

    Raises:
        UnratedFieldError: If the field is rated by presence only.
    """
    if scored_field.rating_kind is not RatingKind.NUMERIC:
        raise UnratedFieldError(scored_field)
    attribute = _FIELD_ATTRIBUTES[scored_field]
    value = getattr(record, attribute)
    if attribute in _LIST_ATTRIBUTES:
        return sum(1 for item in value if item.strip())
    # str.split() with no argument splits on any Unicode whitespace run.
    return len(value.split())
