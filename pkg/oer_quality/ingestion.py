"""
Reads OER metadata datasets into validated `OerRecord` lists.

Two formats are supported: JSON-lines (one object per line, the canonical
interchange format) and CSV with a header row, where list cells are joined
with "|". Both map the same key names:

    url, title, description, material_type, date_available, date_issued,
    subjects, level, languages, time_required, accessibilities,
    quality_control

A malformed entry is rejected with its index and a reason; it never aborts the
parse. Only an undecodable stream or an unknown format tag is fatal.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
from abc import ABC, abstractmethod
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import BinaryIO, NamedTuple, TextIO

from oer_quality.metadata import (
    DatasetDecodeError,
    DatasetFormatError,
    OerRecord,
    QualityFlag,
)

logger = logging.getLogger(__name__)

LIST_DELIMITER = "|"

TEXT_KEYS = ("url", "title", "description", "material_type")
OPTIONAL_TEXT_KEYS = ("level", "time_required")
LIST_KEYS = ("subjects", "languages", "accessibilities")
DATE_KEYS = ("date_available", "date_issued")
QUALITY_KEY = "quality_control"

# Header names seen in exports of the public dataset, mapped onto the canonical
# schema. Unverified against the published file; extend as needed.
COLUMN_ALIASES: Mapping[str, str] = {
    "link": "url",
    "educational_type": "material_type",
    "type": "material_type",
    "date_of_availability": "date_available",
    "date_of_issuing": "date_issued",
    "subject": "subjects",
    "subject_list": "subjects",
    "target_audience_level": "level",
    "audience_level": "level",
    "language": "languages",
    "language_list": "languages",
    "time_required_to_finish": "time_required",
    "accessibility": "accessibilities",
    "quality": "quality_control",
    "qualitycontrol": "quality_control",
}


class DatasetFormat(Enum):
    """The dataset file formats understood by the parsers."""

    JSONL = "jsonl"
    """One JSON object per line."""

    CSV = "csv"
    """RFC-4180 CSV with a header row."""

    @classmethod
    def parse(cls, tag: "str | DatasetFormat") -> "DatasetFormat":
        if isinstance(tag, DatasetFormat):
            return tag
        normalized = str(tag).strip().lower()
        if normalized in ("jsonl", "json-lines", "jsonlines", "ndjson"):
            return cls.JSONL
        if normalized == "csv":
            return cls.CSV
        raise DatasetFormatError(f"Unknown dataset format: {tag!r}")

    @classmethod
    def from_path(cls, path: Path) -> "DatasetFormat":
        suffix = path.suffix.lower()
        if suffix == ".csv":
            return cls.CSV
        if suffix in (".jsonl", ".ndjson", ".json"):
            return cls.JSONL
        raise DatasetFormatError(f"Cannot infer dataset format from {path.name!r}")


class Rejection(NamedTuple):
    """An input entry that could not become a record."""

    index: int
    """1-based line number (JSON-lines) or data-row number (CSV)."""

    reason: str

    raw: str | None = None
    """The offending raw entry, when it is worth keeping."""


class EntryNote(NamedTuple):
    """A field-level problem that degraded a value without rejecting the entry."""

    index: int
    message: str


@dataclass
class IngestReport:
    """The outcome of one parse: accepted records plus per-entry rejections.

    Every input entry ends up either in `records` or in `rejected`.
    """

    records: list[OerRecord] = field(default_factory=list)
    rejected: list[Rejection] = field(default_factory=list)
    source: str = "<stream>"
    notes: list[EntryNote] = field(default_factory=list)

    @property
    def total_entries(self) -> int:
        return len(self.records) + len(self.rejected)

    def summary_line(self) -> str:
        return f"{len(self.records)} parsed, {len(self.rejected)} rejected"

    def rejections_to_dict(self) -> list[dict]:
        return [r._asdict() for r in self.rejected]


class EntryError(ValueError):
    """An entry is malformed; carries the rejection reason."""


# --- Shared record construction ---


def _canonical_key(key: str) -> str:
    normalized = "_".join(str(key).strip().lower().replace("-", " ").split())
    return COLUMN_ALIASES.get(normalized, normalized)


def canonicalize_keys(entry: Mapping) -> dict:
    """Maps raw keys onto the canonical schema; the first occurrence wins."""
    result: dict = {}
    for key, value in entry.items():
        if key is None:
            continue
        result.setdefault(_canonical_key(key), value)
    return result


def _text_value(entry: Mapping, key: str) -> str | None:
    value = entry.get(key)
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return str(value)
    raise EntryError(f"field {key!r} must be text, got {type(value).__name__}")


def _list_value(entry: Mapping, key: str) -> list[str]:
    value = entry.get(key)
    if value is None:
        return []
    if isinstance(value, str):
        if not value.strip():
            return []
        return value.split(LIST_DELIMITER)
    if isinstance(value, list):
        items = []
        for item in value:
            if item is None:
                continue
            if isinstance(item, (dict, list)):
                raise EntryError(f"field {key!r} must hold text items")
            items.append(str(item))
        return items
    raise EntryError(f"field {key!r} must be a list, got {type(value).__name__}")


def parse_date(value) -> dt.date | None:
    """Parses an ISO-8601 date or date-time.

    Raises:
        ValueError: If the value is set but not ISO-8601.
    """
    if value is None:
        return None
    text = str(value).strip()
    if not text:
        return None
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        return dt.datetime.fromisoformat(text).date()


def record_from_mapping(
    entry: Mapping, index: int, notes: list[EntryNote] | None = None
) -> OerRecord:
    """Builds an `OerRecord` from one raw entry.

    Missing keys become empty values. Unparseable dates degrade to an absent
    date with a note appended to `notes`.

    Raises:
        EntryError: If the entry is not a mapping or a field has the wrong type.
    """
    if not isinstance(entry, Mapping):
        raise EntryError(f"expected an object, got {type(entry).__name__}")
    entry = canonicalize_keys(entry)

    dates: dict[str, dt.date | None] = {}
    for key in DATE_KEYS:
        try:
            dates[key] = parse_date(_text_value(entry, key))
        except ValueError as e:
            if isinstance(e, EntryError):
                raise
            dates[key] = None
            message = f"{key}: unparseable date {entry.get(key)!r}"
            logger.debug("entry %d: %s", index, message)
            if notes is not None:
                notes.append(EntryNote(index, message))

    quality_raw = entry.get(QUALITY_KEY)
    return OerRecord.create(
        url=_text_value(entry, "url"),
        title=_text_value(entry, "title"),
        description=_text_value(entry, "description"),
        material_type=_text_value(entry, "material_type"),
        date_available=dates["date_available"],
        date_issued=dates["date_issued"],
        subjects=_list_value(entry, "subjects"),
        level=_text_value(entry, "level"),
        languages=_list_value(entry, "languages"),
        time_required=_text_value(entry, "time_required"),
        accessibilities=_list_value(entry, "accessibilities"),
        quality_flag=QualityFlag.parse(quality_raw),
    )


# --- Parsers ---


class DatasetParser(ABC):
    """Turns a decoded text stream into an `IngestReport`."""

    dataset_format: DatasetFormat
    """The format this parser handles."""

    @staticmethod
    def create(dataset_format: "DatasetFormat | str") -> "DatasetParser":
        """Creates the parser registered for `dataset_format`.

        Searches the subclass tree depth-first for a class whose
        `dataset_format` matches.
        """
        dataset_format = DatasetFormat.parse(dataset_format)
        classes_to_visit = list(DatasetParser.__subclasses__())
        while classes_to_visit:
            cls = classes_to_visit.pop()
            if getattr(cls, "dataset_format", None) == dataset_format:
                return cls()
            classes_to_visit.extend(cls.__subclasses__())
        raise DatasetFormatError(f"No parser available for {dataset_format.value}")

    def parse(self, text: str, source: str = "<stream>") -> IngestReport:
        report = IngestReport(source=source)
        for index, entry_or_error in self._entries(text):
            if isinstance(entry_or_error, Rejection):
                report.rejected.append(entry_or_error)
                continue
            try:
                record = record_from_mapping(entry_or_error, index, report.notes)
            except EntryError as e:
                report.rejected.append(
                    Rejection(index, str(e), json.dumps(entry_or_error, default=str))
                )
                continue
            report.records.append(record)

        if report.rejected:
            logger.warning(
                "%s: rejected %d of %d entries",
                source,
                len(report.rejected),
                report.total_entries,
            )
        logger.info("%s: %s", source, report.summary_line())
        return report

    @abstractmethod
    def _entries(self, text: str) -> Iterator[tuple[int, "Mapping | Rejection"]]:
        """Yields (index, raw entry) pairs, or (index, Rejection) for unreadable ones."""


class JsonLinesParser(DatasetParser):
    """Parses one JSON object per line; blank lines are not entries.

    Only LF, CR and CRLF end a line. U+2028, U+2029 and U+0085 are legal inside
    JSON strings and stay part of the entry.
    """

    dataset_format = DatasetFormat.JSONL

    def _entries(self, text: str):
        lines = io.StringIO(text, newline="")
        for line_number, line in enumerate(lines, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as e:
                yield line_number, Rejection(line_number, f"invalid JSON: {e.msg}", line)
                continue
            if not isinstance(entry, dict):
                yield line_number, Rejection(
                    line_number, f"expected an object, got {type(entry).__name__}", line
                )
                continue
            yield line_number, entry


class CsvParser(DatasetParser):
    """Parses CSV with a mandatory header row; list cells are "|"-delimited."""

    dataset_format = DatasetFormat.CSV

    def _entries(self, text: str):
        reader = csv.reader(io.StringIO(text, newline=""))
        try:
            header = next(reader)
        except StopIteration:
            return
        except csv.Error as e:
            raise DatasetDecodeError(f"unreadable CSV header: {e}") from e

        row_number = 0
        while True:
            try:
                row = next(reader)
            except StopIteration:
                return
            except csv.Error as e:
                row_number += 1
                yield row_number, Rejection(row_number, f"invalid CSV row: {e}")
                continue
            if not row or not any(cell.strip() for cell in row):
                continue
            row_number += 1
            if len(row) != len(header):
                yield row_number, Rejection(
                    row_number,
                    f"row has {len(row)} fields, header has {len(header)}",
                    LIST_DELIMITER.join(row),
                )
                continue
            yield row_number, dict(zip(header, row))


def decode_stream(stream: BinaryIO) -> str:
    """Reads and decodes a byte stream as UTF-8 (a leading BOM is dropped).

    Raises:
        DatasetDecodeError: If the bytes are not valid UTF-8.
    """
    data = stream.read()
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise DatasetDecodeError(
            f"The input stream is not valid UTF-8 (byte offset {e.start})."
        ) from e


def parse_dataset(
    stream: BinaryIO, dataset_format: "DatasetFormat | str", source: str = "<stream>"
) -> IngestReport:
    """Parses a UTF-8 byte stream in the given format.

    Raises:
        DatasetFormatError: If the format tag is unknown.
        DatasetDecodeError: If the stream is not valid UTF-8.
    """
    parser = DatasetParser.create(dataset_format)
    return parser.parse(decode_stream(stream), source=source)


def load_dataset(
    path: "str | Path", dataset_format: "DatasetFormat | str | None" = None
) -> IngestReport:
    """Parses a dataset file, inferring the format from its suffix when not given."""
    path = Path(path)
    if dataset_format is None:
        dataset_format = DatasetFormat.from_path(path)
    with path.open("rb") as stream:
        return parse_dataset(stream, dataset_format, source=str(path))


def write_jsonl(records: Iterable[OerRecord], stream: TextIO) -> int:
    """Writes records in the canonical JSON-lines format; returns the count."""
    count = 0
    for record in records:
        stream.write(json.dumps(record.to_dict(), ensure_ascii=False))
        stream.write("\n")
        count += 1
    return count


@dataclass(frozen=True)
class DatasetSummary:
    """Record counts in total and per quality flag."""

    total: int = 0
    with_control: int = 0
    without_control: int = 0
    unknown: int = 0

    def to_dict(self) -> dict[str, int]:
        return {
            "total": self.total,
            "with_control": self.with_control,
            "without_control": self.without_control,
            "unknown": self.unknown,
        }


def dataset_summary(records: Iterable[OerRecord]) -> DatasetSummary:
    counts = Counter(record.quality_flag for record in records)
    return DatasetSummary(
        total=sum(counts.values()),
        with_control=counts[QualityFlag.WITH_CONTROL],
        without_control=counts[QualityFlag.WITHOUT_CONTROL],
        unknown=counts[QualityFlag.UNKNOWN],
    )
