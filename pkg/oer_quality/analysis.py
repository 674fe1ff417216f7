"""
Exploratory analyses of a metadata corpus.

- Field availability per quality-control group: how often each scored field
  is present among controlled vs uncontrolled records.
- Yearly control share: the fraction of controlled records per year of
  issue (falling back to the availability date).
"""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import pandas as pd

from oer_quality.metadata import OerRecord, QualityFlag, ScoredField, field_present

logger = logging.getLogger(__name__)

DEFAULT_LOW_CONFIDENCE_BELOW = 10


class GroupRates(NamedTuple):
    """Availability of one field per group; None when the group is empty."""

    with_control: float | None
    without_control: float | None

    @property
    def difference(self) -> float | None:
        if self.with_control is None or self.without_control is None:
            return None
        return self.with_control - self.without_control


def availability_by_group(records: Iterable[OerRecord]) -> dict[ScoredField, GroupRates]:
    groups: dict[QualityFlag, list[OerRecord]] = defaultdict(list)
    for record in records:
        if record.quality_flag.is_known:
            groups[record.quality_flag].append(record)

    def rate(members: Sequence[OerRecord], scored_field: ScoredField) -> float | None:
        if not members:
            return None
        return sum(1 for r in members if field_present(r, scored_field)) / len(members)

    return {
        scored_field: GroupRates(
            rate(groups[QualityFlag.WITH_CONTROL], scored_field),
            rate(groups[QualityFlag.WITHOUT_CONTROL], scored_field),
        )
        for scored_field in ScoredField
    }


class YearShare(NamedTuple):
    controlled_fraction: float | None
    """WithControl / (WithControl + WithoutControl); None if no labelled record."""
    total: int
    """All dated records of the year, including unlabelled ones."""
    low_confidence: bool


@dataclass(frozen=True)
class YearlyTrend:
    years: dict[int, YearShare]
    """Ordered by year."""
    excluded: int
    """Records with neither an issue nor an availability date."""


def record_year(record: OerRecord) -> int | None:
    date = record.date_issued or record.date_available
    return date.year if date is not None else None


def yearly_control_trend(
    records: Iterable[OerRecord], low_confidence_below: int = DEFAULT_LOW_CONFIDENCE_BELOW
) -> YearlyTrend:
    totals: Counter[int] = Counter()
    flags: dict[int, Counter[QualityFlag]] = defaultdict(Counter)
    excluded = 0
    for record in records:
        year = record_year(record)
        if year is None:
            excluded += 1
            continue
        totals[year] += 1
        flags[year][record.quality_flag] += 1

    years: dict[int, YearShare] = {}
    for year in sorted(totals):
        controlled = flags[year][QualityFlag.WITH_CONTROL]
        labelled = controlled + flags[year][QualityFlag.WITHOUT_CONTROL]
        years[year] = YearShare(
            controlled / labelled if labelled else None,
            totals[year],
            totals[year] < low_confidence_below,
        )
    low = [year for year, share in years.items() if share.low_confidence]
    if low:
        logger.warning("low-confidence years (fewer than %d records): %s", low_confidence_below, low)
    if excluded:
        logger.info("%d records have no usable date", excluded)
    return YearlyTrend(years, excluded)


@dataclass(frozen=True)
class AnalysisReport:
    availability_by_group: Mapping[ScoredField, GroupRates]
    yearly_control_share: YearlyTrend

    def availability_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "field": scored_field.value,
                    "with_control_rate": rates.with_control,
                    "without_control_rate": rates.without_control,
                    "difference": rates.difference,
                }
                for scored_field, rates in self.availability_by_group.items()
            ],
            columns=["field", "with_control_rate", "without_control_rate", "difference"],
        )

    def yearly_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "year": year,
                    "controlled_fraction": share.controlled_fraction,
                    "total": share.total,
                    "low_confidence": share.low_confidence,
                }
                for year, share in self.yearly_control_share.years.items()
            ],
            columns=["year", "controlled_fraction", "total", "low_confidence"],
        )

    def to_dict(self) -> dict:
        return {
            "availability_by_group": {
                scored_field.value: {
                    "with_control_rate": rates.with_control,
                    "without_control_rate": rates.without_control,
                }
                for scored_field, rates in self.availability_by_group.items()
            },
            "yearly_control_share": {
                str(year): share._asdict()
                for year, share in self.yearly_control_share.years.items()
            },
            "undated_records": self.yearly_control_share.excluded,
        }

    def write(self, json_path: "str | Path") -> list[Path]:
        """Writes the JSON report plus one CSV table per analysis next to it."""
        json_path = Path(json_path)
        json_path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        stem = json_path.with_suffix("")
        availability_csv = stem.with_name(stem.name + "_availability.csv")
        yearly_csv = stem.with_name(stem.name + "_yearly.csv")
        self.availability_frame().to_csv(availability_csv, index=False)
        self.yearly_frame().to_csv(yearly_csv, index=False)
        return [json_path, availability_csv, yearly_csv]


def analyze(
    records: Sequence[OerRecord], low_confidence_below: int = DEFAULT_LOW_CONFIDENCE_BELOW
) -> AnalysisReport:
    return AnalysisReport(
        availability_by_group=availability_by_group(records),
        yearly_control_share=yearly_control_trend(records, low_confidence_below),
    )
