"""
Rates metadata fields against a benchmark and combines the ratings into scores.

Two scores are computed for a record:

- availability: the sum of normalized importance rates over present fields,
  i.e. weighted completeness;
- normal: the importance-weighted sum of per-field ratings, i.e. how closely
  the record resembles the quality-controlled population.

Length-rated fields use the reverse Z-score rating
``1 / max(1, ceil(|x - mean| / std))`` (0 when empty); the others are rated 1
when present and 0 otherwise. An absent field contributes 0 to both scores.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from oer_quality.benchmark import Benchmark, LengthDistribution
from oer_quality.metadata import (
    OerRecord,
    RatingKind,
    ScoredField,
    field_length,
    field_present,
)


def numeric_rating(length: int, dist: LengthDistribution) -> float:
    """Rates a length by how many standard deviations it lies from the mean.

    Returns 0 for an empty field, 1 anywhere within one std of the mean, and
    1/k for lengths between k-1 and k stds away.
    """
    if length <= 0:
        return 0.0
    distance = math.ceil(abs(length - dist.mean) / dist.std)
    return 1.0 / max(1, distance)


def boolean_rating(present: bool) -> float:
    return 1.0 if present else 0.0


class RatingFunction(ABC):
    """Maps one field of a record to a rating in [0, 1]."""

    @classmethod
    @abstractmethod
    def rate(cls, record: OerRecord, scored_field: ScoredField, benchmark: Benchmark) -> float: ...


class NumericRating(RatingFunction):
    """Reverse Z-score rating of the field's length."""

    @classmethod
    def rate(cls, record, scored_field, benchmark):
        return numeric_rating(
            field_length(record, scored_field), benchmark.distributions[scored_field]
        )


class BooleanRating(RatingFunction):
    """1 if the field is available, 0 otherwise."""

    @classmethod
    def rate(cls, record, scored_field, benchmark):
        return boolean_rating(field_present(record, scored_field))


RATING_FUNCTIONS: Mapping[RatingKind, type[RatingFunction]] = {
    RatingKind.NUMERIC: NumericRating,
    RatingKind.BOOLEAN: BooleanRating,
}


def rate_field(record: OerRecord, scored_field: ScoredField, benchmark: Benchmark) -> float:
    return RATING_FUNCTIONS[scored_field.rating_kind].rate(record, scored_field, benchmark)


@dataclass(frozen=True)
class QualityScores:
    """Both scores of one record plus the per-field ratings behind the normal score."""

    availability: float
    normal: float
    per_field_rating: Mapping[ScoredField, float]

    def to_dict(self, url: str = "") -> dict:
        return {
            "url": url,
            "availability": self.availability,
            "normal": self.normal,
            "ratings": {f.value: self.per_field_rating[f] for f in ScoredField},
        }


def availability_score(record: OerRecord, benchmark: Benchmark) -> float:
    return math.fsum(
        benchmark.normalized_importance[f]
        for f in ScoredField
        if field_present(record, f)
    )


def normal_score(record: OerRecord, benchmark: Benchmark) -> float:
    return math.fsum(
        benchmark.normalized_importance[f] * rate_field(record, f, benchmark)
        for f in ScoredField
    )


def score_record(record: OerRecord, benchmark: Benchmark) -> QualityScores:
    ratings = {f: rate_field(record, f, benchmark) for f in ScoredField}
    return QualityScores(
        availability=availability_score(record, benchmark),
        normal=math.fsum(benchmark.normalized_importance[f] * ratings[f] for f in ScoredField),
        per_field_rating=ratings,
    )


def score_batch(records: Iterable[OerRecord], benchmark: Benchmark) -> list[QualityScores]:
    """Scores every record; output order matches input order."""
    return [score_record(record, benchmark) for record in records]
