"""
Derives the metadata benchmark from quality-controlled records.

A benchmark holds, for each scored field, its importance rate (the share of
controlled records where the field is present), the normalized importance rate
used as a scoring weight, and for the three length-rated fields a fitted
normal distribution of lengths.

`paper_benchmark()` returns the published reference values verbatim. Its
normalized rates are rounded and sum to 1.002; derived benchmarks are exactly
normalized.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from oer_quality.metadata import (
    NUMERIC_FIELDS,
    BenchmarkError,
    OerRecord,
    QualityFlag,
    ScoredField,
    field_length,
    field_present,
)

logger = logging.getLogger(__name__)

REFERENCE_PROVENANCE = "paper-table-1"
NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class LengthDistribution:
    """Mean and sample standard deviation of a field's length."""

    mean: float
    std: float

    def __post_init__(self):
        if not math.isfinite(self.mean) or not math.isfinite(self.std) or self.std <= 0:
            raise BenchmarkError(
                f"degenerate distribution (mean={self.mean}, std={self.std})"
            )

    def to_dict(self) -> dict[str, float]:
        return {"mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class Benchmark:
    """Per-field weights and length distributions used by the scoring models."""

    importance: Mapping[ScoredField, float]
    normalized_importance: Mapping[ScoredField, float]
    distributions: Mapping[ScoredField, LengthDistribution]
    provenance: str = "derived"

    def __post_init__(self):
        self.validate()

    @property
    def is_preset(self) -> bool:
        """True for the published reference values, which are rounded."""
        return self.provenance == REFERENCE_PROVENANCE

    def validate(self) -> None:
        """Checks completeness, ranges and (for derived benchmarks) normalization.

        Raises:
            BenchmarkError: If any check fails.
        """
        for name, mapping in (
            ("importance", self.importance),
            ("normalized_importance", self.normalized_importance),
        ):
            missing = [f.value for f in ScoredField if f not in mapping]
            if missing:
                raise BenchmarkError(f"{name} is missing fields: {', '.join(missing)}")
            for scored_field in ScoredField:
                value = mapping[scored_field]
                if not 0.0 <= value <= 1.0:
                    raise BenchmarkError(
                        f"{name}[{scored_field.value}] = {value} is outside [0, 1]"
                    )
        missing = [f.value for f in NUMERIC_FIELDS if f not in self.distributions]
        if missing:
            raise BenchmarkError(f"distributions are missing fields: {', '.join(missing)}")

        if self.is_preset:
            self._check_reference_values()
            return
        total = math.fsum(self.normalized_importance.values())
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise BenchmarkError(f"normalized importance sums to {total}, not 1")
        importance_total = math.fsum(self.importance.values())
        for scored_field in ScoredField:
            expected = self.importance[scored_field] / importance_total
            if abs(self.normalized_importance[scored_field] - expected) > NORMALIZATION_TOLERANCE:
                raise BenchmarkError(
                    f"normalized importance of {scored_field.value} does not match its rate"
                )

    def _check_reference_values(self) -> None:
        # The preset is exempt from the sum-to-one check, so its values must be
        # exactly the published ones.
        for name, mapping, reference in (
            ("importance", self.importance, _REFERENCE_IMPORTANCE),
            ("normalized_importance", self.normalized_importance, _REFERENCE_NORMALIZED_IMPORTANCE),
        ):
            for scored_field, expected in reference.items():
                if not math.isclose(mapping[scored_field], expected, abs_tol=NORMALIZATION_TOLERANCE):
                    raise BenchmarkError(
                        f"{name}[{scored_field.value}] = {mapping[scored_field]} differs from "
                        f"the {REFERENCE_PROVENANCE} preset"
                    )
        for scored_field, expected in _REFERENCE_DISTRIBUTIONS.items():
            actual = self.distributions[scored_field]
            if not (
                math.isclose(actual.mean, expected.mean, abs_tol=NORMALIZATION_TOLERANCE)
                and math.isclose(actual.std, expected.std, abs_tol=NORMALIZATION_TOLERANCE)
            ):
                raise BenchmarkError(
                    f"distribution of {scored_field.value} differs from the "
                    f"{REFERENCE_PROVENANCE} preset"
                )

    def to_dict(self) -> dict:
        return {
            "importance": {f.value: self.importance[f] for f in ScoredField},
            "normalized_importance": {
                f.value: self.normalized_importance[f] for f in ScoredField
            },
            "distributions": {
                f.value: self.distributions[f].to_dict() for f in NUMERIC_FIELDS
            },
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, document: Mapping) -> "Benchmark":
        try:
            return cls(
                importance=_field_map(document["importance"]),
                normalized_importance=_field_map(document["normalized_importance"]),
                distributions={
                    ScoredField(name): LengthDistribution(
                        float(dist["mean"]), float(dist["std"])
                    )
                    for name, dist in document["distributions"].items()
                },
                provenance=str(document.get("provenance", "derived")),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, BenchmarkError):
                raise
            raise BenchmarkError(f"malformed benchmark document: {e}") from e

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: "str | Path") -> "Benchmark":
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise BenchmarkError(f"{path} is not a JSON document: {e.msg}") from e
        return cls.from_dict(document)


def _field_map(raw: Mapping) -> dict[ScoredField, float]:
    return {ScoredField(name): float(value) for name, value in raw.items()}


def _controlled_population(records: Iterable[OerRecord]) -> list[OerRecord]:
    population = list(records)
    if not population:
        raise BenchmarkError("empty benchmark population")
    stray = sum(1 for r in population if r.quality_flag is not QualityFlag.WITH_CONTROL)
    if stray:
        raise BenchmarkError(
            f"benchmark population must be quality controlled; {stray} records are not"
        )
    return population


def derive_importance(records: Iterable[OerRecord]) -> dict[ScoredField, float]:
    """Returns the share of controlled records in which each field is present.

    Raises:
        BenchmarkError: If the population is empty or holds uncontrolled records.
    """
    population = _controlled_population(records)
    return {
        scored_field: sum(1 for r in population if field_present(r, scored_field))
        / len(population)
        for scored_field in ScoredField
    }


def normalize_importance(
    importance: Mapping[ScoredField, float],
) -> dict[ScoredField, float]:
    """Divides each importance rate by the sum of all rates.

    Raises:
        BenchmarkError: If a rate is negative or every rate is zero.
    """
    if any(value < 0 for value in importance.values()):
        raise BenchmarkError("importance rates must be non-negative")
    total = math.fsum(importance.values())
    if total <= 0:
        raise BenchmarkError("cannot normalize all-zero importance rates")
    return {scored_field: importance[scored_field] / total for scored_field in importance}


def fit_length_distribution(
    records: Iterable[OerRecord], scored_field: ScoredField
) -> LengthDistribution:
    """Fits mean and sample standard deviation (n-1) of a field's lengths.

    Only records where the field is present take part; an empty value is
    missing, not short.

    Raises:
        UnratedFieldError: If the field is rated by presence only.
        BenchmarkError: With fewer than two values or zero spread.
    """
    lengths = [
        field_length(r, scored_field) for r in records if field_present(r, scored_field)
    ]
    if len(lengths) < 2:
        raise BenchmarkError(
            f"degenerate distribution: {scored_field.value} has {len(lengths)} values"
        )
    values = np.asarray(lengths, dtype=float)
    return LengthDistribution(float(values.mean()), float(values.std(ddof=1)))


def derive_benchmark(records: Sequence[OerRecord], provenance: str = "derived") -> Benchmark:
    """Builds a full benchmark from a quality-controlled population."""
    importance = derive_importance(records)
    benchmark = Benchmark(
        importance=importance,
        normalized_importance=normalize_importance(importance),
        distributions={f: fit_length_distribution(records, f) for f in NUMERIC_FIELDS},
        provenance=provenance,
    )
    logger.info("derived benchmark from %d controlled records", len(records))
    return benchmark


_REFERENCE_IMPORTANCE = {
    ScoredField.TITLE: 1.0,
    ScoredField.DESCRIPTION: 1.0,
    ScoredField.SUBJECTS: 0.86,
    ScoredField.LEVEL: 0.98,
    ScoredField.LANGUAGE: 0.92,
    ScoredField.TIME_REQUIRED: 0.58,
    ScoredField.ACCESSIBILITIES: 0.59,
}

_REFERENCE_NORMALIZED_IMPORTANCE = {
    ScoredField.TITLE: 0.17,
    ScoredField.DESCRIPTION: 0.17,
    ScoredField.SUBJECTS: 0.145,
    ScoredField.LEVEL: 0.165,
    ScoredField.LANGUAGE: 0.155,
    ScoredField.TIME_REQUIRED: 0.098,
    ScoredField.ACCESSIBILITIES: 0.099,
}

_REFERENCE_DISTRIBUTIONS = {
    ScoredField.TITLE: LengthDistribution(5.5, 2.5),
    ScoredField.DESCRIPTION: LengthDistribution(54.5, 40.0),
    ScoredField.SUBJECTS: LengthDistribution(4.5, 3.5),
}


def paper_benchmark() -> Benchmark:
    """Returns the published reference benchmark (rounded values, stored verbatim)."""
    return Benchmark(
        importance=dict(_REFERENCE_IMPORTANCE),
        normalized_importance=dict(_REFERENCE_NORMALIZED_IMPORTANCE),
        distributions=dict(_REFERENCE_DISTRIBUTIONS),
        provenance=REFERENCE_PROVENANCE,
    )
