import math
import random

import pytest

from oer_quality.benchmark import (
    Benchmark,
    LengthDistribution,
    derive_benchmark,
    derive_importance,
    fit_length_distribution,
    normalize_importance,
    paper_benchmark,
)
from oer_quality.metadata import (
    BenchmarkError,
    OerRecord,
    QualityFlag,
    ScoredField,
    UnratedFieldError,
    field_present,
)

CONTROLLED = QualityFlag.WITH_CONTROL


def _controlled(**values) -> OerRecord:
    return OerRecord.create(quality_flag=CONTROLLED, **values)


def _titles(*word_counts) -> list[OerRecord]:
    return [_controlled(title=" ".join(["w"] * n)) for n in word_counts]


def test_importance_of_always_present_field_is_one():
    """Verifies a field present in every controlled record has rate 1."""
    records = [_controlled(title=f"title {i}") for i in range(5)]
    assert derive_importance(records)[ScoredField.TITLE] == 1.0


def test_importance_is_the_presence_share():
    """Verifies the rate is the share of records where the field is present."""
    records = [_controlled(subjects=["a"]) for _ in range(3)] + [_controlled(subjects=[])]
    assert derive_importance(records)[ScoredField.SUBJECTS] == 0.75

    records = [_controlled(time_required="2 hours") for _ in range(29)]
    records += [_controlled() for _ in range(21)]
    assert derive_importance(records)[ScoredField.TIME_REQUIRED] == pytest.approx(0.58)


def test_importance_needs_a_controlled_population():
    """Verifies empty and mixed populations are refused."""
    with pytest.raises(BenchmarkError, match="empty benchmark population"):
        derive_importance([])
    with pytest.raises(BenchmarkError, match="must be quality controlled"):
        derive_importance([_controlled(), OerRecord.create()])


@pytest.mark.repeat(5)
def test_importance_matches_a_recount():
    """Verifies every rate against a direct count over random records."""
    rnd = random.Random()
    records = [
        _controlled(
            title="t" if rnd.random() < 0.9 else "",
            description="d" if rnd.random() < 0.8 else "",
            subjects=["s"] if rnd.random() < 0.7 else [],
            level="l" if rnd.random() < 0.6 else None,
            languages=["en"] if rnd.random() < 0.5 else [],
            time_required="1h" if rnd.random() < 0.4 else None,
            accessibilities=["captions"] if rnd.random() < 0.3 else [],
        )
        for _ in range(rnd.randint(1, 200))
    ]
    importance = derive_importance(records)
    for scored_field in ScoredField:
        count = len([r for r in records if field_present(r, scored_field)])
        assert importance[scored_field] == count / len(records)
        assert 0.0 <= importance[scored_field] <= 1.0


def test_normalizing_the_published_rates():
    """Verifies normalizing the published rates reproduces the published weights."""
    published = paper_benchmark()
    normalized = normalize_importance(published.importance)
    assert math.fsum(normalized.values()) == pytest.approx(1.0, abs=1e-12)
    for scored_field in ScoredField:
        assert normalized[scored_field] == pytest.approx(
            published.normalized_importance[scored_field], abs=0.005
        )


def test_normalize_edge_cases():
    """Verifies a single non-zero rate, uniform rates and all-zero rates."""
    single = {f: 0.0 for f in ScoredField} | {ScoredField.LEVEL: 0.4}
    normalized = normalize_importance(single)
    assert normalized[ScoredField.LEVEL] == 1.0
    assert all(normalized[f] == 0.0 for f in ScoredField if f is not ScoredField.LEVEL)

    uniform = normalize_importance({f: 0.5 for f in ScoredField})
    assert all(v == pytest.approx(1 / 7) for v in uniform.values())

    with pytest.raises(BenchmarkError, match="all-zero"):
        normalize_importance({f: 0.0 for f in ScoredField})


@pytest.mark.repeat(5)
def test_normalization_is_scale_invariant():
    """Verifies scaling every rate by the same factor leaves the weights unchanged."""
    rnd = random.Random()
    rates = {f: rnd.uniform(0.01, 1.0) for f in ScoredField}
    factor = rnd.uniform(0.1, 0.99)
    scaled = {f: v * factor for f, v in rates.items()}
    for scored_field in ScoredField:
        assert normalize_importance(scaled)[scored_field] == pytest.approx(
            normalize_importance(rates)[scored_field], rel=1e-12
        )


def test_fit_length_distribution():
    """Verifies mean and sample standard deviation on small fixtures."""
    dist = fit_length_distribution(_titles(4, 6), ScoredField.TITLE)
    assert dist.mean == pytest.approx(5.0)
    assert dist.std == pytest.approx(1.4142, abs=1e-4)

    dist = fit_length_distribution(_titles(2, 4, 6, 8, 10), ScoredField.TITLE)
    assert dist.mean == pytest.approx(6.0)
    assert dist.std == pytest.approx(3.1623, abs=1e-4)


def test_absent_values_do_not_take_part_in_the_fit():
    """Verifies an empty title is missing rather than a length of zero."""
    with_empty = _titles(4, 6) + [_controlled(title="")]
    assert fit_length_distribution(with_empty, ScoredField.TITLE) == fit_length_distribution(
        _titles(4, 6), ScoredField.TITLE
    )


def test_degenerate_distributions_are_refused():
    """Verifies zero spread and too few values raise BenchmarkError."""
    with pytest.raises(BenchmarkError, match="degenerate distribution"):
        fit_length_distribution(_titles(5, 5, 5), ScoredField.TITLE)
    with pytest.raises(BenchmarkError, match="degenerate distribution"):
        fit_length_distribution(_titles(5), ScoredField.TITLE)
    with pytest.raises(BenchmarkError, match="degenerate distribution"):
        LengthDistribution(3.0, 0.0)


def test_fit_refuses_presence_rated_fields():
    """Verifies there is no length distribution for a presence-rated field."""
    with pytest.raises(UnratedFieldError):
        fit_length_distribution([_controlled(level="Beginner")] * 2, ScoredField.LEVEL)


def test_published_benchmark_values():
    """Verifies the stored reference benchmark."""
    benchmark = paper_benchmark()
    assert benchmark.is_preset
    assert benchmark.importance[ScoredField.SUBJECTS] == 0.86
    assert benchmark.normalized_importance[ScoredField.TITLE] == 0.17
    assert benchmark.normalized_importance[ScoredField.ACCESSIBILITIES] == 0.099
    assert math.fsum(benchmark.normalized_importance.values()) == pytest.approx(1.002)
    assert benchmark.distributions[ScoredField.DESCRIPTION] == LengthDistribution(54.5, 40.0)


def test_derived_benchmark_is_exactly_normalized(make_record):
    """Verifies a derived benchmark sums to 1 and survives a save/load cycle."""
    records = [
        make_record(),
        make_record(title="short title", subjects=["Nursing"], level=None),
        make_record(description="a much shorter description", accessibilities=[]),
    ]
    benchmark = derive_benchmark(records, provenance="fixture")
    assert not benchmark.is_preset
    assert math.fsum(benchmark.normalized_importance.values()) == pytest.approx(1.0, abs=1e-9)
    assert benchmark.importance[ScoredField.LEVEL] == pytest.approx(2 / 3)
    assert benchmark.distributions[ScoredField.SUBJECTS].mean == pytest.approx(3.0)
    assert benchmark.provenance == "fixture"
    assert Benchmark.from_dict(benchmark.to_dict()) == benchmark


def test_inconsistent_derived_benchmark_is_refused():
    """Verifies weights that are not the normalized rates are rejected."""
    document = paper_benchmark().to_dict()
    document["provenance"] = "derived"
    with pytest.raises(BenchmarkError, match="sums to"):
        Benchmark.from_dict(document)


@pytest.mark.parametrize(
    "section, key, value",
    [
        ("importance", "level", 0.5),
        ("normalized_importance", "title", 0.9),
        ("distributions", "title", {"mean": 12.0, "std": 2.5}),
    ],
)
def test_edited_preset_document_is_refused(section, key, value):
    """Verifies a document claiming the preset provenance must carry the preset values."""
    document = paper_benchmark().to_dict()
    document[section][key] = value
    with pytest.raises(BenchmarkError, match="differs from the paper-table-1 preset"):
        Benchmark.from_dict(document)


def test_preset_document_round_trip(tmp_path):
    """Verifies the untouched preset loads back equal to the original."""
    path = tmp_path / "benchmark.json"
    paper_benchmark().save(path)
    loaded = Benchmark.load(path)
    assert loaded == paper_benchmark()
    assert loaded.is_preset


def test_malformed_benchmark_document():
    """Verifies missing keys and unknown field names raise BenchmarkError."""
    with pytest.raises(BenchmarkError, match="malformed benchmark document"):
        Benchmark.from_dict({"importance": {}})
    document = paper_benchmark().to_dict()
    document["importance"]["rating"] = 0.5
    with pytest.raises(BenchmarkError, match="malformed benchmark document"):
        Benchmark.from_dict(document)


def test_load_rejects_non_json(tmp_path):
    """Verifies a file that is not JSON raises BenchmarkError."""
    path = tmp_path / "benchmark.json"
    path.write_text("importance: 1\n", encoding="utf-8")
    with pytest.raises(BenchmarkError, match="not a JSON document"):
        Benchmark.load(path)
