import dataclasses

import pytest

from oer_quality.metadata import (
    NUMERIC_FIELDS,
    OerQualityError,
    OerRecord,
    QualityFlag,
    RatingKind,
    ScoredField,
    UnratedFieldError,
    field_length,
    field_present,
)


def test_field_present_for_text_and_lists():
    """Verifies presence rules: trimmed text, lists with a non-empty element."""
    record = OerRecord.create(
        title="Health Care Basics",
        description="",
        subjects=[],
        level="   ",
        languages=["", "  "],
        time_required=None,
        accessibilities=["captions"],
    )
    assert field_present(record, ScoredField.TITLE)
    assert not field_present(record, ScoredField.DESCRIPTION)
    assert not field_present(record, ScoredField.SUBJECTS)
    assert not field_present(record, ScoredField.LEVEL)
    assert not field_present(record, ScoredField.LANGUAGE)
    assert not field_present(record, ScoredField.TIME_REQUIRED)
    assert field_present(record, ScoredField.ACCESSIBILITIES)


def test_field_length_counts_words_and_entries():
    """Verifies word counts for text fields and entry counts for subjects."""
    record = OerRecord.create(
        title="Health Care Basics",
        description="",
        subjects=["nursing", "", "anatomy"],
    )
    assert field_length(record, ScoredField.TITLE) == 3
    assert field_length(record, ScoredField.DESCRIPTION) == 0
    assert field_length(record, ScoredField.SUBJECTS) == 2


def test_field_length_splits_on_unicode_whitespace():
    """Verifies that non-breaking and em spaces separate words too."""
    record = OerRecord.create(title="cloud\u00a0computing\u2003basics\n\tlab")
    assert field_length(record, ScoredField.TITLE) == 4


def test_field_length_ignores_surrounding_whitespace():
    """Verifies that padding a value changes neither presence nor length."""
    plain = OerRecord.create(title="Network Security", subjects=["IT"])
    padded = OerRecord.create(title="   Network Security \n", subjects=["  IT  "])
    for scored_field in NUMERIC_FIELDS:
        assert field_length(plain, scored_field) == field_length(padded, scored_field)
        assert field_present(plain, scored_field) == field_present(padded, scored_field)


def test_absent_field_has_length_zero():
    """Verifies that an empty record has length 0 and nothing present."""
    record = OerRecord.create()
    for scored_field in NUMERIC_FIELDS:
        assert field_length(record, scored_field) == 0
    assert not any(field_present(record, f) for f in ScoredField)


@pytest.mark.parametrize(
    "scored_field",
    [
        ScoredField.LEVEL,
        ScoredField.LANGUAGE,
        ScoredField.TIME_REQUIRED,
        ScoredField.ACCESSIBILITIES,
    ],
)
def test_field_length_rejects_presence_rated_fields(scored_field):
    """Verifies that presence-rated fields have no length."""
    record = OerRecord.create(level="Beginner", languages=["en"])
    with pytest.raises(UnratedFieldError, match="rated by presence"):
        field_length(record, scored_field)


def test_unrated_field_error_is_a_value_error():
    """Verifies the error can be caught as ValueError or as a package error."""
    assert issubclass(UnratedFieldError, ValueError)
    assert issubclass(UnratedFieldError, OerQualityError)


def test_rating_kinds():
    """Verifies that exactly title, description and subjects are length-rated."""
    numeric = {f for f in ScoredField if f.rating_kind is RatingKind.NUMERIC}
    assert numeric == set(NUMERIC_FIELDS)
    assert len(list(ScoredField)) == 7


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("with control", QualityFlag.WITH_CONTROL),
        ("With Control", QualityFlag.WITH_CONTROL),
        ("  WITHOUT   control ", QualityFlag.WITHOUT_CONTROL),
        ("controlled", QualityFlag.UNKNOWN),
        ("", QualityFlag.UNKNOWN),
        (None, QualityFlag.UNKNOWN),
        (1, QualityFlag.UNKNOWN),
    ],
)
def test_quality_flag_parse(raw, expected):
    """Verifies case-insensitive parsing with UNKNOWN as the fallback."""
    assert QualityFlag.parse(raw) is expected


def test_records_are_immutable():
    """Verifies that record fields cannot be reassigned."""
    record = OerRecord.create(title="x")
    with pytest.raises(dataclasses.FrozenInstanceError):
        record.title = "y"


def test_create_normalizes_values():
    """Verifies trimming and list conversion in OerRecord.create."""
    record = OerRecord.create(
        url=" https://oer.example.org/1 ",
        title="  Title  ",
        subjects=["a ", " b"],
        level=" Advanced ",
    )
    assert record.url == "https://oer.example.org/1"
    assert record.title == "Title"
    assert record.subjects == ("a", "b")
    assert record.level == "Advanced"
    assert record.languages == ()
    assert record.quality_flag is QualityFlag.UNKNOWN


def test_list_fields_given_as_lists_become_tuples():
    """Verifies records built directly or via replace still score their list fields."""
    direct = OerRecord(subjects=["Nursing", " "], languages=["en"], accessibilities=None)
    assert direct.subjects == ("Nursing", " ")
    assert direct.accessibilities == ()
    assert field_present(direct, ScoredField.SUBJECTS)
    assert field_length(direct, ScoredField.SUBJECTS) == 1
    assert not field_present(direct, ScoredField.ACCESSIBILITIES)

    replaced = dataclasses.replace(OerRecord.create(title="x"), subjects=["IT", "Networking"])
    assert field_length(replaced, ScoredField.SUBJECTS) == 2
    assert replaced == OerRecord.create(title="x", subjects=["IT", "Networking"])
    assert hash(replaced) == hash(OerRecord.create(title="x", subjects=["IT", "Networking"]))

    single = OerRecord(languages="en")
    assert single.languages == ("en",)


def test_to_dict_uses_canonical_keys():
    """Verifies the canonical JSON-lines shape of a record."""
    record = OerRecord.create(title="T", languages=["en"], quality_flag=QualityFlag.WITH_CONTROL)
    document = record.to_dict()
    assert document["quality_control"] == "with control"
    assert document["languages"] == ["en"]
    assert document["date_issued"] is None
    assert list(document) == [
        "url",
        "title",
        "description",
        "material_type",
        "date_available",
        "date_issued",
        "subjects",
        "level",
        "languages",
        "time_required",
        "accessibilities",
        "quality_control",
    ]
