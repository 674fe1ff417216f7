import subprocess
import sys
from pathlib import Path

import pytest

from oer_quality.metadata import OerRecord, QualityFlag

REPO_ROOT = Path(__file__).resolve().parents[1]
CORPUS_SCRIPT = REPO_ROOT / "synthetic_oer_gen" / "oer_corpus.py"


def complete_record(**overrides) -> OerRecord:
    """A record with all seven scored fields present, lengths at the reference means."""
    values = dict(
        url="https://oer.example.org/resource/complete",
        title="introduction to patient safety basics",
        description=" ".join(["word"] * 54),
        material_type="Course",
        subjects=["Health Care", "Nursing", "Anatomy", "Pharmacy"],
        level="Beginner",
        languages=["en"],
        time_required="4 weeks",
        accessibilities=["captions"],
        quality_flag=QualityFlag.WITH_CONTROL,
    )
    values.update(overrides)
    return OerRecord.create(**values)


def generate_corpus_lines(count: int = 2000, seed: int = 42) -> str:
    """Runs the synthetic corpus generator in a separate process."""
    result = subprocess.run(
        [sys.executable, str(CORPUS_SCRIPT), str(count), str(seed)],
        capture_output=True,
        text=True,
        check=True,
    )
    return result.stdout


@pytest.fixture
def make_record():
    return complete_record


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory) -> Path:
    """2,000 synthetic records written once per session."""
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    path.write_text(generate_corpus_lines(), encoding="utf-8")
    return path
