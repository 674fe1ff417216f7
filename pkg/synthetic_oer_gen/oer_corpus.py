"""
Generates a synthetic OER metadata corpus as JSON-lines on stdout.

Records come from two regimes. High-regime records have every field present
with probability 0.9-1.0 and are labelled "with control"; low-regime records
have fields present with probability 0.3-0.6 and are labelled "without
control". In both regimes lengths are drawn around the reference benchmark
means, so the regimes differ in completeness only. The share of the high
regime falls from 70% in 2016 to 30% in 2019.

This script is used by the test suite as a stand-in for a real dataset.

Usage:
    python oer_corpus.py [count] [seed]

Arguments:
    count (int): Number of records to generate. Defaults to 2000.
    seed (int): Generator seed. Defaults to 42.
"""

import json
import sys

import numpy as np

FIRST_YEAR, LAST_YEAR = 2016, 2019
VOCABULARY = (
    "nursing health care patient safety network security cloud computing "
    "anatomy data database programming clinical skills module lesson course "
    "introduction advanced practice lab assessment systems support design"
).split()
SUBJECTS = (
    "Health Care", "Nursing", "Information Technology", "Networking",
    "Cybersecurity", "Anatomy", "Programming", "Databases", "Pharmacy",
)
LEVELS = ("Beginner", "Intermediate", "Advanced")
LANGUAGES = ("en", "es")
ACCESSIBILITIES = ("captions", "screen reader", "transcript", "alt text")

# (mean, std) of lengths: title words, description words, subject count.
LENGTHS = {"title": (5.5, 2.5), "description": (54.5, 40.0), "subjects": (4.5, 3.5)}
HIGH_SHARE_FIRST_YEAR, HIGH_SHARE_LAST_YEAR = 0.7, 0.3


def _length(rng, mean_std) -> int:
    mean, std = mean_std
    return max(1, int(round(rng.normal(mean, std))))


def _words(rng, count: int) -> str:
    return " ".join(rng.choice(VOCABULARY, size=count))


def generate_record(rng, index: int) -> dict:
    year = int(rng.integers(FIRST_YEAR, LAST_YEAR + 1))
    step = (HIGH_SHARE_FIRST_YEAR - HIGH_SHARE_LAST_YEAR) / (LAST_YEAR - FIRST_YEAR)
    high = rng.random() < HIGH_SHARE_FIRST_YEAR - step * (year - FIRST_YEAR)
    presence = rng.uniform(0.9, 1.0) if high else rng.uniform(0.3, 0.6)

    def present() -> bool:
        return bool(rng.random() < presence)

    record = {
        "url": f"https://oer.example.org/resource/{index}",
        "title": _words(rng, _length(rng, LENGTHS["title"])) if present() else "",
        "description": _words(rng, _length(rng, LENGTHS["description"])) if present() else "",
        "material_type": str(rng.choice(("Course", "Module", "Lab"))),
        "date_available": f"{year}-{int(rng.integers(1, 13)):02d}-15",
        "date_issued": f"{year}-{int(rng.integers(1, 13)):02d}-01",
        "subjects": [
            str(s) for s in rng.choice(SUBJECTS, size=_length(rng, LENGTHS["subjects"]))
        ]
        if present()
        else [],
        "level": str(rng.choice(LEVELS)) if present() else None,
        "languages": [str(rng.choice(LANGUAGES))] if present() else [],
        "time_required": f"{int(rng.integers(1, 13))} weeks" if present() else None,
        "accessibilities": [str(rng.choice(ACCESSIBILITIES))] if present() else [],
        "quality_control": "with control" if high else "without control",
    }
    return record


def generate_corpus(count: int = 2000, seed: int = 42) -> list[dict]:
    rng = np.random.default_rng(seed)
    return [generate_record(rng, index) for index in range(count)]


if __name__ == "__main__":
    count = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 42
    for entry in generate_corpus(count, seed):
        print(json.dumps(entry))
