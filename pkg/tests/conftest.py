"""Shared fixtures for the test suite.

``tests/data/fixture_scores.csv`` is the bundled deterministic score table
used by the CLI and pipeline tests: 180 samples (group a: 60+/60-, group b:
30+/30-), 21 members, planted member recall 0.85/0.55, specificity 0.8.
Regenerate it with:

    python -m fairvote.cli simulate --out tests/data/fixture_scores.csv \
        --groups a,b --positives 60,30 --negatives 60,30 --members 21 \
        --recall 0.85,0.55 --specificity 0.8 --mode latent --sigma 0.15 \
        --test-fraction 0.25 --seed 11

and delete the sibling manifest file.
"""

from __future__ import annotations

import os

import pytest

from fairvote import ScoreTable, load_score_table

FIXTURE_PATH = os.path.join(os.path.dirname(__file__), "data",
                            "fixture_scores.csv")


@pytest.fixture(scope="session")
def fixture_path() -> str:
    assert os.path.exists(FIXTURE_PATH), (
        "bundled fixture missing; regenerate it with the command in "
        "tests/conftest.py"
    )
    return FIXTURE_PATH


@pytest.fixture(scope="session")
def fixture_table(fixture_path) -> ScoreTable:
    return load_score_table(fixture_path)
