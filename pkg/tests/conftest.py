from __future__ import annotations

import sys
from pathlib import Path

import pytest

from carreg.simulation import paper_model, run_replicates, theoretical_variance

sys.path.insert(0, str(Path(__file__).parent))

# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


PAPER_SEED = 0


@pytest.fixture(scope="session")
def paper():
    return paper_model()


@pytest.fixture(scope="session")
def oracle(paper):
    return theoretical_variance(paper, oracle_samples=1_000_000, seed=12345)


@pytest.fixture(scope="session")
def replicates_1600(paper):
    """The benchmark configuration at n=1600: m=50, 1000 replicates, seed 0."""
    return run_replicates(paper, 1600, 1000, 50, seed=PAPER_SEED, workers=2)
