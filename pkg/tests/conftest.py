from pathlib import Path

import pytest

from tomteam.types import AlignmentMatrix

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"
SCENARIOS = ROOT / "scenarios"

# symmetric 4-agent matrix, 0-based ids
WORKED_PAIRS = {(0, 1): 0.9, (0, 2): 0.1, (0, 3): 0.5, (1, 2): 0.2, (1, 3): 0.6, (2, 3): -0.3}


@pytest.fixture
def worked() -> AlignmentMatrix:
    return AlignmentMatrix.from_symmetric(WORKED_PAIRS)


def ones(n: int) -> AlignmentMatrix:
    return AlignmentMatrix(0, {(i, j): 1.0 for i in range(n) for j in range(n) if i != j})


# filled by test_acceptance; printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
