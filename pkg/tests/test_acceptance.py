"""Acceptance battery.

Each criterion prints one PASS/FAIL line with its measured detail. These
run the full Monte-Carlo horizons and take a few minutes in total; the
same battery is reachable from the command line via `barsim verify`.
"""

import pytest

from barsim.acceptance import CRITERIA


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_criterion(criterion):
    result = criterion()
    status = "PASS" if result.passed else "FAIL"
    print(f"\n{status}  {result.name}  |  {result.detail}")
    assert result.passed, f"{result.name}: {result.detail}"
