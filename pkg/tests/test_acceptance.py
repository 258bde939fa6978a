"""The eleven acceptance criteria, each at its stated tolerance and runtime budget.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary. Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import pytest

from offrl.checks import CHECKS, run_check

LINES = {}


@pytest.mark.acceptance
@pytest.mark.parametrize("criterion", sorted(CHECKS))
def test_criterion(criterion):
    res = run_check(criterion)
    LINES[criterion] = res.line()
    print(res.line())
    assert res.passed, res.line()
