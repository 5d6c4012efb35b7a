"""End-to-end acceptance criteria A1..A8, one test each.

Every test prints a single PASS/FAIL line with the measured values, so the
outcome is visible in ``pytest -v`` output even when the criterion passes.
Deselect with ``-m "not acceptance"`` for a quick run.
"""

import pytest

from disagree.harness.acceptance import CRITERIA, run_criterion

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("name", list(CRITERIA))
def test_criterion(name, capsys):
    res = run_criterion(name)
    with capsys.disabled():
        print(f"\n{res.line()}")
    assert res.passed, res.line()
