"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line (with the failing
clauses named) straight to the terminal, then asserts the verdict.  The
checks live in ``uavcomp.acceptance`` so ``uavcomp run verify`` reports the
same numbers.  Monte-Carlo batches are shared between criteria, so the first
coverage-related test is the slow one.
"""

import pytest

from uavcomp import acceptance


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, len(acceptance.CRITERIA) + 1))
def test_criterion(number, capsys):
    res = acceptance.CRITERIA[number - 1]()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.number == number
    assert res.passed, f"{res.title}: clauses {res.clauses}; details {res.details}"
