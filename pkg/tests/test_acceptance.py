"""The ten acceptance criteria at their stated tolerances.

Each test prints one pass/fail line; the lines are repeated in the terminal
summary so they survive output capture.
"""

import json

import pytest

from nlsdecay import acceptance
from nlsdecay.io import to_jsonable

ACCEPTANCE_LINES = []


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    result = acceptance.CRITERIA[number]()
    line = acceptance.format_line(result)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, json.dumps(to_jsonable(result.detail), indent=1)
