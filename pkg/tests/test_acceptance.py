"""The fourteen acceptance criteria, one test each.

Every criterion prints a single ``[PASS]`` or ``[FAIL]`` line; the lines are
also collected and repeated in the terminal summary so they survive output
capture.  Details of a failing criterion are attached to the assertion.
"""
import json
import os

import pytest

from kacgap.acceptance import CRITERIA, Settings, run_criterion

SETTINGS = Settings(threads=os.cpu_count() or 1)
LINES: dict[int, str] = {}


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    r = run_criterion(k, SETTINGS)
    LINES[k] = r.line()
    print(r.line())
    assert r.passed, json.dumps(r.as_dict()["details"], indent=1, default=str)[:4000]
