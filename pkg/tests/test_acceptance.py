"""Acceptance criteria 1-12, measured by the full (not fast) verification suites.

The suites run once per session; each criterion then gets its own test and
prints one PASS/FAIL line. Expect roughly a quarter of an hour on one core.
"""
import time

import pytest

from conftest import ACCEPTANCE_LINES
from patchlab.verify import CRITERIA, SUITES, criteria_summary, run_suite


@pytest.fixture(scope="session")
def acceptance():
    t0 = time.perf_counter()
    checks = [c for name in SUITES for c in run_suite(name, fast=False, seed=0)]
    seconds = time.perf_counter() - t0
    summary = {k: (ok, line) for k, ok, line in criteria_summary(checks, seconds)}
    ACCEPTANCE_LINES.extend(line for _, line in summary.values())
    return summary


@pytest.mark.parametrize("criterion", sorted(CRITERIA))
def test_criterion(acceptance, criterion):
    ok, line = acceptance[criterion]
    print(line)
    assert ok, line
