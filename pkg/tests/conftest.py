import os

import numpy as np
import pytest

# Cross-check every closed-form trace against explicit matrix products.
os.environ["NWCORR_CHECK_TRACES"] = "1"

ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(passed, detail)`` for an acceptance criterion and print its verdict line."""
    def record(key, passed, detail):
        ACCEPTANCE[key] = (bool(passed), detail)
        print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {key}: {detail}")
        return passed
    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
