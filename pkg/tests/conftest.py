"""Shared fixtures and the acceptance-criteria report hook."""

from __future__ import annotations

import pytest

# (number, description, passed) tuples recorded by the acceptance tests
ACCEPTANCE_RESULTS: list[tuple[int, str, bool]] = []


@pytest.fixture
def acceptance():
    """Record one acceptance criterion outcome and assert it."""

    def record(num: int, desc: str, ok: bool, detail: str = ""):
        ACCEPTANCE_RESULTS.append((num, desc, bool(ok)))
        assert ok, f"acceptance criterion {num} failed: {desc} {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, ok in sorted(set(ACCEPTANCE_RESULTS)):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {num:2d}: {desc}")
