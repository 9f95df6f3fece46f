import os
from pathlib import Path

import pytest

PROMISE_ENV = "FAULTPRED_PROMISE_DIR"
DEFAULT_PROMISE_DIR = Path(__file__).parent / "data" / "promise"


def promise_dir() -> Path | None:
    """Directory holding the PROMISE CK tables (``<project>.csv``), if present."""
    p = Path(os.environ.get(PROMISE_ENV, DEFAULT_PROMISE_DIR))
    return p if p.is_dir() and any(p.glob("*.csv")) else None


@pytest.fixture
def promise():
    p = promise_dir()
    if p is None:
        pytest.skip(f"PROMISE tables not available; set {PROMISE_ENV}")
    return p


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
