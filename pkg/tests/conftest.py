import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[str, tuple[bool, str]] = {}


class CriterionRecorder:
    def __init__(self, key):
        self.key = key

    def __call__(self, passed: bool, detail: str = ""):
        _CRITERIA[self.key] = (bool(passed), detail)
        return passed


@pytest.fixture
def criterion(request):
    """Record the pass/fail line for an acceptance criterion."""
    marker = request.node.get_closest_marker("criterion")
    key = marker.args[0] if marker else request.node.name
    _CRITERIA[key] = (False, "did not complete")
    return CriterionRecorder(key)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (len(k.split()[0]), k)):
        ok, detail = _CRITERIA[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
