import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from infoscribe import _pykernels  # noqa: E402
from infoscribe._backend import kernels as active_kernels  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"

_criteria: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; printed in the terminal summary."""

    def record(name: str, passed: bool, detail: str = ""):
        _criteria.append((name, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _criteria:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip())


@pytest.fixture(params=["python", "active"])
def kernels(request):
    """Both kernel backends (the active one may also be python if the extension is missing)."""
    return _pykernels if request.param == "python" else active_kernels


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)
