import numpy as np
import pytest

_VERDICTS = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance verdict and assert on it.

    Usage: ``verdict(number, ok, detail)``.  The line is printed immediately
    and repeated in the terminal summary so it survives output capture.
    """
    def record(number, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        _VERDICTS[number] = line
        print(line)
        assert ok, line

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[number])
