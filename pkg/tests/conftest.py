import contextlib
import math

import pytest

TWO_PI = 2 * math.pi

_ACCEPTANCE = {}


@pytest.fixture
def default_omega():
    return TWO_PI * 2e-4


class _Record:
    def __init__(self, tmp):
        self.tmp = str(tmp)
        self.detail = ""


@pytest.fixture
def accept(tmp_path):
    """Context manager recording one acceptance criterion as PASS or FAIL."""

    @contextlib.contextmanager
    def run(number, title):
        rec = _Record(tmp_path)
        try:
            yield rec
        except BaseException as exc:
            why = rec.detail or f"{type(exc).__name__}: {exc}".splitlines()[0]
            _ACCEPTANCE[number] = f"FAIL  #{number:2d} {title}: {why}"
            print(_ACCEPTANCE[number])
            raise
        _ACCEPTANCE[number] = f"PASS  #{number:2d} {title}: {rec.detail}"
        print(_ACCEPTANCE[number])

    return run


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
