"""Shared fixtures: the acceptance-criterion log printed after the run."""

from contextlib import contextmanager

import pytest

_CRITERIA: dict = {}


def _record(number: int, description: str, status: str) -> None:
    _CRITERIA[number] = (status, description)


@pytest.fixture
def criterion():
    """Context manager factory that logs one PASS/FAIL/SKIP line per
    acceptance criterion for the terminal summary."""

    @contextmanager
    def _criterion(number: int, description: str):
        try:
            yield
        except pytest.skip.Exception:
            _record(number, description, "SKIP")
            raise
        except BaseException:
            _record(number, description, "FAIL")
            raise
        else:
            _record(number, description, "PASS")

    return _criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, description = _CRITERIA[number]
        terminalreporter.write_line(f"{status:<5}{number:>2}. {description}")
