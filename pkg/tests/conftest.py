import pytest

_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, passed, detail)``."""

    def _report(number, passed, detail):
        line = f"criterion {number:>3}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
