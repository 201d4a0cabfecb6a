import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line, then assert on it."""
    def _report(num, name, ok, detail=""):
        _LINES.append((str(num), name, bool(ok), detail))
        assert ok, f"criterion {num} ({name}): {detail}"
    return _report


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in _LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {num:<3} {name}: {detail}")
