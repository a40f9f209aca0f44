import pytest

_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """report(n, passed, detail) records one acceptance line; the assertion stays in the test."""
    def _report(n: int, passed: bool, detail: str) -> bool:
        _RESULTS[n] = (bool(passed), detail)
        print(f"criterion {n}: {'PASS' if passed else 'FAIL'} ({detail})")
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
